//! Shared prioritizer fixtures: molecules from the reaction fixture, small
//! template libraries, random tiny configurations and a finite-difference
//! gradient oracle.

use mhnpath::chem::{fingerprint, Molecule};
use mhnpath::mhn::{evaluate, init_model, train, Activation, Dataset, Example, ModelConfig, PrioritizerModel};
use mhnpath::templates::{
    extract_library, parse_mapped_reaction, parse_template, read_reaction_tsv, Template, TemplateLibrary,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 3e-5;
pub const FD_REL_TOL: f64 = 1e-4;
/// Floor of the relative-error denominator; loss roundoff bounds what a
/// difference quotient can resolve below it.
pub const FD_SCALE_FLOOR: f64 = 1e-6;

/// Unmapped products of the bundled reaction fixture, in file order.
pub fn fixture_products() -> Vec<Molecule> {
    read_reaction_tsv(&super::fixture("reactions_100.tsv"))
        .unwrap()
        .iter()
        .map(|r| parse_mapped_reaction(&r.reaction_smiles).unwrap().product.strip_maps())
        .collect()
}

pub fn fixture_library() -> TemplateLibrary {
    let recs = read_reaction_tsv(&super::fixture("reactions_100.tsv")).unwrap();
    extract_library(&recs, 1).0
}

/// `k` bond-cut templates over C/N/O/S with pairwise distinct text.
pub fn cut_library(k: usize) -> TemplateLibrary {
    let sym = ["C", "N", "O", "S"];
    let mut texts = Vec::new();
    for a in sym {
        for b in sym {
            texts.push(format!("[{a}:1]-[{b}:2]>>[{a}:1].[{b}:2]"));
            for c in sym {
                texts.push(format!("[{a}:1]-[{b}:2]-[{c}:3]>>[{a}:1].[{b}:2]-[{c}:3]"));
            }
        }
    }
    let ts: Vec<Template> = texts.iter().take(k).map(|t| parse_template(t).unwrap()).collect();
    assert_eq!(ts.len(), k, "at most {} cut templates", texts.len());
    TemplateLibrary::new(ts).unwrap()
}

/// A random configuration with 16-bit inputs and at most a few hundred
/// parameters, covering every architectural switch.
pub fn random_tiny_config(rng: &mut ChaCha8Rng) -> ModelConfig {
    let mol_layers = rng.random_range(0..=2);
    ModelConfig {
        fp_bits: 16,
        template_fp_bits: 16,
        d_assoc: rng.random_range(3..=6),
        d_mol: Some(rng.random_range(3..=6)),
        d_temp: Some(rng.random_range(3..=6)),
        mol_layers,
        temp_layers: rng.random_range(0..=2),
        beta: rng.random_range(0.2..2.0),
        hopfield_depth: rng.random_range(1..=3),
        dropout: 0.0,
        association_activation: if rng.random::<bool>() {
            Activation::Tanh
        } else {
            Activation::Identity
        },
        input_norm: mol_layers > 0 && rng.random::<bool>(),
        association_norm: rng.random::<bool>(),
        seed: rng.random(),
        ..ModelConfig::default()
    }
}

pub fn examples(mols: &[Molecule], cfg: &ModelConfig, labels: &[usize]) -> Vec<Example> {
    mols.iter()
        .zip(labels)
        .map(|(m, &t)| Example::new(&fingerprint(m, cfg.fp_radius, cfg.fp_bits), t))
        .collect()
}

#[derive(Debug, Default)]
pub struct FdReport {
    pub checked: usize,
    pub worst_rel: f64,
    pub failures: Vec<String>,
}

/// Compare every analytic gradient entry with a fourth-order central
/// difference.
pub fn finite_difference_check(model: &PrioritizerModel, batch: &[Example]) -> FdReport {
    let (_, grads) = model.loss_and_gradients(batch).unwrap();
    let mut probe = model.clone();
    let mut report = FdReport::default();
    for (t, g) in grads.tensors.iter().enumerate() {
        for (idx, &analytic) in g.indexed_iter() {
            let orig = probe.params()[t][idx];
            let mut at = |k: f64| {
                probe.params_mut()[t][idx] = orig + k * FD_STEP;
                probe.loss_and_gradients(batch).unwrap().0
            };
            let numeric = (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * FD_STEP);
            probe.params_mut()[t][idx] = orig;
            let scale = analytic.abs().max(numeric.abs()).max(FD_SCALE_FLOOR);
            let rel = (analytic - numeric).abs() / scale;
            report.checked += 1;
            report.worst_rel = report.worst_rel.max(rel);
            if !(rel <= FD_REL_TOL) {
                report.failures.push(format!(
                    "{}{:?}: analytic {analytic:e} numeric {numeric:e}",
                    model.parameter_names()[t],
                    idx
                ));
            }
        }
    }
    report
}

/// Twenty random tiny models, each checked on a batch of eight fixture
/// molecules with random labels.
pub fn gradient_oracle_suite() -> Vec<(ModelConfig, FdReport)> {
    let mols = fixture_products();
    let lib = cut_library(12);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..20)
        .map(|_| {
            let cfg = random_tiny_config(&mut rng);
            let mut model = init_model(&cfg, &lib).unwrap();
            // Zero biases put dead units exactly on the ReLU kink.
            let names = model.parameter_names().to_vec();
            for (p, name) in model.params_mut().iter_mut().zip(&names) {
                if name.ends_with("bias") {
                    p.mapv_inplace(|_| rng.random_range(-0.5..0.5));
                }
            }
            assert!(model.parameter_count() <= 1000, "{}", model.parameter_count());
            let picks: Vec<Molecule> = (0..8).map(|_| mols[rng.random_range(0..mols.len())].clone()).collect();
            let labels: Vec<usize> = (0..8).map(|_| rng.random_range(0..lib.len())).collect();
            let batch = examples(&picks, &cfg, &labels);
            let report = finite_difference_check(&model, &batch);
            (cfg, report)
        })
        .collect()
}

/// Fifty evaluation cases: the product and extracted template id of every
/// second fixture reaction.
pub fn eval_cases_fixture() -> String {
    let recs = read_reaction_tsv(&super::fixture("reactions_100.tsv")).unwrap();
    let lib = fixture_library();
    let mut out = String::from("product_smiles\ttemplate_id\n");
    for r in recs.iter().step_by(2) {
        let rxn = parse_mapped_reaction(&r.reaction_smiles).unwrap();
        let id = lib.id_of(mhnpath::templates::extract_template(&rxn, 1).unwrap().text()).unwrap();
        out.push_str(&format!("{}\t{id}\n", mhnpath::chem::write_canonical_smiles(&rxn.product.strip_maps())));
    }
    out
}

/// Train on 50 fixture products labelled with 20 random cut templates for
/// 200 epochs. Returns the epoch count and train top-1 accuracy.
pub fn overfit_toy_corpus() -> (usize, f64) {
    let lib = cut_library(20);
    let mols: Vec<_> = fixture_products().into_iter().take(50).collect();
    let cfg = ModelConfig {
        fp_bits: 1024,
        template_fp_bits: 1024,
        d_assoc: 64,
        temp_layers: 1,
        dropout: 0.0,
        lr: 1e-3,
        epochs: 200,
        concat_rand_template_threshold: 0,
        seed: 1,
        ..ModelConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let labels: Vec<usize> = (0..50).map(|_| rng.random_range(0..20)).collect();
    let data = Dataset {
        train: examples(&mols, &cfg, &labels),
        ..Dataset::default()
    };
    let mut model = init_model(&cfg, &lib).unwrap();
    let history = train(&mut model, &data, &lib).unwrap();
    let eval = evaluate(&model, &data.train).unwrap();
    (history.epochs.len(), eval.top1)
}
