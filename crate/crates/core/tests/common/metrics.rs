//! Template-prioritization metrics recomputed without the harness.

use mhnpath::chem::fingerprint;
use mhnpath::evalharness::{read_cases_tsv, EvalCase, MetricReport, MetricRow, CUTOFFS};
use mhnpath::mhn::{init_model, substructure_screen, train, Dataset, Ensemble, ModelConfig};
use mhnpath::search::EnsembleRanker;
use mhnpath::templates::{apply_template, TemplateLibrary, DEFAULT_MAX_MATCHES};

use super::mhn::examples;

pub fn cases(lib: &TemplateLibrary) -> Vec<EvalCase> {
    read_cases_tsv(&super::fixture("eval_cases_50.tsv"), lib.len()).unwrap()
}

/// Two members, one briefly trained on the cases so that accuracies are
/// neither all zero nor all one.
pub fn ranker(lib: &TemplateLibrary, cases: &[EvalCase]) -> EnsembleRanker {
    let cfg = ModelConfig {
        fp_bits: 256,
        template_fp_bits: 256,
        d_assoc: 16,
        temp_layers: 1,
        lr: 1e-3,
        epochs: 5,
        dropout: 0.0,
        seed: 3,
        ..ModelConfig::default()
    };
    let mols: Vec<_> = cases.iter().map(|c| c.product.clone()).collect();
    let labels: Vec<usize> = cases.iter().map(|c| c.true_template_id).collect();
    let data = Dataset {
        train: examples(&mols, &cfg, &labels),
        ..Dataset::default()
    };
    let mut trained = init_model(&cfg, lib).unwrap();
    train(&mut trained, &data, lib).unwrap();
    let untrained = init_model(&ModelConfig { seed: 8, ..cfg }, lib).unwrap();
    EnsembleRanker {
        ensemble: Ensemble::new(vec![trained, untrained], lib).unwrap(),
        library: lib.clone(),
    }
}

/// Recount every metric from per-template scores, screen bits and template
/// application over all (case, template) pairs.
pub fn brute_force(cases: &[EvalCase], r: &EnsembleRanker, lib: &TemplateLibrary) -> MetricReport {
    let models = r.ensemble.models();
    let screen_bits = models[0].config().fp_bits;
    let mut hits = [0usize; 4];
    let mut applicable = [0usize; 4];
    let mut any = [0usize; 4];
    for c in cases {
        let k = lib.len();
        let mut s = vec![f64::NEG_INFINITY; k];
        for m in models {
            let cfg = m.config();
            let p = m.forward(&fingerprint(&c.product, cfg.fp_radius, cfg.fp_bits)).unwrap();
            for j in 0..k {
                s[j] = s[j].max(p[j]);
            }
        }
        let better = |i: usize, j: usize| s[i] > s[j] || (s[i] == s[j] && i < j);
        let t = c.true_template_id;
        let true_rank = (0..k).filter(|&i| better(i, t)).count();
        let screen_fp = fingerprint(&c.product, 0, screen_bits);
        let passes: Vec<bool> = lib.templates().iter().map(|tm| substructure_screen(&screen_fp, tm)).collect();
        let applies: Vec<bool> = lib
            .templates()
            .iter()
            .map(|tm| !apply_template(tm, &c.product, DEFAULT_MAX_MATCHES).is_empty())
            .collect();
        for (ci, &n) in CUTOFFS.iter().enumerate() {
            hits[ci] += usize::from(true_rank < n);
            let mut count = 0;
            for j in (0..k).filter(|&j| passes[j]) {
                let rank = (0..k).filter(|&i| passes[i] && better(i, j)).count();
                if rank < n && applies[j] {
                    count += 1;
                }
            }
            applicable[ci] += count;
            any[ci] += usize::from(count > 0);
        }
    }
    let total = cases.len() as f64;
    MetricReport {
        rows: CUTOFFS
            .iter()
            .enumerate()
            .map(|(ci, &n)| MetricRow {
                n,
                lit_rule_acc: hits[ci] as f64 / total,
                avg_applicable: applicable[ci] as f64 / total,
                any_applicable: any[ci] as f64 / total,
            })
            .collect(),
        n_cases: cases.len(),
    }
}
