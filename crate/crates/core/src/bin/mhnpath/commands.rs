use std::path::{Path, PathBuf};
use std::time::Duration;

use mhnpath::chem::{
    canonicalize, parse_smiles, read_molecule_list, scaffold_split, write_canonical_smiles, write_molecule_list, Molecule,
};
use mhnpath::conditions::{ConditionPredictor, ExternalPredictor, TablePredictor};
use mhnpath::evalharness::{evaluate_metrics, read_cases_tsv, CUTOFFS};
use mhnpath::mhn::{
    evaluate, init_model, load_model, parse_training_tsv, save_model, split_indices, train as train_model, Dataset,
    Ensemble,
};
use mhnpath::pricing::{fetch_all, merge_quotes, PriceCatalog, VendorClient, VendorError, VENDOR_KEY_ENV};
use mhnpath::scoring::ToxicityDb;
use mhnpath::search::{
    extract_routes, run_search, serialize_tree, to_dot, EnsembleRanker, ExhaustiveRanker, Route, Services,
    TemperatureUnit, TemplateRanker,
};
use mhnpath::templates::{apply_template, extract_library, read_reaction_tsv, TemplateLibrary};

use crate::config::{ensure_dir, list, required, write, write_manifest, RunConfig};
use crate::{
    CliError, EvalArgs, ExtractArgs, PriceSyncArgs, RankArgs, RankerArgs, SearchArgs, SplitArgs, TrainArgs, CANCEL,
};

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn molecule(smiles: &str) -> Result<Molecule, CliError> {
    parse_smiles(smiles).map_err(|e| CliError::Usage(format!("SMILES {smiles:?}: {e}")))
}

fn library(path: &Path) -> Result<TemplateLibrary, CliError> {
    TemplateLibrary::load(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// A model ensemble over the library, or every template in library order
/// when no model is given.
fn ranker(lib: TemplateLibrary, models: &[PathBuf]) -> Result<Box<dyn TemplateRanker>, CliError> {
    if models.is_empty() {
        log::info!("no model given; trying every template in library order");
        return Ok(Box::new(ExhaustiveRanker { library: lib }));
    }
    let loaded = models
        .iter()
        .map(|p| load_model(p, &lib).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let ensemble = Ensemble::new(loaded, &lib).map_err(CliError::usage)?;
    Ok(Box::new(EnsembleRanker { ensemble, library: lib }))
}

fn synthetic_ranker(cfg: &RunConfig, a: RankerArgs) -> Result<Box<dyn TemplateRanker>, CliError> {
    let lib = library(&required(a.library, &cfg.library, "library")?)?;
    ranker(lib, &list(a.models, &cfg.models))
}

pub fn train(cfg: &RunConfig, a: TrainArgs) -> Result<(), CliError> {
    let mut mc = cfg.model.clone();
    mc.seed = cfg.seed(a.seed);
    if let Some(v) = a.epochs {
        mc.epochs = v;
    }
    if let Some(v) = a.lr {
        mc.lr = v;
    }
    if let Some(v) = a.batch_size {
        mc.batch_size = v;
    }
    if let Some(v) = a.d_assoc {
        mc.d_assoc = v;
    }
    if let Some(v) = a.fp_bits {
        mc.fp_bits = v;
        mc.template_fp_bits = v;
    }
    if let Some(v) = a.beta {
        mc.beta = v;
    }
    if let Some(v) = a.dropout {
        mc.dropout = v;
    }
    mc.validate().map_err(CliError::usage)?;
    let lib = library(&required(a.library, &cfg.library, "library")?)?;
    let text = read(&a.data)?;
    let examples =
        parse_training_tsv(&text, &mc, lib.len()).map_err(|e| CliError::Usage(format!("{}: {e}", a.data.display())))?;
    let data = Dataset::split(examples, mc.seed);
    let out = cfg.out_dir(a.out_dir);
    ensure_dir(&out)?;
    let mut model = init_model(&mc, &lib).map_err(CliError::usage)?;
    let history = train_model(&mut model, &data, &lib).map_err(CliError::runtime)?;
    save_model(&model, &out.join("model.mhnp")).map_err(CliError::runtime)?;
    write(&out.join("history.csv"), &history.to_csv())?;
    write_manifest(&out, "train", mc.seed, &mc)?;
    let val = evaluate(&model, &data.val).map_err(CliError::runtime)?;
    let test = evaluate(&model, &data.test).map_err(CliError::runtime)?;
    println!(
        "train {} val {} test {} examples",
        data.train.len(),
        data.val.len(),
        data.test.len()
    );
    println!("val_top1 {:.4} val_top100 {:.4}", val.top1, val.top100);
    println!("test_top1 {:.4} test_top100 {:.4}", test.top1, test.top100);
    println!("model written to {}", out.join("model.mhnp").display());
    Ok(())
}

pub fn rank(cfg: &RunConfig, a: RankArgs) -> Result<(), CliError> {
    let m = molecule(&a.smiles)?.strip_maps();
    let r = synthetic_ranker(cfg, a.ranker)?;
    let max_matches = cfg.search.max_matches;
    println!("rank\ttemplate_id\tscore\tapplicable\trule");
    for (i, (id, score)) in r.rank(&m, a.top_n, a.screen).into_iter().enumerate() {
        let t = &r.library().templates()[id];
        let applicable = !apply_template(t, &m, max_matches).is_empty();
        println!("{}\t{id}\t{score:.6e}\t{applicable}\t{}", i + 1, t.text());
    }
    Ok(())
}

fn route_summary(routes: &[Route]) -> String {
    let mut s = String::from("rank\tsteps\tscore\ttotal_cost\tmax_temperature_c\tmin_solvent_score\tprecursors\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    for (i, r) in routes.iter().enumerate() {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            i + 1,
            r.len(),
            r.score,
            r.total_cost,
            opt(r.max_temperature_c),
            opt(r.min_solvent_score),
            r.precursor_keys().join(" | ")
        ));
    }
    s
}

pub fn search(cfg: &RunConfig, a: SearchArgs) -> Result<(), CliError> {
    let target = molecule(&a.smiles)?;
    let mut sc = cfg.search.clone();
    let w = &mut sc.weights;
    if let Some(v) = a.w_cost {
        w.w_cost = v;
    }
    if let Some(v) = a.w_temp {
        w.w_temp = v;
    }
    if let Some(v) = a.w_solv {
        w.w_solv = v;
    }
    if let Some(v) = a.time_limit {
        sc.time_limit_s = Some(v);
    }
    if let Some(v) = a.max_depth {
        sc.max_depth = v;
    }
    if let Some(v) = a.max_expansions {
        sc.max_expansions = Some(v);
    }
    if let Some(v) = a.top_n {
        sc.top_n_templates = v;
    }
    if let Some(v) = a.route_limit {
        sc.route_limit = Some(v);
    }
    if a.no_screen {
        sc.screen = false;
    }
    sc.validate().map_err(CliError::usage)?;
    let seed = cfg.seed(a.seed);

    let syn_lib = a.ranker.library.clone().or_else(|| cfg.library.clone());
    let enz_lib = a.enz_library.clone().or_else(|| cfg.enz_library.clone());
    if syn_lib.is_none() && enz_lib.is_none() {
        return Err(CliError::Usage("--library or --enz-library is required".into()));
    }
    let synthetic = match syn_lib {
        Some(p) => Some(ranker(library(&p)?, &list(a.ranker.models, &cfg.models))?),
        None => None,
    };
    let enzymatic = match enz_lib {
        Some(p) => Some(ranker(library(&p)?, &list(a.enz_models, &cfg.enz_models))?),
        None => None,
    };
    let catalog = match a.catalog.or_else(|| cfg.catalog.clone()) {
        Some(p) => PriceCatalog::load(&p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => {
            log::warn!("no price catalog; nothing is buyable");
            PriceCatalog::new()
        }
    };
    let toxicity = match a.toxicity.or_else(|| cfg.toxicity.clone()) {
        Some(p) => ToxicityDb::load(&p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => ToxicityDb::new(),
    };
    let conditions: Box<dyn ConditionPredictor> = if let Some(cmd) = a.conditions_cmd {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts.next().ok_or_else(|| CliError::Usage("--conditions-cmd is empty".into()))?;
        let args: Vec<String> = parts.collect();
        Box::new(ExternalPredictor::spawn(&program, &args).map_err(CliError::usage)?)
    } else {
        match a.conditions.or_else(|| cfg.conditions.clone()) {
            Some(p) => Box::new(TablePredictor::load(&p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?),
            None => Box::new(TablePredictor::empty()),
        }
    };

    let services = Services {
        catalog: &catalog,
        conditions: conditions.as_ref(),
        toxicity: &toxicity,
        enzymatic: enzymatic.as_deref(),
        synthetic: synthetic.as_deref(),
        cancel: Some(&CANCEL),
    };
    let outcome = run_search(&target, &sc, &services).map_err(CliError::runtime)?;
    let unit = if a.kelvin {
        TemperatureUnit::Kelvin
    } else {
        TemperatureUnit::Celsius
    };
    let routes = extract_routes(&outcome.root, &sc.weights);
    let out = cfg.out_dir(a.out_dir);
    ensure_dir(&out)?;
    write(&out.join("tree.json"), &serialize_tree(&outcome.root, unit))?;
    write(&out.join("tree.dot"), &to_dot(&outcome.root))?;
    write(&out.join("routes.tsv"), &route_summary(&routes))?;
    write(&out.join("search_log.csv"), &outcome.log_csv())?;
    write_manifest(&out, "search", seed, &sc)?;

    println!(
        "target {} stopped: {:?} after {} expansions; {} nodes, {} routes",
        outcome.root.molecule_set.canonical_key(),
        outcome.termination,
        outcome.expansions,
        outcome.root.node_count(),
        routes.len()
    );
    for (i, r) in routes.iter().take(5).enumerate() {
        println!("route {} steps {} score {:.4}: {}", i + 1, r.len(), r.score, r.precursor_keys().join(" | "));
    }
    println!("outputs written to {}", out.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig, a: EvalArgs) -> Result<(), CliError> {
    let r = synthetic_ranker(cfg, a.ranker)?;
    let cases = read_cases_tsv(&a.cases, r.library().len())
        .map_err(|e| CliError::Usage(format!("{}: {e}", a.cases.display())))?;
    let report = evaluate_metrics(&cases, r.as_ref(), &CUTOFFS, cfg.search.max_matches).map_err(CliError::runtime)?;
    let out = cfg.out_dir(a.out_dir);
    ensure_dir(&out)?;
    write(&out.join("metrics.csv"), &report.to_csv())?;
    let table = report.to_table();
    write(&out.join("metrics.txt"), &table)?;
    write_manifest(&out, "eval", cfg.seed(a.seed), &cfg.search)?;
    print!("{table}");
    Ok(())
}

pub fn extract(a: ExtractArgs) -> Result<(), CliError> {
    let recs = read_reaction_tsv(&a.reactions).map_err(|e| CliError::Usage(format!("{}: {e}", a.reactions.display())))?;
    let (lib, rejects) = extract_library(&recs, a.radius);
    lib.save(&a.out)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", a.out.display())))?;
    for (line, e) in &rejects {
        log::warn!("line {line}: {e}");
    }
    if let Some(p) = a.rejects {
        let mut text = String::from("line\treason\n");
        for (line, e) in &rejects {
            text.push_str(&format!("{line}\t{e}\n"));
        }
        write(&p, &text)?;
    }
    println!(
        "{} reactions, {} templates, {} rejected",
        recs.len(),
        lib.len(),
        rejects.len()
    );
    Ok(())
}

pub fn split(cfg: &RunConfig, a: SplitArgs) -> Result<(), CliError> {
    let seed = cfg.seed(a.seed);
    let out = cfg.out_dir(a.out_dir);
    match (a.data, a.molecules) {
        (Some(data), _) => split_training(&data, seed, &out),
        (None, Some(mols)) => split_scaffold(&mols, a.parts, seed, &out),
        (None, None) => Err(CliError::Usage("one of --data or --molecules is required".into())),
    }
}

fn split_training(data: &Path, seed: u64, out: &Path) -> Result<(), CliError> {
    let text = read(data)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "product_smiles\ttemplate_id" {
        return Err(CliError::Usage(format!(
            "{}: header must be product_smiles<TAB>template_id",
            data.display()
        )));
    }
    let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    ensure_dir(out)?;
    let parts = split_indices(rows.len(), seed);
    for (name, ids) in ["train.tsv", "val.tsv", "test.tsv"].iter().zip(&parts) {
        let mut body = format!("{header}\n");
        for &i in ids {
            body.push_str(rows[i]);
            body.push('\n');
        }
        write(&out.join(name), &body)?;
    }
    write_manifest(out, "split", seed, &serde_json::json!({ "data": data }))?;
    println!(
        "train {} val {} test {}",
        parts[0].len(),
        parts[1].len(),
        parts[2].len()
    );
    Ok(())
}

fn split_scaffold(path: &Path, k: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let mols = read_molecule_list(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let parts = scaffold_split(&mols, k, seed).map_err(CliError::usage)?;
    ensure_dir(out)?;
    let smiles: Vec<String> = mols.iter().map(write_canonical_smiles).collect();
    let mut sizes = Vec::with_capacity(k);
    for (i, ids) in parts.iter().enumerate() {
        let file = out.join(format!("part_{i}.smi"));
        let header = format!("scaffold partition {i} of {k}, seed {seed}");
        write_molecule_list(&file, ids.iter().map(|&j| smiles[j].as_str()), Some(&header))
            .map_err(|e| CliError::Runtime(format!("{}: {e}", file.display())))?;
        sizes.push(ids.len().to_string());
    }
    write_manifest(out, "split", seed, &serde_json::json!({ "molecules": path, "parts": k }))?;
    println!("partitions {}", sizes.join(" "));
    Ok(())
}

pub fn price_sync(cfg: &RunConfig, a: PriceSyncArgs) -> Result<(), CliError> {
    let path = required(a.catalog, &cfg.catalog, "catalog")?;
    let mut catalog = PriceCatalog::load(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if !(a.timeout > 0.0 && a.timeout.is_finite()) {
        return Err(CliError::Usage("--timeout must be positive".into()));
    }
    let client = VendorClient::from_env(&a.endpoint, Duration::from_secs_f64(a.timeout))
        .ok_or_else(|| CliError::Usage(format!("{VENDOR_KEY_ENV} is not set")))?;
    let keys: Vec<String> = match &a.keys {
        Some(p) => read(p)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| canonicalize(l).map_err(|e| CliError::Usage(format!("{}: {l:?}: {e}", p.display()))))
            .collect::<Result<_, _>>()?,
        None => catalog.keys().map(str::to_string).collect(),
    };
    let quotes = fetch_all(&client, &keys, a.parallelism).map_err(|e| match e {
        VendorError::Auth => CliError::Usage(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    })?;
    println!("canonical_smiles\tsource\tusd_per_g");
    for (k, qs) in &quotes {
        for q in qs {
            println!("{k}\t{}\t{}", q.source, q.usd_per_g);
        }
    }
    if a.merge {
        let at = a
            .retrieved_at
            .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
        let n = merge_quotes(&mut catalog, &quotes, &at);
        let out = a.out.unwrap_or(path);
        catalog
            .save(&out)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
        log::info!("merged {n} quotes into {}", out.display());
    }
    Ok(())
}
