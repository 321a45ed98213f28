//! Random retrosynthesis universes: a small tree-shaped target, bond-cut
//! templates over a four-element alphabet and a random price catalog
//! over molecules reachable from the target. Includes a breadth-first
//! oracle that does not share code with the search engine.

use std::collections::{BTreeSet, HashMap, HashSet};

use mhnpath::chem::{canonicalize, parse_smiles};
use mhnpath::pricing::PriceCatalog;
use mhnpath::templates::{apply_template, parse_template, Template, TemplateLibrary, TemplateSource};
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ELEMENTS: [(&str, usize); 4] = [("C", 4), ("N", 3), ("O", 2), ("S", 2)];
pub const MAX_MOLECULES: usize = 200;
pub const MAX_TEMPLATES: usize = 50;
pub const BUYABLE_THRESHOLD: f64 = 100.0;

#[derive(Debug, Clone)]
pub struct Universe {
    pub seed: u64,
    pub target: String,
    pub templates: Vec<String>,
    /// Canonical SMILES and USD/g.
    pub prices: Vec<(String, f64)>,
    pub max_depth: usize,
    pub n_molecules: usize,
}

impl Universe {
    pub fn library(&self) -> TemplateLibrary {
        TemplateLibrary::new(parsed(&self.templates)).expect("distinct templates")
    }

    pub fn catalog(&self) -> PriceCatalog {
        let mut c = PriceCatalog::new();
        for (k, p) in &self.prices {
            c.insert(k, *p, "universe", "2024-01-01T00:00:00Z").unwrap();
        }
        c
    }

    pub fn price_map(&self) -> HashMap<String, f64> {
        self.prices.iter().cloned().collect()
    }
}

fn parsed(texts: &[String]) -> Vec<Template> {
    texts
        .iter()
        .map(|t| {
            let mut t = parse_template(t).expect("generator emits valid templates");
            t.source = TemplateSource::Synthetic;
            t
        })
        .collect()
}

fn random_tree_smiles(rng: &mut ChaCha8Rng, n: usize) -> String {
    let mut elem = Vec::with_capacity(n);
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut degree = vec![0usize; n];
    for i in 0..n {
        let e = if rng.random::<f64>() < 0.55 { 0 } else { rng.random_range(1..4) };
        elem.push(e);
        if i > 0 {
            let open: Vec<usize> = (0..i).filter(|&j| degree[j] < ELEMENTS[elem[j]].1).collect();
            if open.is_empty() {
                elem.pop();
                break;
            }
            let p = open[rng.random_range(0..open.len())];
            children[p].push(i);
            degree[p] += 1;
            degree[i] += 1;
        }
    }
    fn emit(i: usize, elem: &[usize], children: &[Vec<usize>], out: &mut String) {
        out.push_str(ELEMENTS[elem[i]].0);
        let kids: Vec<usize> = children[i].iter().copied().filter(|&c| c < elem.len()).collect();
        for (k, &c) in kids.iter().enumerate() {
            if k + 1 < kids.len() {
                out.push('(');
                emit(c, elem, children, out);
                out.push(')');
            } else {
                emit(c, elem, children, out);
            }
        }
    }
    let mut s = String::new();
    emit(0, &elem, &children, &mut s);
    s
}

fn all_templates() -> (Vec<String>, Vec<String>) {
    let sym: Vec<&str> = ELEMENTS.iter().map(|e| e.0).collect();
    let mut pairs = Vec::new();
    for (i, a) in sym.iter().enumerate() {
        for b in &sym[i..] {
            pairs.push(format!("[{a}:1]-[{b}:2]>>[{a}:1].[{b}:2]"));
        }
    }
    let mut triples = Vec::new();
    for a in &sym {
        for b in &sym {
            for c in &sym {
                triples.push(format!("[{a}:1]-[{b}:2]-[{c}:3]>>[{a}:1].[{b}:2]-[{c}:3]"));
            }
        }
    }
    (pairs, triples)
}

/// Molecules reachable from `target` within `depth` steps, capped.
fn reachable(target: &str, lib: &[Template], depth: usize, cap: usize) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    seen.insert(target.to_string());
    let mut frontier = vec![target.to_string()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for k in &frontier {
            let m = parse_smiles(k).unwrap();
            for t in lib {
                for set in apply_template(t, &m, mhnpath::templates::DEFAULT_MAX_MATCHES) {
                    for s in set.member_smiles() {
                        if seen.len() < cap && seen.insert(s.clone()) {
                            next.push(s.clone());
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    seen
}

pub fn generate(seed: u64) -> Universe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_atoms = rng.random_range(3..=8);
    let target = canonicalize(&random_tree_smiles(&mut rng, n_atoms)).unwrap();
    let (mut pairs, mut triples) = all_templates();
    pairs.shuffle(&mut rng);
    triples.shuffle(&mut rng);
    let n_pairs = rng.random_range(2..=pairs.len());
    let n_triples = rng.random_range(0..=(MAX_TEMPLATES - n_pairs).min(30));
    let mut templates: Vec<String> = pairs[..n_pairs].to_vec();
    templates.extend_from_slice(&triples[..n_triples]);
    let lib = parsed(&templates);
    let max_depth = rng.random_range(1..=5);
    let mols = reachable(&target, &lib, max_depth, MAX_MOLECULES);
    let mut prices = Vec::new();
    for k in &mols {
        let r: f64 = rng.random();
        let target_factor = if *k == target { 0.1 } else { 1.0 };
        if r < 0.5 * target_factor {
            prices.push((k.clone(), rng.random_range(1.0..99.0)));
        } else if r < 0.75 {
            prices.push((k.clone(), rng.random_range(100.0..800.0)));
        }
    }
    Universe {
        seed,
        target,
        templates: lib.iter().map(|t| t.text().to_string()).collect(),
        prices,
        max_depth,
        n_molecules: mols.len(),
    }
}

/// Fewest reactions that turn the target into an all-buyable set, or
/// None within `max_depth`. Every non-buyable member is tried at every
/// level and states are deduplicated globally.
pub fn bfs_min_depth(
    target: &str,
    templates: &[Template],
    prices: &HashMap<String, f64>,
    threshold: f64,
    max_depth: usize,
    max_matches: usize,
) -> Option<usize> {
    let buyable = |k: &String| prices.get(k).is_some_and(|p| *p < threshold);
    let mut frontier: Vec<Vec<String>> = vec![vec![target.to_string()]];
    let mut seen: HashSet<Vec<String>> = frontier.iter().cloned().collect();
    for d in 0..=max_depth {
        if frontier.iter().any(|s| s.iter().all(buyable)) {
            return Some(d);
        }
        if d == max_depth {
            break;
        }
        let mut next = Vec::new();
        for s in &frontier {
            for (i, k) in s.iter().enumerate() {
                if buyable(k) {
                    continue;
                }
                let m = parse_smiles(k).unwrap();
                for t in templates {
                    for p in apply_template(t, &m, max_matches) {
                        let mut ns = s.clone();
                        ns.remove(i);
                        ns.extend(p.member_smiles().iter().cloned());
                        ns.sort();
                        if seen.insert(ns.clone()) {
                            next.push(ns);
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    None
}

/// Run the engine over a template list and price list with an
/// exhaustive ranker, an empty conditions table and an empty toxicity DB.
pub fn search(
    target: &str,
    templates: &[String],
    prices: &[(String, f64)],
    cfg: &mhnpath::search::SearchConfig,
) -> mhnpath::search::SearchOutcome {
    use mhnpath::conditions::TablePredictor;
    use mhnpath::scoring::ToxicityDb;
    use mhnpath::search::{run_search, ExhaustiveRanker, Services};
    let library = TemplateLibrary::new(parsed(templates)).expect("distinct templates");
    let mut catalog = PriceCatalog::new();
    for (k, p) in prices {
        catalog
            .insert(&canonicalize(k).unwrap(), *p, "test", "2024-01-01T00:00:00Z")
            .unwrap();
    }
    let ranker = ExhaustiveRanker { library };
    let table = TablePredictor::empty();
    let tox = ToxicityDb::new();
    let services = Services {
        catalog: &catalog,
        conditions: &table,
        toxicity: &tox,
        enzymatic: None,
        synthetic: Some(&ranker),
        cancel: None,
    };
    run_search(&parse_smiles(target).unwrap(), cfg, &services).unwrap()
}
