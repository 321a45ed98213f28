//! Template-prioritization metrics at several cutoffs, plus route
//! replication and route-length comparison against reference pathways.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::chem::{canonicalize, parse_smiles, Molecule};
use crate::search::{Route, TemplateRanker};
use crate::templates::apply_template;

pub const CUTOFFS: [usize; 4] = [1, 10, 50, 100];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no evaluation cases")]
    EmptyCases,
    #[error("no predicted routes")]
    NoRoutes,
    #[error("case {case}: template id {id} out of range for {k} templates")]
    IdOutOfRange { case: usize, id: usize, k: usize },
    #[error("cases file line {line}: {msg}")]
    Cases { line: u64, msg: String },
    #[error("invalid reference route: {0}")]
    Reference(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct EvalCase {
    pub product: Molecule,
    pub true_template_id: usize,
}

/// TSV with header `product_smiles  template_id`.
pub fn parse_cases_tsv(text: &str, k: usize) -> Result<Vec<EvalCase>, EvalError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == "product_smiles\ttemplate_id" => {}
        _ => {
            return Err(EvalError::Cases {
                line: 1,
                msg: "header must be product_smiles\\ttemplate_id".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| EvalError::Cases { line: line_no, msg };
        let (smi, id) = line.split_once('\t').ok_or_else(|| bad("expected 2 columns".into()))?;
        let product = parse_smiles(smi).map_err(|e| bad(e.to_string()))?;
        let id: usize = id.trim().parse().map_err(|_| bad(format!("bad template id {id:?}")))?;
        if id >= k {
            return Err(bad(format!("template id {id} out of range for {k} templates")));
        }
        out.push(EvalCase {
            product,
            true_template_id: id,
        });
    }
    Ok(out)
}

pub fn read_cases_tsv(path: &Path, k: usize) -> Result<Vec<EvalCase>, EvalError> {
    parse_cases_tsv(&std::fs::read_to_string(path)?, k)
}

fn check(cases: &[EvalCase], ranker: &dyn TemplateRanker) -> Result<(), EvalError> {
    if cases.is_empty() {
        return Err(EvalError::EmptyCases);
    }
    let k = ranker.library().len();
    for (i, c) in cases.iter().enumerate() {
        if c.true_template_id >= k {
            return Err(EvalError::IdOutOfRange {
                case: i,
                id: c.true_template_id,
                k,
            });
        }
    }
    Ok(())
}

/// Per-case counts: truth rank hit, applicable templates among the top n.
struct CaseCounts {
    hits: Vec<bool>,
    applicable: Vec<usize>,
}

fn case_counts(c: &EvalCase, ranker: &dyn TemplateRanker, cutoffs: &[usize], max_matches: usize) -> CaseCounts {
    let n_max = cutoffs.iter().copied().max().unwrap_or(0);
    let unscreened = ranker.rank(&c.product, n_max, false);
    let hits = cutoffs
        .iter()
        .map(|&n| unscreened.iter().take(n).any(|&(id, _)| id == c.true_template_id))
        .collect();
    let screened = ranker.rank(&c.product, n_max, true);
    let ok: Vec<bool> = screened
        .iter()
        .map(|&(id, _)| {
            ranker
                .library()
                .get(id)
                .is_some_and(|t| !apply_template(t, &c.product, max_matches).is_empty())
        })
        .collect();
    let applicable = cutoffs
        .iter()
        .map(|&n| ok.iter().take(n).filter(|&&x| x).count())
        .collect();
    CaseCounts { hits, applicable }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub n: usize,
    pub lit_rule_acc: f64,
    pub avg_applicable: f64,
    pub any_applicable: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub n_cases: usize,
}

/// All three metrics at each cutoff. Literature-rule accuracy uses the
/// unscreened ranking; the applicability metrics use the screened one.
pub fn evaluate_metrics(
    cases: &[EvalCase],
    ranker: &dyn TemplateRanker,
    cutoffs: &[usize],
    max_matches: usize,
) -> Result<MetricReport, EvalError> {
    check(cases, ranker)?;
    let counts: Vec<CaseCounts> = cases
        .par_iter()
        .map(|c| case_counts(c, ranker, cutoffs, max_matches))
        .collect();
    let total = cases.len() as f64;
    let rows = cutoffs
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let hits = counts.iter().filter(|c| c.hits[j]).count();
            let app: usize = counts.iter().map(|c| c.applicable[j]).sum();
            let any = counts.iter().filter(|c| c.applicable[j] > 0).count();
            MetricRow {
                n,
                lit_rule_acc: hits as f64 / total,
                avg_applicable: app as f64 / total,
                any_applicable: any as f64 / total,
            }
        })
        .collect();
    Ok(MetricReport {
        rows,
        n_cases: cases.len(),
    })
}

pub fn literature_rule_accuracy(
    cases: &[EvalCase],
    ranker: &dyn TemplateRanker,
    n: usize,
    max_matches: usize,
) -> Result<f64, EvalError> {
    Ok(evaluate_metrics(cases, ranker, &[n], max_matches)?.rows[0].lit_rule_acc)
}

pub fn avg_applicable_rules(
    cases: &[EvalCase],
    ranker: &dyn TemplateRanker,
    n: usize,
    max_matches: usize,
) -> Result<f64, EvalError> {
    Ok(evaluate_metrics(cases, ranker, &[n], max_matches)?.rows[0].avg_applicable)
}

pub fn any_applicable_accuracy(
    cases: &[EvalCase],
    ranker: &dyn TemplateRanker,
    n: usize,
    max_matches: usize,
) -> Result<f64, EvalError> {
    Ok(evaluate_metrics(cases, ranker, &[n], max_matches)?.rows[0].any_applicable)
}

const FOOTER: &str = "Literature rule accuracy uses unscreened rankings; applicability columns use screened rankings.";

impl MetricReport {
    /// CSV: n, lit_rule_acc, avg_applicable, any_applicable, n_cases.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,lit_rule_acc,avg_applicable,any_applicable,n_cases\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.n, r.lit_rule_acc, r.avg_applicable, r.any_applicable, self.n_cases
            );
        }
        s
    }

    /// Three metric groups side by side, one column per cutoff.
    pub fn to_table(&self) -> String {
        let heads: Vec<String> = self.rows.iter().map(|r| format!("T{}", r.n)).collect();
        let group = |f: &dyn Fn(&MetricRow) -> String| -> Vec<String> { self.rows.iter().map(f).collect() };
        let groups = [
            ("Literature rule accuracy", group(&|r| format!("{:.4}", r.lit_rule_acc))),
            ("Avg applicable rules", group(&|r| format!("{:.2}", r.avg_applicable))),
            ("Any applicable accuracy", group(&|r| format!("{:.4}", r.any_applicable))),
        ];
        let mut s = String::new();
        let _ = writeln!(s, "{:<26} {}", "", heads.iter().map(|h| format!("{h:>9}")).collect::<String>());
        for (name, vals) in &groups {
            let _ = writeln!(s, "{name:<26} {}", vals.iter().map(|v| format!("{v:>9}")).collect::<String>());
        }
        let _ = writeln!(s, "cases: {}", self.n_cases);
        let _ = writeln!(s, "{FOOTER}");
        s
    }
}

/// A known pathway as the canonical precursor set of each step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceRoute {
    pub steps: Vec<String>,
}

impl ReferenceRoute {
    /// One reaction SMILES `precursors>>product` per step.
    pub fn from_reactions<S: AsRef<str>>(reactions: &[S]) -> Result<Self, EvalError> {
        let steps = reactions
            .iter()
            .map(|r| {
                let r = r.as_ref();
                let (lhs, _) = r
                    .split_once(">>")
                    .ok_or_else(|| EvalError::Reference(format!("{r:?} lacks '>>'")))?;
                canonicalize(lhs).map_err(|e| EvalError::Reference(format!("{r:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(ReferenceRoute { steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// True when some predicted route has the reference's length and the same
/// precursor set at every step, in order.
pub fn route_replicated(predicted: &[Route], reference: &ReferenceRoute) -> bool {
    predicted.iter().any(|r| r.precursor_keys() == reference.steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthClass {
    Shorter,
    Equal,
    Longer,
}

/// Best predicted length minus reference length.
pub fn length_comparison(predicted: &[Route], reference: &ReferenceRoute) -> Result<(LengthClass, i64), EvalError> {
    let best = predicted.iter().map(Route::len).min().ok_or(EvalError::NoRoutes)?;
    let delta = best as i64 - reference.len() as i64;
    let class = match delta.cmp(&0) {
        std::cmp::Ordering::Less => LengthClass::Shorter,
        std::cmp::Ordering::Equal => LengthClass::Equal,
        std::cmp::Ordering::Greater => LengthClass::Longer,
    };
    Ok((class, delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{Enzyme, SearchEdge};

    fn route(steps: &[&str]) -> Route {
        Route {
            edges: steps
                .iter()
                .enumerate()
                .map(|(i, s)| SearchEdge {
                    reaction_smiles: format!("{s}>>X"),
                    temperature_c: 25.0,
                    enzyme: Enzyme::Synthetic,
                    score: 0.0,
                    rule: String::new(),
                    label: i,
                    template_id: None,
                    components: None,
                })
                .collect(),
            node_keys: steps.iter().map(|s| s.to_string()).collect(),
            total_cost: 0.0,
            max_temperature_c: None,
            min_solvent_score: None,
            score: 0.0,
        }
    }

    #[test]
    fn replication() {
        let reference = ReferenceRoute::from_reactions(&["OCC.C>>x", "CO.C>>y"]).unwrap();
        assert_eq!(reference.steps, vec!["C.CCO".to_string(), "C.CO".to_string()]);
        assert!(route_replicated(&[route(&["C.CCO", "C.CO"])], &reference));
        assert!(!route_replicated(&[route(&["C.CCO", "C.CN"])], &reference));
        assert!(!route_replicated(&[route(&["C.CO", "C.CCO"])], &reference));
        assert!(!route_replicated(&[], &reference));
    }

    #[test]
    fn lengths() {
        let five = ReferenceRoute { steps: vec![String::new(); 5] };
        let three = ReferenceRoute { steps: vec![String::new(); 3] };
        let r3 = route(&["a", "b", "c"]);
        let r4 = route(&["a", "b", "c", "d"]);
        assert_eq!(length_comparison(&[r4.clone(), r3.clone()], &five).unwrap(), (LengthClass::Shorter, -2));
        assert_eq!(length_comparison(std::slice::from_ref(&r3), &three).unwrap(), (LengthClass::Equal, 0));
        assert_eq!(length_comparison(&[r4], &three).unwrap(), (LengthClass::Longer, 1));
        assert!(matches!(length_comparison(&[], &three), Err(EvalError::NoRoutes)));
    }
}
