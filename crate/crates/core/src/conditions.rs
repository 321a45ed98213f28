//! Reaction-condition prediction: temperature, solvents and reagents per
//! reaction. A table-backed predictor ships in-crate; other predictors
//! attach through a newline-delimited JSON protocol on a child process.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{canonicalize, parse_smiles_set};

pub const DEFAULT_TEMPERATURE_C: f64 = 25.0;
pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Error)]
pub enum ConditionsError {
    #[error("no condition candidates")]
    EmptyCandidates,
    #[error("invalid reaction SMILES {0:?}")]
    Reaction(String),
    #[error("conditions table line {line}: {msg}")]
    Table { line: u64, msg: String },
    #[error("external predictor: {0}")]
    External(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Table,
    Default,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionConditions {
    pub temperature_c: f64,
    /// Canonical SMILES.
    pub solvents: Vec<String>,
    /// Canonical SMILES.
    pub reagents: Vec<String>,
    pub provenance: Provenance,
}

impl ReactionConditions {
    pub fn default_row() -> Self {
        ReactionConditions {
            temperature_c: DEFAULT_TEMPERATURE_C,
            solvents: Vec::new(),
            reagents: Vec::new(),
            provenance: Provenance::Default,
        }
    }
}

/// A ranked candidate: conditions with a positive weight.
pub type Candidate = (ReactionConditions, f64);

/// Ranked condition candidates for a reaction `precursors>>product`.
/// Implementations are deterministic for a fixed input.
pub trait ConditionPredictor: Send + Sync {
    fn predict(&self, reaction_smiles: &str) -> Result<Vec<Candidate>, ConditionsError>;
}

/// Weighted mean temperature of the first `min(k, len)` candidates.
pub fn aggregate_temperature(candidates: &[Candidate], k: usize) -> Result<f64, ConditionsError> {
    let used = &candidates[..k.min(candidates.len())];
    if used.is_empty() {
        return Err(ConditionsError::EmptyCandidates);
    }
    let (num, den) = used
        .iter()
        .fold((0.0, 0.0), |(n, d), (c, w)| (n + w * c.temperature_c, d + w));
    let t = num / den;
    // Clamp guards rounding drift outside the candidate range.
    let lo = used.iter().map(|(c, _)| c.temperature_c).fold(f64::INFINITY, f64::min);
    let hi = used.iter().map(|(c, _)| c.temperature_c).fold(f64::NEG_INFINITY, f64::max);
    Ok(t.clamp(lo, hi))
}

/// Canonical reaction key: canonical precursor set, ">>", canonical product.
pub fn reaction_key(reaction_smiles: &str) -> Result<String, ConditionsError> {
    let bad = || ConditionsError::Reaction(reaction_smiles.to_string());
    let (lhs, rhs) = reaction_smiles.split_once(">>").ok_or_else(bad)?;
    let pre = parse_smiles_set(lhs).map_err(|_| bad())?;
    let prod = parse_smiles_set(rhs).map_err(|_| bad())?;
    Ok(format!("{}>>{}", pre.canonical_key(), prod.canonical_key()))
}

/// Lookup table keyed by canonical reaction key. Misses yield the default
/// row with provenance `Default`.
#[derive(Debug, Clone)]
pub struct TablePredictor {
    rows: HashMap<String, Vec<Candidate>>,
    default: ReactionConditions,
}

#[derive(Debug, Deserialize)]
struct TableRow {
    reaction_key: String,
    rank: u32,
    weight: f64,
    temperature_c: f64,
    solvents: String,
    reagents: String,
}

fn split_species(field: &str) -> Result<Vec<String>, String> {
    field
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| canonicalize(s).map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

impl TablePredictor {
    pub fn empty() -> Self {
        TablePredictor {
            rows: HashMap::new(),
            default: ReactionConditions::default_row(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConditionsError> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    /// Columns: reaction_key, rank, weight, temperature_c, solvents,
    /// reagents. Species lists are ';'-joined. Keys are re-canonicalized.
    pub fn parse_csv(text: &str) -> Result<Self, ConditionsError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut ranked: HashMap<String, Vec<(u32, Candidate)>> = HashMap::new();
        let headers = rdr
            .headers()
            .map_err(|e| ConditionsError::Table { line: 1, msg: e.to_string() })?
            .clone();
        for raw in rdr.records() {
            let raw = raw.map_err(|e| ConditionsError::Table {
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })?;
            let line = raw.position().map_or(0, |p| p.line());
            let rec: TableRow = raw
                .deserialize(Some(&headers))
                .map_err(|e| ConditionsError::Table { line, msg: e.to_string() })?;
            let bad = |msg: String| ConditionsError::Table { line, msg };
            if !(rec.weight > 0.0 && rec.weight.is_finite()) {
                return Err(bad(format!("weight must be positive, got {}", rec.weight)));
            }
            if !rec.temperature_c.is_finite() {
                return Err(bad("temperature must be finite".into()));
            }
            let key = reaction_key(&rec.reaction_key).map_err(|e| bad(e.to_string()))?;
            let cond = ReactionConditions {
                temperature_c: rec.temperature_c,
                solvents: split_species(&rec.solvents).map_err(bad)?,
                reagents: split_species(&rec.reagents).map_err(bad)?,
                provenance: Provenance::Table,
            };
            ranked.entry(key).or_default().push((rec.rank, (cond, rec.weight)));
        }
        let rows = ranked
            .into_iter()
            .map(|(k, mut v)| {
                v.sort_by_key(|(rank, _)| *rank);
                (k, v.into_iter().map(|(_, c)| c).collect())
            })
            .collect();
        Ok(TablePredictor {
            rows,
            default: ReactionConditions::default_row(),
        })
    }

    pub fn with_default(mut self, default: ReactionConditions) -> Self {
        self.default = ReactionConditions {
            provenance: Provenance::Default,
            ..default
        };
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl ConditionPredictor for TablePredictor {
    fn predict(&self, reaction_smiles: &str) -> Result<Vec<Candidate>, ConditionsError> {
        let hit = reaction_key(reaction_smiles)
            .ok()
            .and_then(|k| self.rows.get(&k));
        Ok(match hit {
            Some(c) => c.clone(),
            None => vec![(self.default.clone(), 1.0)],
        })
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    reaction: &'a str,
}

#[derive(Deserialize)]
struct WireCandidate {
    temperature_c: f64,
    weight: f64,
    #[serde(default)]
    solvents: Vec<String>,
    #[serde(default)]
    reagents: Vec<String>,
}

#[derive(Deserialize)]
struct WireResponse {
    candidates: Vec<WireCandidate>,
}

/// Child process speaking one JSON request line and one JSON response
/// line per reaction on stdin/stdout. Requests are serialized.
pub struct ExternalPredictor {
    child: Mutex<Child>,
    io: Mutex<(ChildStdin, BufReader<ChildStdout>)>,
}

impl ExternalPredictor {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, ConditionsError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = BufReader::new(child.stdout.take().expect("piped"));
        Ok(ExternalPredictor {
            child: Mutex::new(child),
            io: Mutex::new((stdin, stdout)),
        })
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        if let Ok(mut c) = self.child.lock() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

impl ConditionPredictor for ExternalPredictor {
    fn predict(&self, reaction_smiles: &str) -> Result<Vec<Candidate>, ConditionsError> {
        let ext = |m: String| ConditionsError::External(m);
        let mut guard = self.io.lock().map_err(|_| ext("poisoned lock".into()))?;
        let (stdin, stdout) = &mut *guard;
        let req = serde_json::to_string(&WireRequest { reaction: reaction_smiles }).expect("serializable");
        writeln!(stdin, "{req}")?;
        stdin.flush()?;
        let mut line = String::new();
        if stdout.read_line(&mut line)? == 0 {
            return Err(ext("predictor closed its output".into()));
        }
        let resp: WireResponse = serde_json::from_str(&line).map_err(|e| ext(e.to_string()))?;
        let mut out = Vec::with_capacity(resp.candidates.len());
        for c in resp.candidates {
            if !(c.weight > 0.0 && c.weight.is_finite() && c.temperature_c.is_finite()) {
                return Err(ext("candidate weight must be positive and temperature finite".into()));
            }
            let canon = |v: Vec<String>| -> Result<Vec<String>, ConditionsError> {
                v.iter()
                    .map(|s| canonicalize(s).map_err(|e| ext(format!("{s:?}: {e}"))))
                    .collect()
            };
            out.push((
                ReactionConditions {
                    temperature_c: c.temperature_c,
                    solvents: canon(c.solvents)?,
                    reagents: canon(c.reagents)?,
                    provenance: Provenance::External,
                },
                c.weight,
            ));
        }
        if out.is_empty() {
            return Err(ConditionsError::EmptyCandidates);
        }
        Ok(out)
    }
}
