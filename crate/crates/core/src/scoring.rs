//! Composite reaction score from precursor cost, temperature and the
//! toxicity of solvents and reagents. Higher is better.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::canonicalize;
use crate::conditions::ReactionConditions;

pub const COST_NORMALIZER: f64 = 500.0;
pub const TEMP_NORMALIZER: f64 = 300.0;
/// Lower clamp on temperature before normalization, in Celsius.
pub const TEMP_FLOOR_C: f64 = -100.0;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("cost {0} outside [0, 500]")]
    Domain(f64),
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("toxicity table line {line}: {msg}")]
    Table { line: u64, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreWeights {
    pub w_cost: f64,
    pub w_temp: f64,
    pub w_solv: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            w_cost: 1.0,
            w_temp: 1.0,
            w_solv: 1.0,
        }
    }
}

impl ScoreWeights {
    pub fn new(w_cost: f64, w_temp: f64, w_solv: f64) -> Result<Self, ScoringError> {
        let w = ScoreWeights { w_cost, w_temp, w_solv };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        let all = [self.w_cost, self.w_temp, self.w_solv];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ScoringError::Weights("weights must be finite and non-negative".into()));
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err(ScoringError::Weights("at least one weight must be positive".into()));
        }
        Ok(())
    }
}

/// −cost/500 for cost in [0, 500].
pub fn cost_score(cost: f64) -> Result<f64, ScoringError> {
    if (0.0..=COST_NORMALIZER).contains(&cost) {
        Ok(-cost / COST_NORMALIZER)
    } else {
        Err(ScoringError::Domain(cost))
    }
}

/// −t/300 with t clamped to [−100, 300] Celsius.
pub fn temp_score(t: f64) -> f64 {
    -t.clamp(TEMP_FLOOR_C, TEMP_NORMALIZER) / TEMP_NORMALIZER
}

/// Toxicity class per canonical SMILES: −1 toxic, 0 neutral, +1 green.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ToxicityDb {
    classes: HashMap<String, i8>,
}

#[derive(Deserialize)]
struct ToxRow {
    canonical_smiles: String,
    class: i8,
    source: String,
}

const TOX_SOURCES: [&str; 4] = ["acs", "supernatural", "t3db", "user"];

impl ToxicityDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, ScoringError> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    /// Columns: canonical_smiles, class, source. A later row for the same
    /// molecule replaces the earlier one.
    pub fn parse_csv(text: &str) -> Result<Self, ScoringError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| ScoringError::Table { line: 1, msg: e.to_string() })?
            .clone();
        let mut db = ToxicityDb::new();
        for raw in rdr.records() {
            let raw = raw.map_err(|e| ScoringError::Table {
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })?;
            let line = raw.position().map_or(0, |p| p.line());
            let bad = |msg: String| ScoringError::Table { line, msg };
            let row: ToxRow = raw.deserialize(Some(&headers)).map_err(|e| bad(e.to_string()))?;
            if !(-1..=1).contains(&row.class) {
                return Err(bad(format!("class must be -1, 0 or 1, got {}", row.class)));
            }
            if !TOX_SOURCES.contains(&row.source.as_str()) {
                return Err(bad(format!("unknown source {:?}", row.source)));
            }
            let key = canonicalize(&row.canonical_smiles).map_err(|e| bad(e.to_string()))?;
            db.classes.insert(key, row.class);
        }
        Ok(db)
    }

    /// `key` must be canonical. Panics on a class outside {−1, 0, 1}.
    pub fn insert(&mut self, key: &str, class: i8) {
        assert!((-1..=1).contains(&class), "toxicity class {class}");
        self.classes.insert(key.to_string(), class);
    }

    /// Class of a canonical SMILES; unknown molecules are neutral.
    pub fn class_of(&self, key: &str) -> i8 {
        self.classes.get(key).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Mean class over solvents and reagents; 0 when there are none.
pub fn solvent_score(conditions: &ReactionConditions, db: &ToxicityDb) -> f64 {
    let all: Vec<i8> = conditions
        .solvents
        .iter()
        .chain(&conditions.reagents)
        .map(|s| db.class_of(s))
        .collect();
    if all.is_empty() {
        0.0
    } else {
        all.iter().map(|&c| c as f64).sum::<f64>() / all.len() as f64
    }
}

pub fn composite_score(c: f64, t: f64, s: f64, w: &ScoreWeights) -> f64 {
    w.w_cost * c + w.w_temp * t + w.w_solv * s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreComponents {
    pub cost: f64,
    pub temp: f64,
    pub solv: f64,
    pub composite: f64,
}

/// Reaction-level score. `total_cost` is the summed effective cost of the
/// generated precursors and is clamped to the normalizer.
pub fn score_reaction(
    total_cost: f64,
    temperature_c: f64,
    top_conditions: &ReactionConditions,
    db: &ToxicityDb,
    w: &ScoreWeights,
) -> ScoreComponents {
    let cost = cost_score(total_cost.clamp(0.0, COST_NORMALIZER)).expect("clamped into domain");
    let temp = temp_score(temperature_c);
    let solv = solvent_score(top_conditions, db);
    ScoreComponents {
        cost,
        temp,
        solv,
        composite: composite_score(cost, temp, solv, w),
    }
}
