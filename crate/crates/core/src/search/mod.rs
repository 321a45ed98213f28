//! Global greedy best-first retrosynthetic search. Nodes hold molecule
//! sets; a node is solved when every member is buyable. One tree-wide
//! queue is popped by descending priority, ties by insertion order.

mod engine;
mod routes;
mod tree;

use std::sync::atomic::AtomicBool;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{fingerprint, Molecule, MoleculeSet};
use crate::conditions::ConditionPredictor;
use crate::mhn::{rank_templates, Ensemble};
use crate::pricing::{BuyabilityPolicy, PriceCatalog, PricingError};
use crate::scoring::{ScoreComponents, ScoreWeights, ScoringError, ToxicityDb};
use crate::templates::{TemplateLibrary, DEFAULT_MAX_MATCHES};

pub use engine::{run_search, ExpansionRecord, SearchOutcome, Termination};
pub use routes::{extract_routes, replay_route, ReplayError, Route};
pub use tree::{deserialize_tree, serialize_tree, to_dot, FormatError, TemperatureUnit};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Weights(#[from] ScoringError),
    #[error(transparent)]
    Policy(#[from] PricingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub max_depth: usize,
    pub time_limit_s: Option<f64>,
    pub max_expansions: Option<usize>,
    /// Templates requested from each prioritizer per expansion.
    pub top_n_templates: usize,
    /// Stop once this many solved nodes exist.
    pub route_limit: Option<usize>,
    pub weights: ScoreWeights,
    pub policy: BuyabilityPolicy,
    pub screen: bool,
    /// Embeddings tried per template application.
    pub max_matches: usize,
    /// Treat a node as done when its summed cost is at most this.
    pub early_accept_cost: Option<f64>,
    /// Condition candidates averaged into the reaction temperature.
    pub temperature_top_k: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_depth: 5,
            time_limit_s: None,
            max_expansions: None,
            top_n_templates: 50,
            route_limit: None,
            weights: ScoreWeights::default(),
            policy: BuyabilityPolicy::default(),
            screen: true,
            max_matches: DEFAULT_MAX_MATCHES,
            early_accept_cost: None,
            temperature_top_k: crate::conditions::DEFAULT_TOP_K,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::Config(m.into()));
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if self.top_n_templates < 1 {
            return bad("top_n_templates must be at least 1");
        }
        if self.max_matches < 1 {
            return bad("max_matches must be at least 1");
        }
        if self.temperature_top_k < 1 {
            return bad("temperature_top_k must be at least 1");
        }
        if self.time_limit_s.is_some_and(|t| !(t >= 0.0 && t.is_finite())) {
            return bad("time_limit_s must be finite and non-negative");
        }
        self.weights.validate()?;
        self.policy.validate()?;
        Ok(())
    }
}

/// Edge `enzyme`: 0 for synthetic rules, otherwise the enzyme identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Enzyme {
    Synthetic,
    Id(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchEdge {
    /// `precursors>>expanded`, both sides canonical.
    pub reaction_smiles: String,
    pub temperature_c: f64,
    pub enzyme: Enzyme,
    /// Composite score at creation; the child's queue priority.
    pub score: f64,
    pub rule: String,
    /// Dense index among the parent's edges.
    pub label: usize,
    /// Known for edges created by a search, absent after deserialization.
    pub template_id: Option<usize>,
    pub components: Option<ScoreComponents>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub molecule_set: MoleculeSet,
    /// Summed effective cost of the members.
    pub cost_usd_per_g: f64,
    pub depth: usize,
    pub subtrees: Vec<(SearchEdge, SearchNode)>,
    pub solved: bool,
}

impl SearchNode {
    pub fn node_count(&self) -> usize {
        1 + self.subtrees.iter().map(|(_, n)| n.node_count()).sum::<usize>()
    }

    pub fn edge_count(&self) -> usize {
        self.node_count() - 1
    }

    /// Recompute `solved` from a catalog, e.g. after deserialization.
    pub fn refresh_solved(&mut self, catalog: &PriceCatalog, policy: &BuyabilityPolicy) {
        self.solved = self
            .molecule_set
            .member_smiles()
            .iter()
            .all(|k| crate::pricing::is_buyable(catalog.price_of_key(k), policy));
        for (_, c) in &mut self.subtrees {
            c.refresh_solved(catalog, policy);
        }
    }
}

/// Template proposals for one molecule: ids into `library()` with scores,
/// best first.
pub trait TemplateRanker: Send + Sync {
    fn library(&self) -> &TemplateLibrary;
    fn rank(&self, m: &Molecule, top_n: usize, screen: bool) -> Vec<(usize, f64)>;
}

/// Hopfield ensemble ranking over its template library.
pub struct EnsembleRanker {
    pub ensemble: Ensemble,
    pub library: TemplateLibrary,
}

impl TemplateRanker for EnsembleRanker {
    fn library(&self) -> &TemplateLibrary {
        &self.library
    }

    fn rank(&self, m: &Molecule, top_n: usize, screen: bool) -> Vec<(usize, f64)> {
        rank_templates(&self.ensemble, m, top_n, screen)
    }
}

/// Every template in id order with a uniform score. Useful without a
/// trained model and as a reference for exhaustive comparisons.
pub struct ExhaustiveRanker {
    pub library: TemplateLibrary,
}

const EXHAUSTIVE_SCREEN_BITS: usize = 2048;

impl TemplateRanker for ExhaustiveRanker {
    fn library(&self) -> &TemplateLibrary {
        &self.library
    }

    fn rank(&self, m: &Molecule, top_n: usize, screen: bool) -> Vec<(usize, f64)> {
        let k = self.library.len().max(1) as f64;
        let fp = screen.then(|| fingerprint(m, 0, EXHAUSTIVE_SCREEN_BITS));
        self.library
            .templates()
            .iter()
            .filter(|t| fp.as_ref().is_none_or(|fp| crate::mhn::substructure_screen(fp, t)))
            .take(top_n)
            .map(|t| (t.id, 1.0 / k))
            .collect()
    }
}

/// Everything a search consults besides its config.
pub struct Services<'a> {
    pub catalog: &'a PriceCatalog,
    pub conditions: &'a dyn ConditionPredictor,
    pub toxicity: &'a ToxicityDb,
    pub enzymatic: Option<&'a dyn TemplateRanker>,
    pub synthetic: Option<&'a dyn TemplateRanker>,
    /// Checked between expansions; when set the search stops.
    pub cancel: Option<&'a AtomicBool>,
}
