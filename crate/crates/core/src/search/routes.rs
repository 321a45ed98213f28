use thiserror::Error;

use crate::chem::{parse_smiles_set, Molecule, MoleculeSet};
use crate::scoring::{composite_score, cost_score, temp_score, ScoreWeights, COST_NORMALIZER};
use crate::templates::{apply_template, parse_template};

use super::{SearchEdge, SearchNode};

/// A root-to-solved path.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub edges: Vec<SearchEdge>,
    /// Canonical key of the node reached by each edge.
    pub node_keys: Vec<String>,
    /// Summed member cost of the solved end node.
    pub total_cost: f64,
    /// None for a zero-step route.
    pub max_temperature_c: Option<f64>,
    /// None when no edge carries score components.
    pub min_solvent_score: Option<f64>,
    pub score: f64,
}

impl Route {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Canonical precursor key of each step, in order.
    pub fn precursor_keys(&self) -> Vec<String> {
        self.edges
            .iter()
            .map(|e| e.reaction_smiles.split_once(">>").map_or("", |(l, _)| l).to_string())
            .collect()
    }
}

fn finish(edges: Vec<SearchEdge>, node_keys: Vec<String>, total_cost: f64, w: &ScoreWeights) -> Route {
    let max_t = edges.iter().map(|e| e.temperature_c).reduce(f64::max);
    let min_s = edges
        .iter()
        .filter_map(|e| e.components.map(|c| c.solv))
        .reduce(f64::min);
    let score = composite_score(
        cost_score(total_cost.clamp(0.0, COST_NORMALIZER)).expect("clamped"),
        max_t.map_or(0.0, temp_score),
        min_s.unwrap_or(0.0),
        w,
    );
    Route {
        edges,
        node_keys,
        total_cost,
        max_temperature_c: max_t,
        min_solvent_score: min_s,
        score,
    }
}

/// Depth-first enumeration of root-to-solved paths, sorted by route score
/// descending; equal scores keep enumeration order.
pub fn extract_routes(root: &SearchNode, w: &ScoreWeights) -> Vec<Route> {
    fn walk(n: &SearchNode, edges: &mut Vec<SearchEdge>, keys: &mut Vec<String>, w: &ScoreWeights, out: &mut Vec<Route>) {
        if n.solved {
            out.push(finish(edges.clone(), keys.clone(), n.cost_usd_per_g, w));
        }
        for (e, c) in &n.subtrees {
            edges.push(e.clone());
            keys.push(c.molecule_set.canonical_key().to_string());
            walk(c, edges, keys, w, out);
            edges.pop();
            keys.pop();
        }
    }
    let mut out = Vec::new();
    walk(root, &mut Vec::new(), &mut Vec::new(), w, &mut out);
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {step}: malformed reaction SMILES {reaction:?}")]
    Reaction { step: usize, reaction: String },
    #[error("step {step}: expanded molecule {molecule} is not in the current set")]
    NotAMember { step: usize, molecule: String },
    #[error("step {step}: rule does not parse: {msg}")]
    Rule { step: usize, msg: String },
    #[error("step {step}: applying the rule does not regenerate {expected}")]
    NotReproduced { step: usize, expected: String },
    #[error("step {step}: resulting set {found} differs from recorded {expected}")]
    NodeMismatch { step: usize, expected: String, found: String },
}

/// Re-apply each edge's rule from `target` and require canonical-key
/// equality of the precursors and of every intermediate set.
pub fn replay_route(target: &Molecule, route: &Route, max_matches: usize) -> Result<(), ReplayError> {
    let mut current = MoleculeSet::single(target.strip_maps());
    for (step, (edge, expected)) in route.edges.iter().zip(&route.node_keys).enumerate() {
        let malformed = || ReplayError::Reaction {
            step,
            reaction: edge.reaction_smiles.clone(),
        };
        let (lhs, rhs) = edge.reaction_smiles.split_once(">>").ok_or_else(malformed)?;
        let pre = parse_smiles_set(lhs).map_err(|_| malformed())?;
        let prod = parse_smiles_set(rhs).map_err(|_| malformed())?;
        let idx = current
            .member_smiles()
            .iter()
            .position(|k| k == prod.canonical_key())
            .ok_or_else(|| ReplayError::NotAMember {
                step,
                molecule: prod.canonical_key().to_string(),
            })?;
        let rule = parse_template(&edge.rule).map_err(|e| ReplayError::Rule { step, msg: e.to_string() })?;
        let produced = apply_template(&rule, &current.members()[idx], max_matches);
        if !produced.iter().any(|s| s.canonical_key() == pre.canonical_key()) {
            return Err(ReplayError::NotReproduced {
                step,
                expected: pre.canonical_key().to_string(),
            });
        }
        let mut members: Vec<Molecule> = current
            .members()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != idx)
            .map(|(_, m)| m.clone())
            .collect();
        members.extend(pre.members().iter().cloned());
        current = MoleculeSet::new(members).expect("non-empty");
        if current.canonical_key() != expected {
            return Err(ReplayError::NodeMismatch {
                step,
                expected: expected.clone(),
                found: current.canonical_key().to_string(),
            });
        }
    }
    Ok(())
}
