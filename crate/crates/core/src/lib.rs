//! Retrosynthesis planning: template ranking with a Hopfield-attention
//! prioritizer, greedy best-first route search and tunable route scoring.

pub mod chem;
pub mod conditions;
pub mod evalharness;
pub mod mhn;
pub mod pricing;
pub mod scoring;
pub mod search;
pub mod templates;
