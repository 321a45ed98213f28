//! Reaction templates as retrosynthetic graph-rewrite rules: parsing and
//! canonical serialization, subgraph matching, application to molecules,
//! extraction from atom-mapped reactions, and template libraries.

mod apply;
mod extract;
mod library;
mod matcher;
mod pattern;

use std::fmt;

use thiserror::Error;

use crate::chem::{atom_invariant_hash, circular_identifiers, hash_combine, Fingerprint, FINGERPRINT_SEED};

pub use apply::apply_template;
pub use extract::{extract_template, parse_mapped_reaction, MappedReaction};
pub use library::{
    extract_library, read_reaction_tsv, LibraryError, LineError, ReactionRecord, TemplateLibrary,
};
pub use matcher::match_pattern;
pub use pattern::{parse_pattern, AtomPattern, BondQuery, PatternBond, PatternGraph};

/// Extraction radius used when none is given.
pub const DEFAULT_ENV_RADIUS: usize = 1;
/// Embeddings applied per template per molecule when none is given.
pub const DEFAULT_MAX_MATCHES: usize = 8;
/// Radius of the circular identifiers in template fingerprints.
pub const TEMPLATE_FP_RADIUS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("template syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unsupported SMARTS primitive '{token}' at {pos}")]
    UnsupportedPrimitive { token: String, pos: usize },
    #[error("map number {0} used twice on one side")]
    DuplicateMap(u32),
    #[error("new precursor atom {0} has no element constraint")]
    UnderspecifiedAtom(usize),
    #[error("reaction parse error: {0}")]
    Reaction(String),
    #[error("product atom {atom} has no atom map present among the reactants")]
    UnmappedAtom { atom: usize },
    #[error("reaction changes no mapped atom")]
    NoChange,
}

impl TemplateError {
    pub(crate) fn syntax(pos: usize, msg: impl Into<String>) -> Self {
        TemplateError::Syntax {
            pos,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemplateSource {
    Enzymatic,
    Synthetic,
}

impl TemplateSource {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateSource::Enzymatic => "enz",
            TemplateSource::Synthetic => "syn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "enz" => Some(TemplateSource::Enzymatic),
            "syn" => Some(TemplateSource::Synthetic),
            _ => None,
        }
    }
}

impl fmt::Display for TemplateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A retrosynthetic rule: one product pattern rewritten into precursor
/// patterns. Precursor atoms whose map number is absent from the product
/// pattern, or that carry no map number, are created on application.
#[derive(Debug, Clone)]
pub struct Template {
    pub id: usize,
    pub source: TemplateSource,
    pub enzyme: Option<String>,
    pub support: u32,
    product: PatternGraph,
    precursors: Vec<PatternGraph>,
    precursor_union: PatternGraph,
    text: String,
    screen_ids: Vec<u64>,
}

impl PartialEq for Template {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
            && self.id == other.id
            && self.source == other.source
            && self.enzyme == other.enzyme
            && self.support == other.support
    }
}

impl Template {
    /// Build from structured sides; precursor components are split and
    /// ordered canonically.
    pub fn from_patterns(
        product: PatternGraph,
        precursors: PatternGraph,
    ) -> Result<Self, TemplateError> {
        if product.is_empty() {
            return Err(TemplateError::syntax(0, "empty product pattern"));
        }
        let mut comps = precursors.components();
        comps.sort_by_cached_key(|c| c.canonical_text());
        let precursor_union = PatternGraph::union(&comps)?;
        let text = format!(
            "{}>>{}",
            product.canonical_text(),
            precursor_union.canonical_text()
        );
        let screen_ids = product
            .atoms()
            .iter()
            .filter(|a| a.fully_pinned())
            .map(|a| {
                atom_invariant_hash(
                    a.element.unwrap(),
                    a.charge.unwrap(),
                    a.degree.unwrap() as usize,
                    a.h_count.unwrap(),
                    a.aromatic.unwrap(),
                )
            })
            .collect();
        Ok(Template {
            id: 0,
            source: TemplateSource::Synthetic,
            enzyme: None,
            support: 1,
            product,
            precursors: comps,
            precursor_union,
            text,
            screen_ids,
        })
    }

    pub fn product(&self) -> &PatternGraph {
        &self.product
    }

    /// Precursor components in canonical order.
    pub fn precursors(&self) -> &[PatternGraph] {
        &self.precursors
    }

    pub(crate) fn precursor_union(&self) -> &PatternGraph {
        &self.precursor_union
    }

    /// Canonical rule text.
    pub fn text(&self) -> &str {
        &self.text
    }

    /// Bits any molecule matching the product pattern must set in its
    /// fingerprint of width `n_bits` (any radius).
    pub fn screen_bits(&self, n_bits: usize) -> Fingerprint {
        Fingerprint::from_identifiers(&self.screen_ids, n_bits, 0)
    }
}

/// Parse a rule "product>>precursor.precursor" in the supported SMARTS subset.
pub fn parse_template(text: &str) -> Result<Template, TemplateError> {
    let Some(split) = text.find(">>") else {
        return Err(TemplateError::syntax(0, "missing '>>'"));
    };
    if let Some(extra) = text[split + 2..].find('>') {
        return Err(TemplateError::syntax(split + 2 + extra, "unexpected '>'"));
    }
    if text[..split].contains('>') {
        return Err(TemplateError::syntax(text.find('>').unwrap(), "unexpected '>'"));
    }
    let product = parse_pattern(&text[..split], 0)?;
    let precursors = parse_pattern(&text[split + 2..], split + 2)?;
    Template::from_patterns(product, precursors)
}

fn pattern_identifiers(g: &PatternGraph, radius: usize) -> Vec<u64> {
    let initial = g
        .atoms()
        .iter()
        .zip(0..)
        .map(|(a, i)| {
            let k = a.constraint_key();
            [1u64, g.neighbors(i).len() as u64]
                .into_iter()
                .chain(k.iter().map(|&v| v as u64))
                .fold(FINGERPRINT_SEED, hash_combine)
        })
        .collect();
    circular_identifiers(initial, &g.edge_lists(), radius)
}

/// Union of circular identifiers over both sides of the rule, computed on
/// the pattern graphs with constraint tuples as atom invariants. Map numbers
/// and template metadata do not contribute.
pub fn template_fingerprint(t: &Template, n_bits: usize) -> Fingerprint {
    let mut ids = pattern_identifiers(&t.product, TEMPLATE_FP_RADIUS);
    ids.extend(pattern_identifiers(&t.precursor_union, TEMPLATE_FP_RADIUS));
    Fingerprint::from_identifiers(&ids, n_bits, TEMPLATE_FP_RADIUS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let t = parse_template("[C:1][O:2]>>[C:1].[O:2]").unwrap();
        assert_eq!(t.product().len(), 2);
        assert_eq!(t.precursors().len(), 2);
        assert!(t.precursors().iter().all(|p| p.len() == 1));
        let id = parse_template("[C:1]>>[C:1]").unwrap();
        assert_eq!(id.text(), "[C:1]>>[C:1]");
        match parse_template("[C$(CO):1]>>[C:1]") {
            Err(TemplateError::UnsupportedPrimitive { token, .. }) => assert_eq!(token, "$("),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_template("[C:1]"), Err(TemplateError::Syntax { .. })));
        assert!(matches!(
            parse_template("[C:1]>>[C:1]>>[C:1]"),
            Err(TemplateError::Syntax { .. })
        ));
    }

    #[test]
    fn serialization_is_closed() {
        for s in [
            "[C:1][O:2][C:3]>>[C:1][O:2].[C:3]",
            "[#7;a:5]:[c;H0;D3;+0:4]>>[n:5].[c:4]-[Br]",
            "[C:1](=[O;D1;H0:2])-[N;H1:3]>>[N;H2:3].[C:1](=[O:2])-[Cl]",
        ] {
            let once = parse_template(s).unwrap().text().to_string();
            let twice = parse_template(&once).unwrap().text().to_string();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn precursor_order_is_canonical() {
        let a = parse_template("[C:1][O:2]>>[C:1].[O:2]").unwrap();
        let b = parse_template("[O:2][C:1]>>[O:2].[C:1]").unwrap();
        assert_eq!(a.text(), b.text());
    }

    #[test]
    fn fingerprint_examples() {
        let id = parse_template("[C:1]>>[C:1]").unwrap();
        let alone = parse_pattern("[C:1]", 0).unwrap();
        let expected =
            Fingerprint::from_identifiers(&pattern_identifiers(&alone, TEMPLATE_FP_RADIUS), 4096, TEMPLATE_FP_RADIUS);
        assert_eq!(template_fingerprint(&id, 4096), expected);

        let mut other = id.clone();
        other.id = 17;
        assert_eq!(template_fingerprint(&other, 4096), template_fingerprint(&id, 4096));

        let ether = parse_template("[C:1][O:2][C:3]>>[C:1][O:2].[C:3]").unwrap();
        let e = template_fingerprint(&ether, 4096);
        let i = template_fingerprint(&id, 4096);
        assert!(!e.is_subset_of(&i));
    }

    #[test]
    fn screen_bits_need_pinned_atoms() {
        let loose = parse_template("[C:1]>>[C:1]").unwrap();
        assert_eq!(loose.screen_bits(4096).count_ones(), 0);
        let pinned = parse_template("[N;H2;D1;+0:1]-[C:2]>>[N:1].[C:2]").unwrap();
        assert_eq!(pinned.screen_bits(4096).count_ones(), 1);
    }
}
