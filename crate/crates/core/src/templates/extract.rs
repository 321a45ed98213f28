use std::collections::{BTreeSet, HashMap, HashSet};

use crate::chem::{parse_smiles, parse_smiles_set, Molecule, MoleculeSet};

use super::pattern::{AtomPattern, BondQuery, PatternBond, PatternGraph};
use super::{Template, TemplateError};

/// Atom-mapped reaction in the forward direction.
#[derive(Debug, Clone)]
pub struct MappedReaction {
    pub reactants: Vec<Molecule>,
    pub product: Molecule,
}

impl MappedReaction {
    /// Reactants sharing at least one map number with the product, with
    /// map numbers removed.
    pub fn contributing_reactants(&self) -> Option<MoleculeSet> {
        let maps: HashSet<u32> = self.product.atoms().iter().filter_map(|a| a.map_id).collect();
        let members = self
            .reactants
            .iter()
            .filter(|r| r.atoms().iter().any(|a| a.map_id.is_some_and(|k| maps.contains(&k))))
            .map(Molecule::strip_maps)
            .collect();
        MoleculeSet::new(members)
    }
}

/// Parse "reactants>>product". When the product side has several
/// components the one with the most atoms is kept.
pub fn parse_mapped_reaction(text: &str) -> Result<MappedReaction, TemplateError> {
    let bad = |msg: String| TemplateError::Reaction(msg);
    let (lhs, rhs) = text
        .split_once(">>")
        .ok_or_else(|| bad("missing '>>'".into()))?;
    let reactants = lhs
        .split('.')
        .enumerate()
        .map(|(i, s)| parse_smiles(s).map_err(|e| bad(format!("reactant {i}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let products = parse_smiles_set(rhs).map_err(|e| bad(format!("product: {e}")))?;
    let product = products
        .members()
        .iter()
        .enumerate()
        .max_by_key(|&(i, m)| (m.atom_count(), std::cmp::Reverse(i)))
        .map(|(_, m)| m.clone())
        .expect("non-empty set");
    Ok(MappedReaction { reactants, product })
}

fn atom_pattern(m: &Molecule, i: usize, map_id: Option<u32>) -> AtomPattern {
    let a = m.atom(i);
    AtomPattern {
        element: Some(a.element),
        aromatic: Some(a.aromatic),
        h_count: Some(a.hydrogens),
        degree: Some(m.degree(i) as u8),
        charge: Some(a.charge),
        map_id,
    }
}

/// Build the retrosynthetic template of a mapped reaction: changed atoms
/// plus their product-side environment up to `env_radius` bonds, rewritten
/// into the corresponding reactant fragments with every leaving atom.
pub fn extract_template(rxn: &MappedReaction, env_radius: usize) -> Result<Template, TemplateError> {
    let mut where_: HashMap<u32, (usize, usize)> = HashMap::new();
    for (ri, r) in rxn.reactants.iter().enumerate() {
        for (ai, a) in r.atoms().iter().enumerate() {
            if let Some(k) = a.map_id {
                if where_.insert(k, (ri, ai)).is_some() {
                    return Err(TemplateError::DuplicateMap(k));
                }
            }
        }
    }
    let p = &rxn.product;
    let mut product_maps = HashSet::new();
    for (i, a) in p.atoms().iter().enumerate() {
        match a.map_id {
            Some(k) if where_.contains_key(&k) => {
                product_maps.insert(k);
            }
            _ => return Err(TemplateError::UnmappedAtom { atom: i }),
        }
    }

    let map_of = |i: usize| p.atom(i).map_id.expect("checked above");
    let mut changed = Vec::new();
    for i in 0..p.atom_count() {
        let (ri, ai) = where_[&map_of(i)];
        let r = &rxn.reactants[ri];
        let (pa, ra) = (p.atom(i), r.atom(ai));
        let mut psig: Vec<(Option<u32>, u8)> = p
            .neighbors(i)
            .iter()
            .map(|&(j, b)| (Some(map_of(j)), p.bonds()[b].order.code()))
            .collect();
        let mut rsig: Vec<(Option<u32>, u8)> = r
            .neighbors(ai)
            .iter()
            .map(|&(j, b)| {
                let k = r.atom(j).map_id.filter(|k| product_maps.contains(k));
                (k, r.bonds()[b].order.code())
            })
            .collect();
        psig.sort_unstable();
        rsig.sort_unstable();
        if pa.element != ra.element
            || pa.charge != ra.charge
            || pa.hydrogens != ra.hydrogens
            || pa.aromatic != ra.aromatic
            || psig != rsig
        {
            changed.push(i);
        }
    }
    if changed.is_empty() {
        return Err(TemplateError::NoChange);
    }

    let mut dist = vec![usize::MAX; p.atom_count()];
    let mut queue = std::collections::VecDeque::new();
    for &c in &changed {
        dist[c] = 0;
        queue.push_back(c);
    }
    while let Some(u) = queue.pop_front() {
        if dist[u] == env_radius {
            continue;
        }
        for &(v, _) in p.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let selected: Vec<usize> = (0..p.atom_count()).filter(|&i| dist[i] != usize::MAX).collect();
    let selected_maps: BTreeSet<u32> = selected.iter().map(|&i| map_of(i)).collect();

    let mut product_graph = induced(p, &selected, |i| Some(map_of(i)))?;

    let contributing: BTreeSet<usize> = selected_maps.iter().map(|k| where_[k].0).collect();
    let mut parts = Vec::new();
    for &ri in &contributing {
        let r = &rxn.reactants[ri];
        let keep: Vec<usize> = (0..r.atom_count())
            .filter(|&ai| match r.atom(ai).map_id {
                Some(k) if product_maps.contains(&k) => selected_maps.contains(&k),
                _ => true,
            })
            .collect();
        let graph = induced(r, &keep, |ai| {
            r.atom(ai).map_id.filter(|k| selected_maps.contains(k))
        })?;
        parts.push(graph);
    }
    let mut precursor_graph = PatternGraph::union(&parts)?;

    // Renumber map ids 1..n in map-free canonical order of the product side.
    let order = product_graph.canonical_order_ignoring_maps();
    let mut renumber = HashMap::new();
    for (k, &i) in order.iter().enumerate() {
        let old = product_graph.atoms()[i].map_id.expect("product atoms are mapped");
        renumber.insert(old, k as u32 + 1);
    }
    for i in 0..product_graph.len() {
        let m = product_graph.atoms()[i].map_id.map(|k| renumber[&k]);
        product_graph.set_map(i, m);
    }
    for i in 0..precursor_graph.len() {
        let m = precursor_graph.atoms()[i].map_id.map(|k| renumber[&k]);
        precursor_graph.set_map(i, m);
    }
    Template::from_patterns(product_graph, precursor_graph)
}

fn induced(
    m: &Molecule,
    keep: &[usize],
    map: impl Fn(usize) -> Option<u32>,
) -> Result<PatternGraph, TemplateError> {
    let mut pos = vec![usize::MAX; m.atom_count()];
    for (k, &i) in keep.iter().enumerate() {
        pos[i] = k;
    }
    let atoms = keep.iter().map(|&i| atom_pattern(m, i, map(i))).collect();
    let bonds = m
        .bonds()
        .iter()
        .filter(|b| pos[b.a] != usize::MAX && pos[b.b] != usize::MAX)
        .map(|b| PatternBond {
            a: pos[b.a],
            b: pos[b.b],
            query: BondQuery::from_order(b.order),
        })
        .collect();
    PatternGraph::new(atoms, bonds)
}
