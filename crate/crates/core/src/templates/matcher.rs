use std::collections::HashSet;

use crate::chem::Molecule;

use super::pattern::{AtomPattern, PatternGraph};

/// Safety bound on embeddings enumerated for one pattern and molecule.
const MAX_EMBEDDINGS: usize = 10_000;

fn atom_matches(p: &AtomPattern, m: &Molecule, i: usize) -> bool {
    let a = m.atom(i);
    p.element.is_none_or(|e| e == a.element)
        && p.aromatic.is_none_or(|x| x == a.aromatic)
        && p.h_count.is_none_or(|h| h == a.hydrogens)
        && p.degree.is_none_or(|d| d as usize == m.degree(i))
        && p.charge.is_none_or(|c| c == a.charge)
}

/// Pattern atoms in matching order: breadth-first per component, each atom
/// paired with an earlier neighbour that anchors its candidate set.
fn plan(p: &PatternGraph) -> Vec<(usize, Option<usize>)> {
    let n = p.len();
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        out.push((root, None));
        let mut head = out.len() - 1;
        while head < out.len() {
            let u = out[head].0;
            head += 1;
            for &(v, _) in p.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    out.push((v, Some(u)));
                }
            }
        }
    }
    out
}

/// Every embedding of `pattern` into `m` as a vector indexed by pattern atom.
/// Results are sorted lexicographically, and embeddings covering the same
/// atom set with the same map-number assignment are reported once.
pub fn match_pattern(pattern: &PatternGraph, m: &Molecule) -> Vec<Vec<usize>> {
    if pattern.is_empty() || pattern.len() > m.atom_count() {
        return Vec::new();
    }
    let order = plan(pattern);
    let mut found = Vec::new();
    let mut assign = vec![usize::MAX; pattern.len()];
    let mut used = vec![false; m.atom_count()];
    extend(pattern, m, &order, 0, &mut assign, &mut used, &mut found);
    found.sort();
    let mut seen = HashSet::new();
    found.retain(|emb: &Vec<usize>| {
        let mut atoms = emb.clone();
        atoms.sort_unstable();
        let mut maps: Vec<(u32, usize)> = pattern
            .atoms()
            .iter()
            .zip(emb)
            .filter_map(|(a, &i)| a.map_id.map(|k| (k, i)))
            .collect();
        maps.sort_unstable();
        seen.insert((atoms, maps))
    });
    found
}

fn extend(
    p: &PatternGraph,
    m: &Molecule,
    order: &[(usize, Option<usize>)],
    depth: usize,
    assign: &mut Vec<usize>,
    used: &mut Vec<bool>,
    found: &mut Vec<Vec<usize>>,
) {
    if found.len() >= MAX_EMBEDDINGS {
        return;
    }
    if depth == order.len() {
        found.push(assign.clone());
        return;
    }
    let (u, anchor) = order[depth];
    let candidates: Vec<usize> = match anchor {
        Some(a) => {
            let mut c: Vec<usize> = m.neighbors(assign[a]).iter().map(|&(j, _)| j).collect();
            c.sort_unstable();
            c
        }
        None => (0..m.atom_count()).collect(),
    };
    'cand: for c in candidates {
        if used[c] || !atom_matches(&p.atoms()[u], m, c) {
            continue;
        }
        for &(v, bi) in p.neighbors(u) {
            if assign[v] == usize::MAX {
                continue;
            }
            match m.bond_between(c, assign[v]) {
                Some(b) if p.bonds()[bi].query.matches(b.order) => {}
                _ => continue 'cand,
            }
        }
        assign[u] = c;
        used[c] = true;
        extend(p, m, order, depth + 1, assign, used, found);
        assign[u] = usize::MAX;
        used[c] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use crate::templates::parse_pattern;

    fn count(p: &str, m: &str) -> usize {
        match_pattern(&parse_pattern(p, 0).unwrap(), &parse_smiles(m).unwrap()).len()
    }

    #[test]
    fn spec_examples() {
        assert_eq!(count("[C:1]", "CCO"), 2);
        assert_eq!(count("[N:1]", "CCO"), 0);
        assert_eq!(count("[C:1][O:2]", "CO"), 1);
    }

    #[test]
    fn bond_queries() {
        assert_eq!(count("[C:1]=[O:2]", "CC=O"), 1);
        assert_eq!(count("[C:1]-[O:2]", "CC=O"), 0);
        assert_eq!(count("[c:1]:[c:2]", "c1ccccc1"), 12);
        assert_eq!(count("[c:1][c:2]", "c1ccccc1"), 12);
        assert_eq!(count("[c:1]-[c:2]", "c1ccccc1"), 0);
    }

    #[test]
    fn unmapped_symmetric_atoms_deduplicated() {
        // Two hydrogens-free methyl carbons bound to O give one embedding
        // per atom set once map numbers are absent.
        assert_eq!(count("[C]-[O]-[C]", "COC"), 1);
        assert_eq!(count("[C:1]-[O:2]-[C:3]", "COC"), 2);
    }

    #[test]
    fn constraints() {
        assert_eq!(count("[C;H3:1]", "CCO"), 1);
        assert_eq!(count("[C;D2:1]", "CCO"), 1);
        assert_eq!(count("[N;+:1]", "C[NH3+]"), 1);
        assert_eq!(count("[N;+0:1]", "C[NH3+]"), 0);
    }
}
