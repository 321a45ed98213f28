use std::collections::{HashMap, HashSet};

use crate::chem::{implicit_hydrogens, Atom, Bond, BondOrder, Molecule, MoleculeSet};

use super::matcher::match_pattern;
use super::pattern::BondQuery;
use super::Template;

/// Apply `t` retrosynthetically to `m` for up to `max_matches` embeddings of
/// its product pattern. Results that break valence rules are dropped and
/// the rest are deduplicated by canonical key, in embedding order. An empty
/// result means the template is not applicable.
pub fn apply_template(t: &Template, m: &Molecule, max_matches: usize) -> Vec<MoleculeSet> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for emb in match_pattern(t.product(), m).into_iter().take(max_matches.max(1)) {
        if let Some(set) = rewrite(t, m, &emb) {
            if seen.insert(set.canonical_key().to_string()) {
                out.push(set);
            }
        }
    }
    out
}

fn rewrite(t: &Template, m: &Molecule, emb: &[usize]) -> Option<MoleculeSet> {
    let prod = t.product();
    let prec = t.precursor_union();
    let n = m.atom_count();

    let mut pattern_of = vec![usize::MAX; n];
    for (pi, &ai) in emb.iter().enumerate() {
        pattern_of[ai] = pi;
    }
    // Molecule atom kept for each precursor pattern atom, if any.
    let mut kept_for: Vec<Option<usize>> = vec![None; prec.len()];
    let mut delete = vec![false; n];
    for (pi, &ai) in emb.iter().enumerate() {
        match prod.atoms()[pi].map_id.and_then(|k| prec.find_map(k)) {
            Some(ri) => kept_for[ri] = Some(ai),
            None => delete[ai] = true,
        }
    }

    let mut atoms: Vec<Atom> = m
        .atoms()
        .iter()
        .map(|a| Atom {
            map_id: None,
            ..a.clone()
        })
        .collect();
    let old_half: Vec<i32> = (0..n).map(|i| half_sum(m, i)).collect();

    let mut bonds: Vec<Bond> = Vec::with_capacity(m.bonds().len());
    let mut old_order: HashMap<(usize, usize), BondOrder> = HashMap::new();
    for b in m.bonds() {
        let (pa, pb) = (pattern_of[b.a], pattern_of[b.b]);
        let in_pattern =
            pa != usize::MAX && pb != usize::MAX && prod.bond_between(pa, pb).is_some();
        if in_pattern {
            old_order.insert((b.a.min(b.b), b.a.max(b.b)), b.order);
            continue;
        }
        if delete[b.a] || delete[b.b] {
            // A deleted atom still bonded to context: the rule does not
            // describe this molecule.
            return None;
        }
        bonds.push(b.clone());
    }

    let mut idx_of = vec![usize::MAX; prec.len()];
    for (ri, rp) in prec.atoms().iter().enumerate() {
        idx_of[ri] = match kept_for[ri] {
            Some(ai) => {
                let a = &mut atoms[ai];
                if let Some(e) = rp.element {
                    a.element = e;
                }
                if let Some(x) = rp.aromatic {
                    a.aromatic = x;
                }
                if let Some(c) = rp.charge {
                    a.charge = c;
                }
                ai
            }
            None => {
                let mut a = Atom::new(rp.element?);
                a.aromatic = rp.aromatic.unwrap_or(false);
                a.charge = rp.charge.unwrap_or(0);
                atoms.push(a);
                atoms.len() - 1
            }
        };
    }

    for pb in prec.bonds() {
        let (a, b) = (idx_of[pb.a], idx_of[pb.b]);
        let order = match pb.query.concrete() {
            Some(o) => o,
            None => match old_order.get(&(a.min(b), a.max(b))) {
                Some(&o) if BondQuery::SingleOrAromatic.matches(o) => o,
                _ if atoms[a].aromatic && atoms[b].aromatic => BondOrder::Aromatic,
                _ => BondOrder::Single,
            },
        };
        bonds.push(Bond { a, b, order });
    }

    let mut keep = vec![true; atoms.len()];
    for i in 0..n {
        keep[i] = !delete[i];
    }
    let mut remap = vec![usize::MAX; atoms.len()];
    let mut next = 0;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            remap[i] = next;
            next += 1;
        }
    }
    let is_new = |i: usize| i >= n;
    let touched: Vec<Option<usize>> = {
        let mut v = vec![None; atoms.len()];
        for (ri, &i) in idx_of.iter().enumerate() {
            v[i] = Some(ri);
        }
        v
    };

    let new_atoms: Vec<Atom> = atoms
        .iter()
        .enumerate()
        .filter(|&(i, _)| keep[i])
        .map(|(_, a)| a.clone())
        .collect();
    let new_bonds: Vec<Bond> = bonds
        .iter()
        .map(|b| Bond {
            a: remap[b.a],
            b: remap[b.b],
            order: b.order,
        })
        .collect();
    let draft = Molecule::from_parts(new_atoms, new_bonds, "").ok()?;

    // Hydrogen counts: pinned by the precursor pattern, conserved for
    // rewritten atoms, implied by valence for created ones.
    let mut final_atoms = draft.atoms().to_vec();
    for (i, &k) in keep.iter().enumerate() {
        if !k {
            continue;
        }
        let j = remap[i];
        let Some(ri) = touched[i] else { continue };
        let rp = &prec.atoms()[ri];
        let a = &mut final_atoms[j];
        if let Some(h) = rp.h_count {
            a.hydrogens = h;
        } else if is_new(i) {
            a.hydrogens = implicit_hydrogens(a.element, a.aromatic, draft.bond_valence(j)).unwrap_or(0);
        } else {
            let delta = old_half[i] - half_sum(&draft, j);
            if delta % 2 != 0 {
                return None;
            }
            let h = m.atom(i).hydrogens as i32 + delta / 2;
            if h < 0 {
                return None;
            }
            a.hydrogens = h as u8;
        }
    }
    let result = Molecule::from_parts(final_atoms, draft.bonds().to_vec(), "").ok()?;
    if !result.valence_ok() {
        return None;
    }
    MoleculeSet::new(result.split_components())
}

fn half_sum(m: &Molecule, i: usize) -> i32 {
    m.neighbors(i)
        .iter()
        .map(|&(_, b)| m.bonds()[b].order.half_units())
        .sum()
}
