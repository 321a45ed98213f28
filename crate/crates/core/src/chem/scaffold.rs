use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{write_canonical_smiles, Atom, Bond, Molecule};

/// Bemis-Murcko framework: repeatedly strip terminal atoms until only ring
/// systems and the linkers between them remain. Acyclic input yields the
/// empty molecule.
pub fn murcko_scaffold(m: &Molecule) -> Molecule {
    let n = m.atom_count();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| m.degree(i)).collect();
    let mut queue: Vec<usize> = (0..n).filter(|&i| degree[i] <= 1).collect();
    while let Some(u) = queue.pop() {
        if !alive[u] {
            continue;
        }
        alive[u] = false;
        for &(v, _) in m.neighbors(u) {
            if alive[v] {
                degree[v] -= 1;
                if degree[v] <= 1 {
                    queue.push(v);
                }
            }
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    if keep.is_empty() {
        return Molecule::empty();
    }
    // Hydrogens replace removed substituents so valences stay satisfied.
    let mut atoms: Vec<Atom> = Vec::with_capacity(keep.len());
    let mut remap = vec![usize::MAX; n];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = new;
        let mut atom = m.atom(old).clone();
        let lost: u8 = m
            .neighbors(old)
            .iter()
            .filter(|&&(nb, _)| !alive[nb])
            .map(|&(_, bi)| m.bonds()[bi].order.valence())
            .sum();
        atom.hydrogens += lost;
        atom.map_id = None;
        atoms.push(atom);
    }
    let bonds: Vec<Bond> = m
        .bonds()
        .iter()
        .filter(|b| alive[b.a] && alive[b.b])
        .map(|b| Bond {
            a: remap[b.a],
            b: remap[b.b],
            order: b.order,
        })
        .collect();
    Molecule::from_parts(atoms, bonds, String::new()).expect("scaffold of a valid molecule")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("no molecules to split")]
    EmptyInput,
    #[error("need at least two partitions, got {0}")]
    TooFewPartitions(usize),
}

/// Partition molecule indices into `k` groups so that no scaffold straddles
/// two groups. Scaffold groups are shuffled by `seed`, ordered largest first
/// (stable, so equal sizes keep the shuffled order) and each is assigned to
/// the currently smallest partition.
pub fn scaffold_split(
    molecules: &[Molecule],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, SplitError> {
    if k < 2 {
        return Err(SplitError::TooFewPartitions(k));
    }
    if molecules.is_empty() {
        return Err(SplitError::EmptyInput);
    }
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, m) in molecules.iter().enumerate() {
        let key = write_canonical_smiles(&murcko_scaffold(m));
        groups.entry(key).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    groups.sort_by_key(|g| std::cmp::Reverse(g.len()));
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); k];
    for g in groups {
        let smallest = (0..k).min_by_key(|&p| (parts[p].len(), p)).unwrap();
        parts[smallest].extend(g);
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn scaffold_of(s: &str) -> String {
        write_canonical_smiles(&murcko_scaffold(&parse_smiles(s).unwrap()))
    }

    #[test]
    fn toluene_to_benzene() {
        assert_eq!(scaffold_of("Cc1ccccc1"), "c1ccccc1");
    }

    #[test]
    fn benzene_is_fixed_point() {
        assert_eq!(scaffold_of("c1ccccc1"), "c1ccccc1");
    }

    #[test]
    fn acyclic_gives_empty() {
        assert_eq!(scaffold_of("CCO"), "");
        assert!(murcko_scaffold(&parse_smiles("CCO").unwrap()).is_empty());
    }

    #[test]
    fn keeps_linkers_between_rings() {
        assert_eq!(scaffold_of("OCc1ccc(CCC2CC2)cc1"), scaffold_of("C1CC1CCc1ccccc1"));
        assert_eq!(scaffold_of("CC(C)Cc1ccc(C(C)C(=O)O)cc1"), "c1ccccc1");
    }

    #[test]
    fn idempotent() {
        for s in ["CCN(CC)C(=O)c1ccc2ccccc2c1", "OC1CCN(Cc2ccccc2)CC1", "CCCC"] {
            let once = murcko_scaffold(&parse_smiles(s).unwrap());
            let twice = murcko_scaffold(&once);
            assert_eq!(write_canonical_smiles(&once), write_canonical_smiles(&twice));
        }
    }

    fn mols(list: &[&str]) -> Vec<Molecule> {
        list.iter().map(|s| parse_smiles(s).unwrap()).collect()
    }

    #[test]
    fn single_scaffold_stays_together() {
        let ms: Vec<Molecule> = (1..=10)
            .map(|n| parse_smiles(&format!("{}c1ccccc1", "C".repeat(n))).unwrap())
            .collect();
        let parts = scaffold_split(&ms, 2, 7).unwrap();
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        assert!(sizes.contains(&10) && sizes.contains(&0));
    }

    #[test]
    fn distinct_scaffolds_balance() {
        let ms = mols(&["c1ccccc1", "C1CC1", "C1CCC1", "C1CCCC1"]);
        let parts = scaffold_split(&ms, 2, 1).unwrap();
        assert_eq!(parts[0].len(), 2);
        assert_eq!(parts[1].len(), 2);
    }

    #[test]
    fn equal_groups_fill_evenly() {
        let rings = ["C1CC1", "C1CCC1", "C1CCCC1", "C1CCCCC1", "C1CCCCCC1", "c1ccccc1",
            "c1ccncc1", "c1ccoc1", "c1ccsc1", "C1CCNCC1"];
        let mut ms = Vec::new();
        for r in rings {
            for n in 0..10 {
                ms.push(parse_smiles(&format!("{}{}", "C".repeat(n), r)).unwrap());
            }
        }
        let parts = scaffold_split(&ms, 5, 3).unwrap();
        assert!(parts.iter().all(|p| p.len() == 20));
    }

    #[test]
    fn errors() {
        assert_eq!(scaffold_split(&[], 2, 0), Err(SplitError::EmptyInput));
        assert_eq!(
            scaffold_split(&mols(&["C"]), 1, 0),
            Err(SplitError::TooFewPartitions(1))
        );
    }
}
