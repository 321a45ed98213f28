use super::Molecule;

/// Seed for every fingerprint hash. Bumping it changes all fingerprints, so
/// it is tied to the model file format version.
pub const FINGERPRINT_SEED: u64 = 0x4D48_4E50_0000_0001;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn hash_combine(h: u64, v: u64) -> u64 {
    mix(h ^ v
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(h << 6)
        .wrapping_add(h >> 2))
}

fn hash_seq(vals: impl IntoIterator<Item = u64>) -> u64 {
    vals.into_iter().fold(FINGERPRINT_SEED, hash_combine)
}

/// Radius-0 identifier of an atom environment.
pub(crate) fn atom_invariant_hash(
    element: u8,
    charge: i8,
    degree: usize,
    hydrogens: u8,
    aromatic: bool,
) -> u64 {
    hash_seq([
        0,
        element as u64,
        charge as i64 as u64,
        degree as u64,
        hydrogens as u64,
        aromatic as u64,
    ])
}

/// All environment identifiers for radii `0..=radius`, given per-node
/// initial identifiers and `(neighbor, bond code)` adjacency.
pub(crate) fn circular_identifiers(
    initial: Vec<u64>,
    edges: &[Vec<(usize, u8)>],
    radius: usize,
) -> Vec<u64> {
    let mut all = initial.clone();
    let mut current = initial;
    for r in 1..=radius {
        let next: Vec<u64> = (0..current.len())
            .map(|i| {
                let mut nb: Vec<(u8, u64)> =
                    edges[i].iter().map(|&(j, k)| (k, current[j])).collect();
                nb.sort_unstable();
                hash_seq(
                    [r as u64, current[i]]
                        .into_iter()
                        .chain(nb.into_iter().flat_map(|(k, id)| [k as u64, id])),
                )
            })
            .collect();
        all.extend_from_slice(&next);
        current = next;
    }
    all
}

/// Folded circular fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    radius: usize,
    n_bits: usize,
}

impl Fingerprint {
    pub fn zeros(n_bits: usize, radius: usize) -> Self {
        assert!(
            n_bits.is_power_of_two(),
            "fingerprint width must be a power of two, got {n_bits}"
        );
        Fingerprint {
            words: vec![0; n_bits.div_ceil(64)],
            radius,
            n_bits,
        }
    }

    pub(crate) fn from_identifiers(ids: &[u64], n_bits: usize, radius: usize) -> Self {
        let mut fp = Self::zeros(n_bits, radius);
        for &id in ids {
            fp.set((id & (n_bits as u64 - 1)) as usize);
        }
        fp
    }

    pub fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_bits).filter(|&b| self.get(b))
    }

    pub fn is_subset_of(&self, other: &Fingerprint) -> bool {
        self.n_bits == other.n_bits
            && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &Fingerprint) {
        assert_eq!(self.n_bits, other.n_bits);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Dense 0/1 vector for model input.
    pub fn to_dense(&self) -> Vec<f64> {
        (0..self.n_bits).map(|b| if self.get(b) { 1.0 } else { 0.0 }).collect()
    }
}

/// Radius-0 identifiers of every atom: element, charge, heavy degree,
/// hydrogen count and aromatic flag.
pub(crate) fn molecule_atom_invariants(m: &Molecule) -> Vec<u64> {
    (0..m.atom_count())
        .map(|i| {
            let a = m.atom(i);
            atom_invariant_hash(a.element, a.charge, m.degree(i), a.hydrogens, a.aromatic)
        })
        .collect()
}

/// Extended-connectivity fingerprint: identifiers of every atom environment
/// up to `radius` bonds, folded modulo `n_bits`.
///
/// Panics if `n_bits` is not a power of two.
pub fn fingerprint(m: &Molecule, radius: usize, n_bits: usize) -> Fingerprint {
    let edges: Vec<Vec<(usize, u8)>> = (0..m.atom_count())
        .map(|i| {
            m.neighbors(i)
                .iter()
                .map(|&(j, b)| (j, m.bonds()[b].order.code()))
                .collect()
        })
        .collect();
    let ids = circular_identifiers(molecule_atom_invariants(m), &edges, radius);
    Fingerprint::from_identifiers(&ids, n_bits, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn methane_radius_zero_sets_one_bit() {
        let fp = fingerprint(&parse_smiles("C").unwrap(), 0, 4096);
        assert_eq!(fp.count_ones(), 1);
    }

    #[test]
    fn ethanol_radius_one_bit_count() {
        // Three radius-0 environments (CH3, CH2, OH) plus three radius-1
        // environments: at most six distinct bits.
        let fp = fingerprint(&parse_smiles("CCO").unwrap(), 1, 4096);
        assert!((3..=6).contains(&fp.count_ones()), "{}", fp.count_ones());
    }

    #[test]
    fn permutation_invariant() {
        let a = fingerprint(&parse_smiles("OCC").unwrap(), 2, 4096);
        let b = fingerprint(&parse_smiles("CCO").unwrap(), 2, 4096);
        assert_eq!(a, b);
    }

    #[test]
    fn radius_monotone() {
        let m = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        for r in 0..4 {
            let small = fingerprint(&m, r, 1024);
            let big = fingerprint(&m, r + 1, 1024);
            assert!(small.is_subset_of(&big));
        }
    }

    #[test]
    fn seed_is_pinned() {
        // Frozen identifier; changing the hash or seed must be deliberate.
        let fp = fingerprint(&parse_smiles("C").unwrap(), 0, 4096);
        let bits: Vec<usize> = fp.ones().collect();
        assert_eq!(bits, vec![568]);
    }

    #[test]
    #[should_panic]
    fn width_must_be_power_of_two() {
        let _ = Fingerprint::zeros(1000, 2);
    }
}
