use std::fmt;

use thiserror::Error;

/// Element symbols indexed by atomic number (index 0 unused).
const SYMBOLS: [&str; 87] = [
    "*", "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S",
    "Cl", "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge",
    "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd",
    "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn",
];

pub fn element_symbol(z: u8) -> &'static str {
    SYMBOLS.get(z as usize).copied().unwrap_or("*")
}

pub fn element_from_symbol(sym: &str) -> Option<u8> {
    SYMBOLS
        .iter()
        .skip(1)
        .position(|s| *s == sym)
        .map(|i| i as u8 + 1)
}

/// Elements that may appear without brackets in SMILES.
pub fn is_organic_subset(z: u8) -> bool {
    matches!(z, 5 | 6 | 7 | 8 | 9 | 15 | 16 | 17 | 35 | 53)
}

/// Elements with a lowercase aromatic spelling.
pub fn has_aromatic_symbol(z: u8) -> bool {
    matches!(z, 5 | 6 | 7 | 8 | 15 | 16 | 33 | 34)
}

fn default_valences(z: u8) -> Option<&'static [u8]> {
    Some(match z {
        5 => &[3],
        6 => &[4],
        7 => &[3, 5],
        8 => &[2],
        15 => &[3, 5],
        16 => &[2, 4, 6],
        9 | 17 | 35 | 53 => &[1],
        _ => return None,
    })
}

fn period(z: u8) -> u8 {
    match z {
        0..=2 => 1,
        3..=10 => 2,
        11..=18 => 3,
        19..=36 => 4,
        37..=54 => 5,
        _ => 6,
    }
}

/// Allowed valences for a charged atom, using the isoelectronic neighbour in
/// the same period (N+ behaves like C, O- like F, ...). `None` means the
/// element is not valence-checked.
pub fn allowed_valences(z: u8, charge: i8) -> Option<&'static [u8]> {
    if charge == 0 {
        return default_valences(z);
    }
    let shifted = z as i16 - charge as i16;
    if !(1..=86).contains(&shifted) || period(shifted as u8) != period(z) {
        return None;
    }
    default_valences(shifted as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's valence; aromatic bonds count as one and the
    /// aromatic atom's extra electron is handled separately.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    /// Bond order in half units (aromatic = 3), used for valence bookkeeping
    /// during graph rewriting.
    pub fn half_units(self) -> i32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Aromatic => 3,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    /// Atomic number.
    pub element: u8,
    pub charge: i8,
    /// Total attached hydrogens, whether written in brackets or implied by valence.
    pub hydrogens: u8,
    pub aromatic: bool,
    pub map_id: Option<u32>,
}

impl Atom {
    pub fn new(element: u8) -> Self {
        Atom {
            element,
            charge: 0,
            hydrogens: 0,
            aromatic: false,
            map_id: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("bond {bond} references atom {atom} but the molecule has {n_atoms} atoms")]
    AtomOutOfRange {
        bond: usize,
        atom: usize,
        n_atoms: usize,
    },
    #[error("bond {0} is a self-loop")]
    SelfLoop(usize),
    #[error("atoms {0} and {1} are bonded twice")]
    DuplicateBond(usize, usize),
    #[error("aromatic bond between atoms {0} and {1} touches a non-aromatic atom")]
    AromaticBond(usize, usize),
    #[error("atom map number {0} used more than once")]
    DuplicateMap(u32),
}

/// Attributed molecular graph with hydrogens folded into heavy atoms.
#[derive(Clone)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    provenance: String,
}

impl fmt::Debug for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Molecule({})", crate::chem::write_canonical_smiles(self))
    }
}

impl PartialEq for Molecule {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms && self.bonds == other.bonds
    }
}

impl Molecule {
    pub fn empty() -> Self {
        Molecule {
            atoms: Vec::new(),
            bonds: Vec::new(),
            adjacency: Vec::new(),
            provenance: String::new(),
        }
    }

    pub fn from_parts(
        atoms: Vec<Atom>,
        bonds: Vec<Bond>,
        provenance: impl Into<String>,
    ) -> Result<Self, GraphError> {
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, bond) in bonds.iter().enumerate() {
            for atom in [bond.a, bond.b] {
                if atom >= n {
                    return Err(GraphError::AtomOutOfRange {
                        bond: i,
                        atom,
                        n_atoms: n,
                    });
                }
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfLoop(i));
            }
            if adjacency[bond.a].iter().any(|&(nb, _)| nb == bond.b) {
                return Err(GraphError::DuplicateBond(bond.a, bond.b));
            }
            if bond.order == BondOrder::Aromatic && !(atoms[bond.a].aromatic && atoms[bond.b].aromatic)
            {
                return Err(GraphError::AromaticBond(bond.a, bond.b));
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        let mut maps: Vec<u32> = atoms.iter().filter_map(|a| a.map_id).collect();
        maps.sort_unstable();
        if let Some(w) = maps.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateMap(w[0]));
        }
        Ok(Molecule {
            atoms,
            bonds,
            adjacency,
            provenance: provenance.into(),
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbor, bond index)` pairs of an atom.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(nb, _)| nb == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    /// Sum of bond valence contributions (aromatic bonds count one).
    pub fn bond_valence(&self, i: usize) -> u8 {
        self.adjacency[i]
            .iter()
            .map(|&(_, bi)| self.bonds[bi].order.valence())
            .sum()
    }

    /// True when explicit valence (bonds + hydrogens) does not exceed the
    /// largest allowed valence for every checked atom.
    pub fn valence_ok(&self) -> bool {
        (0..self.atoms.len()).all(|i| self.atom_valence_ok(i))
    }

    pub fn atom_valence_ok(&self, i: usize) -> bool {
        let atom = &self.atoms[i];
        match allowed_valences(atom.element, atom.charge) {
            Some(vals) => {
                let used = self.bond_valence(i) as u16 + atom.hydrogens as u16;
                used <= *vals.last().unwrap() as u16
            }
            None => true,
        }
    }

    pub fn strip_maps(&self) -> Molecule {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                map_id: None,
                ..a.clone()
            })
            .collect();
        Molecule {
            atoms,
            bonds: self.bonds.clone(),
            adjacency: self.adjacency.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Connected components as atom index lists, each sorted ascending,
    /// ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut head = 0;
            while head < comp.len() {
                let u = comp[head];
                head += 1;
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Induced subgraph on `keep` (in the given order).
    pub fn subgraph(&self, keep: &[usize]) -> Molecule {
        let mut remap = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let atoms = keep.iter().map(|&i| self.atoms[i].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| remap[b.a] != usize::MAX && remap[b.b] != usize::MAX)
            .map(|b| Bond {
                a: remap[b.a],
                b: remap[b.b],
                order: b.order,
            })
            .collect();
        Molecule::from_parts(atoms, bonds, String::new()).expect("subgraph of a valid molecule")
    }

    /// Split into connected components.
    pub fn split_components(&self) -> Vec<Molecule> {
        self.components().iter().map(|c| self.subgraph(c)).collect()
    }

    /// Flags marking bonds that lie on at least one cycle.
    pub fn ring_bonds(&self) -> Vec<bool> {
        // Tarjan bridge finding; a bond is a ring bond iff it is not a bridge.
        let n = self.atoms.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut is_ring = vec![true; self.bonds.len()];
        let mut timer = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // (atom, parent bond, next neighbor position)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (u, pb, ref mut pos)) = stack.last_mut() {
                if *pos < self.adjacency[u].len() {
                    let (v, bi) = self.adjacency[u][*pos];
                    *pos += 1;
                    if bi == pb {
                        continue;
                    }
                    if disc[v] == usize::MAX {
                        disc[v] = timer;
                        low[v] = timer;
                        timer += 1;
                        stack.push((v, bi, 0));
                    } else {
                        low[u] = low[u].min(disc[v]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[u]);
                        if low[u] > disc[p] {
                            is_ring[pb] = false;
                        }
                    }
                }
            }
        }
        is_ring
    }

    pub fn ring_atoms(&self) -> Vec<bool> {
        let ring_bonds = self.ring_bonds();
        let mut out = vec![false; self.atoms.len()];
        for (b, &r) in self.bonds.iter().zip(&ring_bonds) {
            if r {
                out[b.a] = true;
                out[b.b] = true;
            }
        }
        out
    }
}

/// Hydrogen count implied by valence rules for an organic-subset atom, or
/// `None` when the bonds already exceed every allowed valence.
pub fn implicit_hydrogens(element: u8, aromatic: bool, bond_valence: u8) -> Option<u8> {
    let vals = default_valences(element)?;
    if aromatic {
        // Aromatic atoms spend one valence unit on the pi system unless they
        // donate a lone pair (pyrrole-type n, furan o, thiophene s).
        let lowest = vals[0];
        if bond_valence + 1 <= lowest {
            return Some(lowest - bond_valence - 1);
        }
        return (bond_valence <= lowest).then_some(0);
    }
    vals.iter()
        .find(|&&v| v >= bond_valence)
        .map(|&v| v - bond_valence)
}
