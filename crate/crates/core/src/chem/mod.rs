//! Molecular graphs: SMILES parsing, canonical writing, circular
//! fingerprints, Murcko scaffolds and scaffold-grouped dataset splits.

pub(crate) mod canon;
mod fingerprint;
mod io;
mod molecule;
mod scaffold;
mod smiles;

pub use fingerprint::{fingerprint, Fingerprint, FINGERPRINT_SEED};
pub(crate) use fingerprint::{atom_invariant_hash, circular_identifiers, hash_combine};
pub use io::{read_molecule_list, write_molecule_list, MoleculeListError};
pub use molecule::{
    allowed_valences, element_from_symbol, element_symbol, has_aromatic_symbol,
    implicit_hydrogens, is_organic_subset, Atom, Bond, BondOrder, GraphError, Molecule,
};
pub use scaffold::{murcko_scaffold, scaffold_split, SplitError};
pub use smiles::{parse_smiles, SmilesError};

use canon::LabeledGraph;

impl LabeledGraph for Molecule {
    fn node_count(&self) -> usize {
        self.atom_count()
    }

    fn node_key(&self, i: usize) -> Vec<i64> {
        let a = self.atom(i);
        vec![
            self.degree(i) as i64,
            a.element as i64,
            a.aromatic as i64,
            a.charge as i64,
            a.hydrogens as i64,
            a.map_id.map_or(-1, |m| m as i64),
        ]
    }

    fn node_edges(&self, i: usize) -> Vec<(usize, u8)> {
        self.neighbors(i)
            .iter()
            .map(|&(j, b)| (j, self.bonds()[b].order.code()))
            .collect()
    }

    fn node_text(&self, i: usize) -> String {
        atom_text(self, i)
    }

    fn bond_text(&self, a: usize, b: usize, key: u8) -> &'static str {
        match key {
            1 if self.atom(a).aromatic && self.atom(b).aromatic => "-",
            1 | 4 => "",
            2 => "=",
            _ => "#",
        }
    }
}

fn atom_text(m: &Molecule, i: usize) -> String {
    let a = m.atom(i);
    let symbol = element_symbol(a.element);
    let written = if a.aromatic && has_aromatic_symbol(a.element) {
        symbol.to_ascii_lowercase()
    } else {
        symbol.to_string()
    };
    let bare_ok = is_organic_subset(a.element)
        && a.charge == 0
        && a.map_id.is_none()
        && (!a.aromatic || matches!(a.element, 5 | 6 | 7 | 8 | 15 | 16))
        && implicit_hydrogens(a.element, a.aromatic, m.bond_valence(i)) == Some(a.hydrogens);
    if bare_ok {
        return written;
    }
    let mut s = String::with_capacity(8);
    s.push('[');
    s.push_str(&written);
    match a.hydrogens {
        0 => {}
        1 => s.push('H'),
        h => s.push_str(&format!("H{h}")),
    }
    match a.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => s.push_str(&format!("+{c}")),
        c => s.push_str(&format!("-{}", -c)),
    }
    if let Some(m) = a.map_id {
        s.push_str(&format!(":{m}"));
    }
    s.push(']');
    s
}

/// Deterministic SMILES independent of input atom order. The empty molecule
/// writes as the empty string.
pub fn write_canonical_smiles(m: &Molecule) -> String {
    canon::canonical_string(m)
}

/// Non-empty collection of molecules keyed by their sorted canonical SMILES.
#[derive(Debug, Clone)]
pub struct MoleculeSet {
    members: Vec<Molecule>,
    smiles: Vec<String>,
    canonical_key: String,
}

impl PartialEq for MoleculeSet {
    fn eq(&self, other: &Self) -> bool {
        self.canonical_key == other.canonical_key
    }
}

impl Eq for MoleculeSet {}

impl MoleculeSet {
    /// Members are stored sorted by canonical SMILES; `None` for an empty input.
    pub fn new(members: Vec<Molecule>) -> Option<Self> {
        if members.is_empty() {
            return None;
        }
        let mut pairs: Vec<(String, Molecule)> = members
            .into_iter()
            .map(|m| (write_canonical_smiles(&m), m))
            .collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let canonical_key = pairs
            .iter()
            .map(|p| p.0.as_str())
            .collect::<Vec<_>>()
            .join(".");
        let (smiles, members) = pairs.into_iter().unzip();
        Some(MoleculeSet {
            members,
            smiles,
            canonical_key,
        })
    }

    pub fn single(m: Molecule) -> Self {
        Self::new(vec![m]).expect("one member")
    }

    pub fn members(&self) -> &[Molecule] {
        &self.members
    }

    /// Canonical SMILES of each member, aligned with `members()`.
    pub fn member_smiles(&self) -> &[String] {
        &self.smiles
    }

    pub fn canonical_key(&self) -> &str {
        &self.canonical_key
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Parse dot-separated SMILES into a set, one member per component.
pub fn parse_smiles_set(text: &str) -> Result<MoleculeSet, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::Syntax {
            pos: 0,
            msg: "empty SMILES".into(),
        });
    }
    let mut members = Vec::new();
    let mut offset = 0;
    for (index, part) in text.split('.').enumerate() {
        let m = parse_smiles(part).map_err(|e| {
            let e = match e {
                SmilesError::Syntax { pos, msg } => SmilesError::Syntax {
                    pos: pos + offset,
                    msg,
                },
                other => other,
            };
            SmilesError::Component {
                index,
                source: Box::new(e),
            }
        })?;
        members.push(m);
        offset += part.len() + 1;
    }
    Ok(MoleculeSet::new(members).expect("at least one component"))
}

/// Canonical SMILES of a text input, convenient for keys.
pub fn canonicalize(text: &str) -> Result<String, SmilesError> {
    Ok(parse_smiles_set(text)?.canonical_key().to_string())
}
