//! SMILES reader for the supported subset: organic-subset and bracket atoms
//! (element, H count, charge, map number), explicit bonds `- = # :`,
//! lowercase aromatics, ring closures (`1`-`9`, `%nn`) and branches.
//! Stereo marks and isotopes are rejected.

use thiserror::Error;

use super::molecule::{
    allowed_valences, element_from_symbol, implicit_hydrogens, is_organic_subset, Atom, Bond,
    BondOrder, GraphError, Molecule,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("valence exceeded on atom {atom} ({symbol})")]
    Valence { atom: usize, symbol: String },
    #[error("ring bond {0} was opened but never closed")]
    Ring(u32),
    #[error("component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<SmilesError>,
    },
}

impl SmilesError {
    fn syntax(pos: usize, msg: impl Into<String>) -> Self {
        SmilesError::Syntax {
            pos,
            msg: msg.into(),
        }
    }

    /// Character offset of a syntax error, when known.
    pub fn position(&self) -> Option<usize> {
        match self {
            SmilesError::Syntax { pos, .. } => Some(*pos),
            SmilesError::Component { source, .. } => source.position(),
            _ => None,
        }
    }
}

struct PendingAtom {
    atom: Atom,
    /// Bracket atoms carry explicit hydrogens; others get implicit ones.
    bracket: bool,
    pos: usize,
}

struct RingOpen {
    atom: usize,
    order: Option<BondOrder>,
    pos: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<PendingAtom>,
    bonds: Vec<(usize, usize, Option<BondOrder>)>,
    rings: Vec<(u32, RingOpen)>,
}

pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::syntax(0, "empty SMILES"));
    }
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        rings: Vec::new(),
    };
    p.parse_chain()?;
    if p.pos < p.text.len() {
        let c = p.text[p.pos] as char;
        return Err(SmilesError::syntax(
            p.pos,
            if c == ')' {
                "unbalanced ')'".to_string()
            } else {
                format!("unexpected '{c}'")
            },
        ));
    }
    if let Some((label, _)) = p.rings.first() {
        return Err(SmilesError::Ring(*label));
    }
    p.finish(text)
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn parse_chain(&mut self) -> Result<(), SmilesError> {
        let mut prev: Option<usize> = None;
        // Branch stack holds the atom each open '(' hangs from.
        let mut branches: Vec<(usize, usize)> = Vec::new();
        let mut pending_bond: Option<(BondOrder, usize)> = None;
        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    let Some(from) = prev else {
                        return Err(SmilesError::syntax(self.pos, "branch without a preceding atom"));
                    };
                    if pending_bond.is_some() {
                        return Err(SmilesError::syntax(self.pos, "bond symbol before '('"));
                    }
                    branches.push((from, self.pos));
                    self.pos += 1;
                }
                b')' => {
                    let Some((from, _)) = branches.pop() else {
                        return Err(SmilesError::syntax(self.pos, "unbalanced ')'"));
                    };
                    if pending_bond.is_some() {
                        return Err(SmilesError::syntax(self.pos, "dangling bond before ')'"));
                    }
                    if self.text.get(self.pos.wrapping_sub(1)) == Some(&b'(') {
                        return Err(SmilesError::syntax(self.pos, "empty branch"));
                    }
                    prev = Some(from);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' => {
                    if pending_bond.is_some() {
                        return Err(SmilesError::syntax(self.pos, "two consecutive bond symbols"));
                    }
                    if prev.is_none() {
                        return Err(SmilesError::syntax(self.pos, "bond without a preceding atom"));
                    }
                    let order = match c {
                        b'-' => BondOrder::Single,
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        _ => BondOrder::Aromatic,
                    };
                    pending_bond = Some((order, self.pos));
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = prev else {
                        return Err(SmilesError::syntax(self.pos, "ring closure without an atom"));
                    };
                    let start = self.pos;
                    let label = self.ring_label()?;
                    self.ring_bond(atom, label, pending_bond.take().map(|b| b.0), start)?;
                }
                b'/' | b'\\' => {
                    return Err(SmilesError::syntax(
                        self.pos,
                        "directional bonds (stereo) are not supported",
                    ))
                }
                b'.' => {
                    return Err(SmilesError::syntax(
                        self.pos,
                        "'.' is not allowed in a single molecule",
                    ))
                }
                _ => {
                    let idx = self.parse_atom()?;
                    if let Some(from) = prev {
                        let order = pending_bond.take().map(|b| b.0);
                        self.bonds.push((from, idx, order));
                    }
                    prev = Some(idx);
                }
            }
        }
        if let Some((_, pos)) = branches.pop() {
            return Err(SmilesError::syntax(pos, "unclosed '('"));
        }
        if let Some((_, pos)) = pending_bond {
            return Err(SmilesError::syntax(pos, "bond symbol at end of input"));
        }
        if self.atoms.is_empty() {
            return Err(SmilesError::syntax(0, "no atoms"));
        }
        Ok(())
    }

    fn ring_label(&mut self) -> Result<u32, SmilesError> {
        let c = self.text[self.pos];
        if c == b'%' {
            let digits = self.text.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                }
                _ => Err(SmilesError::syntax(self.pos, "'%' must be followed by two digits")),
            }
        } else {
            self.pos += 1;
            Ok((c - b'0') as u32)
        }
    }

    fn ring_bond(
        &mut self,
        atom: usize,
        label: u32,
        order: Option<BondOrder>,
        pos: usize,
    ) -> Result<(), SmilesError> {
        if let Some(i) = self.rings.iter().position(|(l, _)| *l == label) {
            let (_, open) = self.rings.remove(i);
            if open.atom == atom {
                return Err(SmilesError::syntax(pos, "ring closure to the same atom"));
            }
            let order = match (open.order, order) {
                (Some(a), Some(b)) if a != b => {
                    return Err(SmilesError::syntax(pos, "conflicting ring-closure bond orders"))
                }
                (a, b) => a.or(b),
            };
            let _ = open.pos;
            self.bonds.push((open.atom, atom, order));
        } else {
            self.rings.push((label, RingOpen { atom, order, pos }));
        }
        Ok(())
    }

    fn parse_atom(&mut self) -> Result<usize, SmilesError> {
        let start = self.pos;
        let c = self.text[self.pos];
        let pending = if c == b'[' {
            self.parse_bracket()?
        } else {
            let two = self.text.get(self.pos..self.pos + 2);
            let (element, aromatic, len) = match (c, two) {
                (b'C', Some(b"Cl")) => (17, false, 2),
                (b'B', Some(b"Br")) => (35, false, 2),
                (b'B', _) => (5, false, 1),
                (b'C', _) => (6, false, 1),
                (b'N', _) => (7, false, 1),
                (b'O', _) => (8, false, 1),
                (b'P', _) => (15, false, 1),
                (b'S', _) => (16, false, 1),
                (b'F', _) => (9, false, 1),
                (b'I', _) => (53, false, 1),
                (b'b', _) => (5, true, 1),
                (b'c', _) => (6, true, 1),
                (b'n', _) => (7, true, 1),
                (b'o', _) => (8, true, 1),
                (b'p', _) => (15, true, 1),
                (b's', _) => (16, true, 1),
                (b'@', _) => {
                    return Err(SmilesError::syntax(start, "chirality marks are not supported"))
                }
                _ => {
                    return Err(SmilesError::syntax(
                        start,
                        format!("unknown symbol '{}'", c as char),
                    ))
                }
            };
            self.pos += len;
            let mut atom = Atom::new(element);
            atom.aromatic = aromatic;
            PendingAtom {
                atom,
                bracket: false,
                pos: start,
            }
        };
        self.atoms.push(pending);
        Ok(self.atoms.len() - 1)
    }

    fn parse_bracket(&mut self) -> Result<PendingAtom, SmilesError> {
        let start = self.pos;
        let Some(len) = self.text[start..].iter().position(|&c| c == b']') else {
            return Err(SmilesError::syntax(start, "unclosed '['"));
        };
        let body = &self.text[start + 1..start + len];
        let body_pos = start + 1;
        self.pos = start + len + 1;
        let mut i: usize;
        if body.first().is_some_and(u8::is_ascii_digit) {
            return Err(SmilesError::syntax(body_pos, "isotopes are not supported"));
        }
        // Element symbol: uppercase + optional lowercase, or aromatic lowercase.
        let (element, aromatic) = {
            let first = *body
                .first()
                .ok_or_else(|| SmilesError::syntax(start, "empty bracket atom"))?;
            if first.is_ascii_uppercase() {
                let two = body
                    .get(..2)
                    .filter(|s| s[1].is_ascii_lowercase())
                    .and_then(|s| std::str::from_utf8(s).ok())
                    .and_then(element_from_symbol);
                if let Some(z) = two {
                    i = 2;
                    (z, false)
                } else {
                    i = 1;
                    let sym = (first as char).to_string();
                    let z = element_from_symbol(&sym).ok_or_else(|| {
                        SmilesError::syntax(body_pos, format!("unknown element '{sym}'"))
                    })?;
                    (z, false)
                }
            } else if body.starts_with(b"se") {
                i = 2;
                (34, true)
            } else if body.starts_with(b"as") {
                i = 2;
                (33, true)
            } else {
                i = 1;
                let z = match first {
                    b'b' => 5,
                    b'c' => 6,
                    b'n' => 7,
                    b'o' => 8,
                    b'p' => 15,
                    b's' => 16,
                    _ => {
                        return Err(SmilesError::syntax(
                            body_pos,
                            format!("unknown symbol '{}' in bracket atom", first as char),
                        ))
                    }
                };
                (z, true)
            }
        };
        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        if body.get(i) == Some(&b'@') {
            return Err(SmilesError::syntax(body_pos + i, "chirality marks are not supported"));
        }
        if body.get(i) == Some(&b'H') {
            i += 1;
            let (n, used) = read_number(&body[i..]);
            atom.hydrogens = if used == 0 { 1 } else { n as u8 };
            i += used;
        }
        match body.get(i) {
            Some(&sign @ (b'+' | b'-')) => {
                i += 1;
                let unit: i32 = if sign == b'+' { 1 } else { -1 };
                let (n, used) = read_number(&body[i..]);
                let magnitude = if used > 0 {
                    i += used;
                    n as i32
                } else {
                    let mut m = 1;
                    while body.get(i) == Some(&sign) {
                        m += 1;
                        i += 1;
                    }
                    m
                };
                atom.charge = (unit * magnitude) as i8;
            }
            _ => {}
        }
        if body.get(i) == Some(&b':') {
            i += 1;
            let (n, used) = read_number(&body[i..]);
            if used == 0 {
                return Err(SmilesError::syntax(body_pos + i, "':' must be followed by a map number"));
            }
            atom.map_id = Some(n);
            i += used;
        }
        if i != body.len() {
            return Err(SmilesError::syntax(
                body_pos + i,
                format!("unexpected '{}' in bracket atom", body[i] as char),
            ));
        }
        Ok(PendingAtom {
            atom,
            bracket: true,
            pos: start,
        })
    }

    fn finish(self, text: &str) -> Result<Molecule, SmilesError> {
        let mut bonds = Vec::with_capacity(self.bonds.len());
        for &(a, b, order) in &self.bonds {
            let both_aromatic = self.atoms[a].atom.aromatic && self.atoms[b].atom.aromatic;
            let order = match order {
                Some(o) => o,
                None if both_aromatic => BondOrder::Aromatic,
                None => BondOrder::Single,
            };
            if order == BondOrder::Aromatic && !both_aromatic {
                return Err(SmilesError::syntax(
                    self.atoms[b].pos,
                    "aromatic bond between non-aromatic atoms",
                ));
            }
            bonds.push(Bond { a, b, order });
        }
        let mut valence = vec![0u8; self.atoms.len()];
        for bond in &bonds {
            valence[bond.a] += bond.order.valence();
            valence[bond.b] += bond.order.valence();
        }
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (i, pending) in self.atoms.into_iter().enumerate() {
            let mut atom = pending.atom;
            let symbol = || super::molecule::element_symbol(atom.element).to_string();
            if pending.bracket {
                if let Some(vals) = allowed_valences(atom.element, atom.charge) {
                    if valence[i] as u16 + atom.hydrogens as u16 > *vals.last().unwrap() as u16 {
                        return Err(SmilesError::Valence {
                            atom: i,
                            symbol: symbol(),
                        });
                    }
                }
            } else {
                debug_assert!(is_organic_subset(atom.element));
                atom.hydrogens = implicit_hydrogens(atom.element, atom.aromatic, valence[i])
                    .ok_or_else(|| SmilesError::Valence {
                        atom: i,
                        symbol: symbol(),
                    })?;
            }
            atoms.push(atom);
        }
        Molecule::from_parts(atoms, bonds, text).map_err(|e| match e {
            GraphError::DuplicateBond(..) => SmilesError::syntax(0, "atoms bonded twice"),
            GraphError::DuplicateMap(m) => {
                SmilesError::syntax(0, format!("atom map number {m} used twice"))
            }
            other => SmilesError::syntax(0, other.to_string()),
        })
    }
}

fn read_number(bytes: &[u8]) -> (u32, usize) {
    let used = bytes.iter().take_while(|c| c.is_ascii_digit()).count();
    let n = bytes[..used]
        .iter()
        .fold(0u32, |acc, &d| acc.saturating_mul(10).saturating_add((d - b'0') as u32));
    (n, used)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heavy(m: &Molecule) -> (usize, usize) {
        (m.atom_count(), m.bonds().len())
    }

    #[test]
    fn ethanol() {
        let m = parse_smiles("CCO").unwrap();
        assert_eq!(heavy(&m), (3, 2));
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Single));
        let h: Vec<u8> = m.atoms().iter().map(|a| a.hydrogens).collect();
        assert_eq!(h, vec![3, 2, 1]);
    }

    #[test]
    fn cyclopropane_ring() {
        let m = parse_smiles("C1CC1").unwrap();
        assert_eq!(heavy(&m), (3, 3));
        assert!(m.ring_bonds().iter().all(|&r| r));
    }

    #[test]
    fn unbalanced_branch() {
        assert!(matches!(parse_smiles("C("), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("C)C"), Err(SmilesError::Syntax { pos: 1, .. })));
        assert!(matches!(parse_smiles("C()C"), Err(SmilesError::Syntax { .. })));
    }

    #[test]
    fn unclosed_ring() {
        assert_eq!(parse_smiles("C1CC").unwrap_err(), SmilesError::Ring(1));
        assert_eq!(parse_smiles("C%12CC").unwrap_err(), SmilesError::Ring(12));
    }

    #[test]
    fn valence_errors() {
        assert!(matches!(
            parse_smiles("C(C)(C)(C)(C)C"),
            Err(SmilesError::Valence { atom: 0, .. })
        ));
        assert!(matches!(parse_smiles("O=O=O"), Err(SmilesError::Valence { .. })));
        assert!(matches!(parse_smiles("[CH4]C"), Err(SmilesError::Valence { .. })));
    }

    #[test]
    fn rejects_unsupported_features() {
        for s in ["C[C@H](O)N", "F/C=C/F", "[13CH4]", "CC.O", "C*", "X", "C[Xx]"] {
            assert!(
                matches!(parse_smiles(s), Err(SmilesError::Syntax { .. })),
                "{s} should be a syntax error"
            );
        }
    }

    #[test]
    fn bracket_atoms() {
        let m = parse_smiles("[NH4+]").unwrap();
        assert_eq!(m.atom(0).charge, 1);
        assert_eq!(m.atom(0).hydrogens, 4);
        let m = parse_smiles("C[O-]").unwrap();
        assert_eq!(m.atom(1).charge, -1);
        assert_eq!(m.atom(1).hydrogens, 0);
        let m = parse_smiles("[CH3:7][OH:2]").unwrap();
        assert_eq!(m.atom(0).map_id, Some(7));
        assert_eq!(m.atom(1).hydrogens, 1);
        let m = parse_smiles("[Fe++]").unwrap();
        assert_eq!(m.atom(0).charge, 2);
        let m = parse_smiles("[Cl-]").unwrap();
        assert_eq!(m.atom(0).element, 17);
    }

    #[test]
    fn aromatic_rings() {
        let m = parse_smiles("c1ccccc1").unwrap();
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        assert!(m.atoms().iter().all(|a| a.hydrogens == 1));
        let pyrrole = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(pyrrole.atom(3).hydrogens, 1);
        let biphenyl = parse_smiles("c1ccccc1-c1ccccc1").unwrap();
        assert_eq!(biphenyl.bond_between(5, 6).unwrap().order, BondOrder::Single);
        assert!(parse_smiles("C:C").is_err());
    }

    #[test]
    fn ring_closure_bond_orders() {
        let m = parse_smiles("C=1CCCCC1").unwrap();
        assert_eq!(m.bond_between(0, 5).unwrap().order, BondOrder::Double);
        assert!(parse_smiles("C=1CCCCC#1").is_err());
        assert!(parse_smiles("C11").is_err());
    }

    #[test]
    fn duplicate_map_ids_rejected() {
        assert!(parse_smiles("[CH3:1][CH3:1]").is_err());
    }
}
