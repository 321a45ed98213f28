//! Pattern graphs and the supported SMARTS subset: bracket atoms with
//! element (`#n` or symbol), aromatic/aliphatic (`a`/`A`), hydrogen count
//! (`Hn`), degree (`Dn`), charge and map number, joined by `;`/`&` or
//! juxtaposition; bonds `- = # :` and the implicit single-or-aromatic bond.

use crate::chem::canon::{self, LabeledGraph};
use crate::chem::{element_from_symbol, element_symbol, has_aromatic_symbol, BondOrder};

use super::TemplateError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct AtomPattern {
    pub element: Option<u8>,
    pub aromatic: Option<bool>,
    pub h_count: Option<u8>,
    pub degree: Option<u8>,
    pub charge: Option<i8>,
    pub map_id: Option<u32>,
}

impl AtomPattern {
    /// True when every invariant of the radius-0 fingerprint environment is
    /// pinned, so a matching atom's identifier is known in advance.
    pub fn fully_pinned(&self) -> bool {
        self.element.is_some()
            && self.aromatic.is_some()
            && self.h_count.is_some()
            && self.degree.is_some()
            && self.charge.is_some()
    }

    pub(crate) fn constraint_key(&self) -> [i64; 5] {
        [
            self.element.map_or(-1, |e| e as i64),
            self.aromatic.map_or(-1, |a| a as i64),
            self.h_count.map_or(-1, |h| h as i64),
            self.degree.map_or(-1, |d| d as i64),
            self.charge.map_or(i64::MIN, |c| c as i64),
        ]
    }

    fn text(&self, with_map: bool) -> String {
        let mut parts: Vec<String> = Vec::new();
        match (self.element, self.aromatic) {
            (Some(z), Some(true)) if has_aromatic_symbol(z) => {
                parts.push(element_symbol(z).to_ascii_lowercase())
            }
            (Some(z), Some(false)) if z != 1 => parts.push(element_symbol(z).to_string()),
            (Some(z), arom) => {
                parts.push(format!("#{z}"));
                match arom {
                    Some(true) => parts.push("a".into()),
                    Some(false) => parts.push("A".into()),
                    None => {}
                }
            }
            (None, Some(true)) => parts.push("a".into()),
            (None, Some(false)) => parts.push("A".into()),
            (None, None) => {}
        }
        if let Some(h) = self.h_count {
            parts.push(format!("H{h}"));
        }
        if let Some(d) = self.degree {
            parts.push(format!("D{d}"));
        }
        if let Some(c) = self.charge {
            parts.push(match c {
                0 => "+0".to_string(),
                1 => "+".to_string(),
                -1 => "-".to_string(),
                c if c > 0 => format!("+{c}"),
                c => format!("-{}", -c),
            });
        }
        if parts.is_empty() {
            parts.push("*".into());
        }
        let mut s = format!("[{}", parts.join(";"));
        if with_map {
            if let Some(m) = self.map_id {
                s.push_str(&format!(":{m}"));
            }
        }
        s.push(']');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondQuery {
    Single,
    Double,
    Triple,
    Aromatic,
    /// No bond symbol written: matches single or aromatic.
    SingleOrAromatic,
}

impl BondQuery {
    pub fn matches(self, order: BondOrder) -> bool {
        match self {
            BondQuery::Single => order == BondOrder::Single,
            BondQuery::Double => order == BondOrder::Double,
            BondQuery::Triple => order == BondOrder::Triple,
            BondQuery::Aromatic => order == BondOrder::Aromatic,
            BondQuery::SingleOrAromatic => {
                matches!(order, BondOrder::Single | BondOrder::Aromatic)
            }
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondQuery::Single => 1,
            BondQuery::Double => 2,
            BondQuery::Triple => 3,
            BondQuery::Aromatic => 4,
            BondQuery::SingleOrAromatic => 5,
        }
    }

    fn from_code(code: u8) -> Self {
        match code {
            1 => BondQuery::Single,
            2 => BondQuery::Double,
            3 => BondQuery::Triple,
            4 => BondQuery::Aromatic,
            _ => BondQuery::SingleOrAromatic,
        }
    }

    /// Concrete order used when this query creates a bond.
    pub fn concrete(self) -> Option<BondOrder> {
        match self {
            BondQuery::Single => Some(BondOrder::Single),
            BondQuery::Double => Some(BondOrder::Double),
            BondQuery::Triple => Some(BondOrder::Triple),
            BondQuery::Aromatic => Some(BondOrder::Aromatic),
            BondQuery::SingleOrAromatic => None,
        }
    }

    pub fn from_order(order: BondOrder) -> Self {
        match order {
            BondOrder::Single => BondQuery::Single,
            BondOrder::Double => BondQuery::Double,
            BondOrder::Triple => BondQuery::Triple,
            BondOrder::Aromatic => BondQuery::Aromatic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatternBond {
    pub a: usize,
    pub b: usize,
    pub query: BondQuery,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternGraph {
    atoms: Vec<AtomPattern>,
    bonds: Vec<PatternBond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl PatternGraph {
    pub fn new(atoms: Vec<AtomPattern>, bonds: Vec<PatternBond>) -> Result<Self, TemplateError> {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, b) in bonds.iter().enumerate() {
            if b.a >= atoms.len() || b.b >= atoms.len() || b.a == b.b {
                return Err(TemplateError::syntax(0, "invalid pattern bond"));
            }
            if adjacency[b.a].iter().any(|&(n, _)| n == b.b) {
                return Err(TemplateError::syntax(0, "pattern atoms bonded twice"));
            }
            adjacency[b.a].push((b.b, i));
            adjacency[b.b].push((b.a, i));
        }
        let mut maps: Vec<u32> = atoms.iter().filter_map(|a| a.map_id).collect();
        maps.sort_unstable();
        if let Some(w) = maps.windows(2).find(|w| w[0] == w[1]) {
            return Err(TemplateError::DuplicateMap(w[0]));
        }
        Ok(PatternGraph {
            atoms,
            bonds,
            adjacency,
        })
    }

    pub fn atoms(&self) -> &[AtomPattern] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[PatternBond] {
        &self.bonds
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&PatternBond> {
        self.adjacency[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    pub fn find_map(&self, map_id: u32) -> Option<usize> {
        self.atoms.iter().position(|a| a.map_id == Some(map_id))
    }

    pub(crate) fn edge_lists(&self) -> Vec<Vec<(usize, u8)>> {
        (0..self.atoms.len())
            .map(|i| {
                self.adjacency[i]
                    .iter()
                    .map(|&(j, b)| (j, self.bonds[b].query.code()))
                    .collect()
            })
            .collect()
    }

    /// Connected components, each as its own graph.
    pub fn components(&self) -> Vec<PatternGraph> {
        let n = self.atoms.len();
        let mut comp = vec![usize::MAX; n];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = groups.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut head = 0;
            while head < members.len() {
                let u = members[head];
                head += 1;
                for &(v, _) in &self.adjacency[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        members.push(v);
                    }
                }
            }
            members.sort_unstable();
            groups.push(members);
        }
        groups
            .iter()
            .map(|members| {
                let mut remap = vec![usize::MAX; n];
                for (k, &m) in members.iter().enumerate() {
                    remap[m] = k;
                }
                let atoms = members.iter().map(|&m| self.atoms[m].clone()).collect();
                let bonds = self
                    .bonds
                    .iter()
                    .filter(|b| remap[b.a] != usize::MAX && remap[b.b] != usize::MAX)
                    .map(|b| PatternBond {
                        a: remap[b.a],
                        b: remap[b.b],
                        query: b.query,
                    })
                    .collect();
                PatternGraph::new(atoms, bonds).expect("component of a valid pattern")
            })
            .collect()
    }

    /// Disjoint union of several graphs.
    pub fn union(parts: &[PatternGraph]) -> Result<PatternGraph, TemplateError> {
        let mut atoms = Vec::new();
        let mut bonds = Vec::new();
        for p in parts {
            let off = atoms.len();
            atoms.extend(p.atoms.iter().cloned());
            bonds.extend(p.bonds.iter().map(|b| PatternBond {
                a: b.a + off,
                b: b.b + off,
                query: b.query,
            }));
        }
        PatternGraph::new(atoms, bonds)
    }

    /// Canonical SMARTS text; components sorted and joined with '.'.
    pub fn canonical_text(&self) -> String {
        canon::canonical_string(self)
    }

    /// Atom indices in the order a map-free canonical writing visits them.
    pub(crate) fn canonical_order_ignoring_maps(&self) -> Vec<usize> {
        canon::canonical_form(&Unmapped(self)).1
    }

    pub(crate) fn set_map(&mut self, i: usize, map_id: Option<u32>) {
        self.atoms[i].map_id = map_id;
    }
}

impl LabeledGraph for PatternGraph {
    fn node_count(&self) -> usize {
        self.atoms.len()
    }

    fn node_key(&self, i: usize) -> Vec<i64> {
        let mut k = vec![self.adjacency[i].len() as i64];
        k.extend_from_slice(&self.atoms[i].constraint_key());
        k.push(self.atoms[i].map_id.map_or(-1, |m| m as i64));
        k
    }

    fn node_edges(&self, i: usize) -> Vec<(usize, u8)> {
        self.adjacency[i]
            .iter()
            .map(|&(j, b)| (j, self.bonds[b].query.code()))
            .collect()
    }

    fn node_text(&self, i: usize) -> String {
        self.atoms[i].text(true)
    }

    fn bond_text(&self, _a: usize, _b: usize, key: u8) -> &'static str {
        match BondQuery::from_code(key) {
            BondQuery::Single => "-",
            BondQuery::Double => "=",
            BondQuery::Triple => "#",
            BondQuery::Aromatic => ":",
            BondQuery::SingleOrAromatic => "",
        }
    }
}

struct Unmapped<'a>(&'a PatternGraph);

impl LabeledGraph for Unmapped<'_> {
    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    fn node_key(&self, i: usize) -> Vec<i64> {
        let mut k = self.0.node_key(i);
        k.pop();
        k
    }

    fn node_edges(&self, i: usize) -> Vec<(usize, u8)> {
        self.0.node_edges(i)
    }

    fn node_text(&self, i: usize) -> String {
        self.0.atoms[i].text(false)
    }

    fn bond_text(&self, a: usize, b: usize, key: u8) -> &'static str {
        self.0.bond_text(a, b, key)
    }
}

/// Parse one side of a rule (may contain '.'-separated components) into a
/// single possibly-disconnected graph. `offset` shifts error positions.
pub fn parse_pattern(text: &str, offset: usize) -> Result<PatternGraph, TemplateError> {
    let mut p = PatternParser {
        text: text.as_bytes(),
        pos: 0,
        offset,
        atoms: Vec::new(),
        bonds: Vec::new(),
        rings: Vec::new(),
    };
    p.parse()?;
    let bonds = p
        .bonds
        .iter()
        .map(|&(a, b, q)| PatternBond { a, b, query: q })
        .collect();
    PatternGraph::new(p.atoms, bonds)
}

struct PatternParser<'a> {
    text: &'a [u8],
    pos: usize,
    offset: usize,
    atoms: Vec<AtomPattern>,
    bonds: Vec<(usize, usize, BondQuery)>,
    rings: Vec<(u32, usize, Option<BondQuery>)>,
}

impl PatternParser<'_> {
    fn err(&self, msg: impl Into<String>) -> TemplateError {
        TemplateError::syntax(self.pos + self.offset, msg)
    }

    fn unsupported(&self, token: impl Into<String>) -> TemplateError {
        TemplateError::UnsupportedPrimitive {
            token: token.into(),
            pos: self.pos + self.offset,
        }
    }

    fn parse(&mut self) -> Result<(), TemplateError> {
        let mut prev: Option<usize> = None;
        let mut branches: Vec<usize> = Vec::new();
        let mut pending: Option<BondQuery> = None;
        while let Some(&c) = self.text.get(self.pos) {
            match c {
                b'.' => {
                    if !branches.is_empty() || pending.is_some() || prev.is_none() {
                        return Err(self.err("misplaced '.'"));
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'(' => {
                    let Some(from) = prev else {
                        return Err(self.err("branch without a preceding atom"));
                    };
                    branches.push(from);
                    self.pos += 1;
                }
                b')' => {
                    let Some(from) = branches.pop() else {
                        return Err(self.err("unbalanced ')'"));
                    };
                    prev = Some(from);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' => {
                    if pending.is_some() || prev.is_none() {
                        return Err(self.err("misplaced bond symbol"));
                    }
                    pending = Some(match c {
                        b'-' => BondQuery::Single,
                        b'=' => BondQuery::Double,
                        b'#' => BondQuery::Triple,
                        _ => BondQuery::Aromatic,
                    });
                    self.pos += 1;
                }
                b'~' => return Err(self.unsupported("~")),
                b'@' => return Err(self.unsupported("@")),
                b'/' | b'\\' => return Err(self.unsupported((c as char).to_string())),
                b',' => return Err(self.unsupported(",")),
                b'!' => return Err(self.unsupported("!")),
                b'$' => return Err(self.unsupported("$(")),
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = prev else {
                        return Err(self.err("ring closure without an atom"));
                    };
                    let label = if c == b'%' {
                        let d = self.text.get(self.pos + 1..self.pos + 3);
                        match d {
                            Some(d) if d.iter().all(u8::is_ascii_digit) => {
                                self.pos += 3;
                                ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32
                            }
                            _ => return Err(self.err("'%' must be followed by two digits")),
                        }
                    } else {
                        self.pos += 1;
                        (c - b'0') as u32
                    };
                    let q = pending.take();
                    if let Some(i) = self.rings.iter().position(|r| r.0 == label) {
                        let (_, open, oq) = self.rings.remove(i);
                        if open == atom {
                            return Err(self.err("ring closure to the same atom"));
                        }
                        let q = match (oq, q) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(self.err("conflicting ring-closure bonds"))
                            }
                            (a, b) => a.or(b).unwrap_or(BondQuery::SingleOrAromatic),
                        };
                        self.bonds.push((open, atom, q));
                    } else {
                        self.rings.push((label, atom, q));
                    }
                }
                _ => {
                    let atom = self.parse_atom()?;
                    self.atoms.push(atom);
                    let idx = self.atoms.len() - 1;
                    if let Some(from) = prev {
                        self.bonds
                            .push((from, idx, pending.take().unwrap_or(BondQuery::SingleOrAromatic)));
                    }
                    prev = Some(idx);
                }
            }
        }
        if !branches.is_empty() {
            return Err(self.err("unclosed '('"));
        }
        if pending.is_some() {
            return Err(self.err("dangling bond symbol"));
        }
        if let Some(&(label, _, _)) = self.rings.first() {
            return Err(self.err(format!("ring bond {label} never closed")));
        }
        if self.atoms.is_empty() {
            return Err(self.err("empty pattern"));
        }
        Ok(())
    }

    fn parse_atom(&mut self) -> Result<AtomPattern, TemplateError> {
        let c = self.text[self.pos];
        if c == b'[' {
            return self.parse_bracket();
        }
        let two = self.text.get(self.pos..self.pos + 2);
        let (element, aromatic, len) = match (c, two) {
            (b'C', Some(b"Cl")) => (Some(17), Some(false), 2),
            (b'B', Some(b"Br")) => (Some(35), Some(false), 2),
            (b'B', _) => (Some(5), Some(false), 1),
            (b'C', _) => (Some(6), Some(false), 1),
            (b'N', _) => (Some(7), Some(false), 1),
            (b'O', _) => (Some(8), Some(false), 1),
            (b'P', _) => (Some(15), Some(false), 1),
            (b'S', _) => (Some(16), Some(false), 1),
            (b'F', _) => (Some(9), Some(false), 1),
            (b'I', _) => (Some(53), Some(false), 1),
            (b'b', _) => (Some(5), Some(true), 1),
            (b'c', _) => (Some(6), Some(true), 1),
            (b'n', _) => (Some(7), Some(true), 1),
            (b'o', _) => (Some(8), Some(true), 1),
            (b'p', _) => (Some(15), Some(true), 1),
            (b's', _) => (Some(16), Some(true), 1),
            (b'a', _) => (None, Some(true), 1),
            (b'A', _) => (None, Some(false), 1),
            (b'*', _) => (None, None, 1),
            _ => return Err(self.unsupported((c as char).to_string())),
        };
        self.pos += len;
        Ok(AtomPattern {
            element,
            aromatic,
            ..Default::default()
        })
    }

    fn parse_bracket(&mut self) -> Result<AtomPattern, TemplateError> {
        let open = self.pos;
        let Some(len) = self.text[open..].iter().position(|&c| c == b']') else {
            return Err(self.err("unclosed '['"));
        };
        let body = &self.text[open + 1..open + len];
        let base = open + 1;
        self.pos = open + len + 1;
        let mut atom = AtomPattern::default();
        let mut i = 0;
        let at = |i: usize| base + i + self.offset;
        let unsupported = |tok: &str, i: usize| TemplateError::UnsupportedPrimitive {
            token: tok.to_string(),
            pos: at(i),
        };
        let conflict = |what: &str, i: usize| {
            TemplateError::syntax(at(i), format!("{what} constrained twice"))
        };
        fn set<T: PartialEq>(slot: &mut Option<T>, v: T) -> bool {
            match slot {
                Some(old) if *old != v => false,
                _ => {
                    *slot = Some(v);
                    true
                }
            }
        }
        while i < body.len() {
            let c = body[i];
            match c {
                b';' | b'&' => i += 1,
                b'$' => return Err(unsupported("$(", i)),
                b',' => return Err(unsupported(",", i)),
                b'!' => return Err(unsupported("!", i)),
                b'@' => return Err(unsupported("@", i)),
                b'*' => i += 1,
                b'#' => {
                    let (n, used) = digits(&body[i + 1..]);
                    if used == 0 || n == 0 || n > 118 {
                        return Err(TemplateError::syntax(at(i), "bad atomic number"));
                    }
                    if !set(&mut atom.element, n as u8) {
                        return Err(conflict("element", i));
                    }
                    i += 1 + used;
                }
                b'+' | b'-' => {
                    let unit: i32 = if c == b'+' { 1 } else { -1 };
                    let (n, used) = digits(&body[i + 1..]);
                    let (mag, adv) = if used > 0 {
                        (n as i32, 1 + used)
                    } else {
                        let reps = body[i..].iter().take_while(|&&x| x == c).count();
                        (reps as i32, reps)
                    };
                    if !set(&mut atom.charge, (unit * mag) as i8) {
                        return Err(conflict("charge", i));
                    }
                    i += adv;
                }
                b':' => {
                    let (n, used) = digits(&body[i + 1..]);
                    if used == 0 || i + 1 + used != body.len() {
                        return Err(TemplateError::syntax(at(i), "map number must end the atom"));
                    }
                    atom.map_id = Some(n);
                    i += 1 + used;
                }
                b'a' if body.get(i + 1).is_none_or(|n| !n.is_ascii_lowercase()) => {
                    if !set(&mut atom.aromatic, true) {
                        return Err(conflict("aromaticity", i));
                    }
                    i += 1;
                }
                b'A' if body.get(i + 1).is_none_or(|n| !n.is_ascii_lowercase()) => {
                    if !set(&mut atom.aromatic, false) {
                        return Err(conflict("aromaticity", i));
                    }
                    i += 1;
                }
                b'A'..=b'Z' => {
                    let two = body
                        .get(i..i + 2)
                        .filter(|s| s[1].is_ascii_lowercase())
                        .and_then(|s| std::str::from_utf8(s).ok())
                        .and_then(element_from_symbol);
                    if let Some(z) = two {
                        if !set(&mut atom.element, z) || !set(&mut atom.aromatic, false) {
                            return Err(conflict("element", i));
                        }
                        i += 2;
                        continue;
                    }
                    match c {
                        b'H' | b'D' => {
                            let (n, used) = digits(&body[i + 1..]);
                            let v = if used == 0 { 1 } else { n as u8 };
                            let ok = if c == b'H' {
                                set(&mut atom.h_count, v)
                            } else {
                                set(&mut atom.degree, v)
                            };
                            if !ok {
                                return Err(conflict(if c == b'H' { "H count" } else { "degree" }, i));
                            }
                            i += 1 + used;
                        }
                        b'X' | b'R' | b'T' => {
                            return Err(unsupported(&(c as char).to_string(), i));
                        }
                        _ => {
                            let sym = (c as char).to_string();
                            let Some(z) = element_from_symbol(&sym) else {
                                return Err(unsupported(&sym, i));
                            };
                            if !set(&mut atom.element, z) || !set(&mut atom.aromatic, false) {
                                return Err(conflict("element", i));
                            }
                            i += 1;
                        }
                    }
                }
                b'a'..=b'z' => {
                    let (z, adv) = match (c, body.get(i + 1)) {
                        (b's', Some(b'e')) => (34, 2),
                        (b'a', Some(b's')) => (33, 2),
                        (b'b', _) => (5, 1),
                        (b'c', _) => (6, 1),
                        (b'n', _) => (7, 1),
                        (b'o', _) => (8, 1),
                        (b'p', _) => (15, 1),
                        (b's', _) => (16, 1),
                        _ => return Err(unsupported(&(c as char).to_string(), i)),
                    };
                    if !set(&mut atom.element, z) || !set(&mut atom.aromatic, true) {
                        return Err(conflict("element", i));
                    }
                    i += adv;
                }
                _ => return Err(unsupported(&(c as char).to_string(), i)),
            }
        }
        Ok(atom)
    }
}

fn digits(bytes: &[u8]) -> (u32, usize) {
    let used = bytes.iter().take_while(|c| c.is_ascii_digit()).count();
    let n = bytes[..used]
        .iter()
        .fold(0u32, |acc, &d| acc.saturating_mul(10).saturating_add((d - b'0') as u32));
    (n, used)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_paper_style_atoms() {
        let g = parse_pattern("[#7;a:5]:[c;H0;D3;+0:4]", 0).unwrap();
        assert_eq!(g.len(), 2);
        let n = &g.atoms()[0];
        assert_eq!((n.element, n.aromatic, n.map_id), (Some(7), Some(true), Some(5)));
        let c = &g.atoms()[1];
        assert_eq!(c.h_count, Some(0));
        assert_eq!(c.degree, Some(3));
        assert_eq!(c.charge, Some(0));
        assert!(c.fully_pinned());
        assert_eq!(g.bonds()[0].query, BondQuery::Aromatic);
    }

    #[test]
    fn juxtaposed_primitives() {
        let g = parse_pattern("[CH3:1][NH2+:2]", 0).unwrap();
        assert_eq!(g.atoms()[0].h_count, Some(3));
        assert_eq!(g.atoms()[1].charge, Some(1));
        assert_eq!(g.atoms()[1].h_count, Some(2));
        assert_eq!(g.bonds()[0].query, BondQuery::SingleOrAromatic);
    }

    #[test]
    fn unsupported_tokens_are_named() {
        for (text, tok) in [
            ("[C$(CO):1]", "$("),
            ("[C,N:1]", ","),
            ("[!C:1]", "!"),
            ("[CX4:1]", "X"),
            ("[C:1]~[O:2]", "~"),
            ("[C;R:1]", "R"),
        ] {
            match parse_pattern(text, 0) {
                Err(TemplateError::UnsupportedPrimitive { token, .. }) => assert_eq!(token, tok),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn conflicting_constraints() {
        assert!(matches!(
            parse_pattern("[C;a:1]", 0),
            Err(TemplateError::Syntax { .. })
        ));
        assert!(matches!(
            parse_pattern("[C;H1;H2:1]", 0),
            Err(TemplateError::Syntax { .. })
        ));
    }

    #[test]
    fn canonical_text_is_order_free() {
        let a = parse_pattern("[C:1]-[O:2]", 0).unwrap();
        let b = parse_pattern("[O:2]-[C:1]", 0).unwrap();
        assert_eq!(a.canonical_text(), b.canonical_text());
        let paper = parse_pattern("[#7;a:5]:[c;H0;D3;+0:4]", 0).unwrap();
        assert_eq!(paper.canonical_text(), "[c;H0;D3;+0:4]:[n:5]");
    }

    #[test]
    fn closes_under_reserialization() {
        for s in ["c1ccccc1[N;H2;D1;+0:1]", "[C:1](=[O:2])-[O;H1]", "[#15:1]", "[a:1]:[A:2]", "[*:3]"] {
            let once = parse_pattern(s, 0).unwrap().canonical_text();
            let twice = parse_pattern(&once, 0).unwrap().canonical_text();
            assert_eq!(once, twice, "{s}");
        }
    }
}
