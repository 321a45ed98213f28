//! Deterministic generator for the bundled atom-mapped reaction fixture.
//!
//! Building blocks mark their reactive atom with map 1 and an optional
//! leaving atom with map 2. A partner without a leaving atom gives up one
//! hydrogen on its reactive atom.

use mhnpath::chem::{parse_smiles, write_canonical_smiles, Atom, Bond, BondOrder, Molecule};

struct Class {
    name: &'static str,
    first: &'static [&'static str],
    second: &'static [&'static str],
    count: usize,
}

const CLASSES: &[Class] = &[
    Class {
        name: "amide",
        first: &[
            "C[C:1](=O)[Cl:2]",
            "c1ccccc1[C:1](=O)[Cl:2]",
            "CC(C)[C:1](=O)[Cl:2]",
            "COc1ccc(cc1)[C:1](=O)[Cl:2]",
            "C1CC1[C:1](=O)[Cl:2]",
        ],
        second: &["C[NH2:1]", "CC[NH2:1]", "c1ccccc1[NH2:1]", "C1CCCCC1[NH2:1]", "C[NH:1]C"],
        count: 20,
    },
    Class {
        name: "ester",
        first: &[
            "C[C:1](=O)[OH:2]",
            "c1ccccc1[C:1](=O)[OH:2]",
            "CCC[C:1](=O)[OH:2]",
            "Cc1ccc(cc1)[C:1](=O)[OH:2]",
        ],
        second: &["C[OH:1]", "CC[OH:1]", "CC(C)[OH:1]", "c1ccccc1C[OH:1]", "C1CCCC1[OH:1]"],
        count: 16,
    },
    Class {
        name: "williamson",
        first: &[
            "C[CH2:1][Br:2]",
            "c1ccccc1[CH2:1][Br:2]",
            "CCC[CH2:1][Br:2]",
            "C=C[CH2:1][Br:2]",
            "[CH3:1][Br:2]",
        ],
        second: &[
            "c1ccc(cc1)[OH:1]",
            "Cc1ccc(cc1)[OH:1]",
            "Clc1ccc(cc1)[OH:1]",
            "COc1ccc(cc1)[OH:1]",
        ],
        count: 16,
    },
    Class {
        name: "n_alkylation",
        first: &[
            "C[CH2:1][Br:2]",
            "c1ccccc1[CH2:1][Br:2]",
            "CC(C)[CH2:1][Br:2]",
            "C#C[CH2:1][Br:2]",
            "[CH3:1][I:2]",
        ],
        second: &["C1CC[NH:1]CC1", "C1COCC[NH:1]1", "c1ccccc1[NH2:1]", "C[NH:1]C"],
        count: 16,
    },
    Class {
        name: "suzuki",
        first: &[
            "[Br:2][c:1]1ccccc1",
            "[Br:2][c:1]1ccc(C)cc1",
            "[Br:2][c:1]1ccc(OC)cc1",
            "[Br:2][c:1]1ccncc1",
            "[Br:2][c:1]1cccs1",
        ],
        second: &[
            "O[B:2](O)[c:1]1ccccc1",
            "O[B:2](O)[c:1]1ccc(F)cc1",
            "O[B:2](O)[c:1]1ccc(C)cc1",
            "O[B:2](O)[c:1]1cccc(Cl)c1",
        ],
        count: 16,
    },
    Class {
        name: "sulfonamide",
        first: &[
            "Cc1ccc(cc1)[S:1](=O)(=O)[Cl:2]",
            "C[S:1](=O)(=O)[Cl:2]",
            "c1ccccc1[S:1](=O)(=O)[Cl:2]",
            "CC[S:1](=O)(=O)[Cl:2]",
        ],
        second: &["C[NH2:1]", "CC[NH2:1]", "c1ccccc1[NH2:1]", "C1CCCCC1[NH2:1]", "C1CC[NH:1]CC1"],
        count: 16,
    },
];

struct Partner {
    mol: Molecule,
    reactive: usize,
    leaving: Vec<bool>,
}

fn partner(smiles: &str) -> Partner {
    let mol = parse_smiles(smiles).expect("building block parses");
    let find = |k| mol.atoms().iter().position(|a| a.map_id == Some(k));
    let reactive = find(1).expect("reactive atom");
    let mut leaving = vec![false; mol.atom_count()];
    if let Some(l) = find(2) {
        leaving[l] = true;
        let mut stack = vec![l];
        while let Some(u) = stack.pop() {
            for &(v, _) in mol.neighbors(u) {
                if v != reactive && !leaving[v] {
                    leaving[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    Partner {
        mol,
        reactive,
        leaving,
    }
}

fn couple(a: &Partner, b: &Partner) -> String {
    let mut next = 1u32;
    let mut renumber = |m: &Molecule| {
        let atoms: Vec<Atom> = m
            .atoms()
            .iter()
            .map(|x| {
                let mut x = x.clone();
                x.map_id = Some(next);
                next += 1;
                x
            })
            .collect();
        Molecule::from_parts(atoms, m.bonds().to_vec(), "").unwrap()
    };
    let ma = renumber(&a.mol);
    let mb = renumber(&b.mol);

    let mut atoms = Vec::new();
    let mut bonds = Vec::new();
    let mut index = Vec::new();
    for (p, m) in [(a, &ma), (b, &mb)] {
        let mut pos = vec![usize::MAX; m.atom_count()];
        for i in 0..m.atom_count() {
            if p.leaving[i] {
                continue;
            }
            pos[i] = atoms.len();
            let mut atom = m.atom(i).clone();
            if i == p.reactive && !p.leaving.iter().any(|&x| x) {
                atom.hydrogens -= 1;
            }
            atoms.push(atom);
        }
        for bd in m.bonds() {
            if pos[bd.a] != usize::MAX && pos[bd.b] != usize::MAX {
                bonds.push(Bond {
                    a: pos[bd.a],
                    b: pos[bd.b],
                    order: bd.order,
                });
            }
        }
        index.push(pos[p.reactive]);
    }
    bonds.push(Bond {
        a: index[0],
        b: index[1],
        order: BondOrder::Single,
    });
    let product = Molecule::from_parts(atoms, bonds, "").unwrap();
    assert!(product.valence_ok());
    format!(
        "{}.{}>>{}",
        write_canonical_smiles(&ma),
        write_canonical_smiles(&mb),
        write_canonical_smiles(&product)
    )
}

/// The fixture file contents: header plus 100 mapped reactions.
pub fn reaction_fixture() -> String {
    let mut out = String::from("reaction_smiles\tsource\n");
    for class in CLASSES {
        let mut produced = 0;
        'outer: for (i, a) in class.first.iter().enumerate() {
            for j in 0..class.second.len() {
                if produced == class.count {
                    break 'outer;
                }
                // Rotate partners so each first block meets varied seconds.
                let b = class.second[(i + j) % class.second.len()];
                out.push_str(&couple(&partner(a), &partner(b)));
                out.push_str("\tsyn\n");
                produced += 1;
            }
        }
        assert_eq!(produced, class.count, "{}", class.name);
    }
    out
}
