use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use super::{parse_smiles, Molecule, SmilesError};

#[derive(Debug, Error)]
pub enum MoleculeListError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: SmilesError,
    },
}

/// Read a molecule list: one SMILES per line, blank lines and `#` comments
/// ignored. Anything after the first whitespace on a line is ignored.
pub fn read_molecule_list(path: &Path) -> Result<Vec<Molecule>, MoleculeListError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let smiles = line.split_whitespace().next().unwrap_or(line);
        out.push(parse_smiles(smiles).map_err(|source| MoleculeListError::Parse {
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

pub fn write_molecule_list<'a>(
    path: &Path,
    smiles: impl IntoIterator<Item = &'a str>,
    header: Option<&str>,
) -> io::Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    if let Some(h) = header {
        for line in h.lines() {
            writeln!(f, "# {line}")?;
        }
    }
    for s in smiles {
        writeln!(f, "{s}")?;
    }
    f.flush()
}
