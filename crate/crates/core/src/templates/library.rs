use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::extract::{extract_template, parse_mapped_reaction};
use super::{parse_template, Template, TemplateError, TemplateSource};

const LIBRARY_HEADER: [&str; 5] = ["id", "rule_text", "source", "enzyme_id", "support"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

fn join_lines(errs: &[LineError]) -> String {
    errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad header: expected {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("{} invalid line(s): {}", .0.len(), join_lines(.0))]
    Lines(Vec<LineError>),
}

fn tsv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

/// Dense, immutable set of templates indexed by canonical rule text.
#[derive(Debug, Clone)]
pub struct TemplateLibrary {
    templates: Vec<Template>,
    index: HashMap<String, usize>,
    checksum: [u8; 32],
}

impl TemplateLibrary {
    /// Ids are reassigned to positions. Duplicate canonical texts are
    /// rejected, each reported against the 1-based position of the repeat.
    pub fn new(mut templates: Vec<Template>) -> Result<Self, LibraryError> {
        let mut index = HashMap::new();
        let mut errs = Vec::new();
        for (i, t) in templates.iter_mut().enumerate() {
            t.id = i;
            if let Some(first) = index.insert(t.text().to_string(), i) {
                index.insert(t.text().to_string(), first);
                errs.push(LineError {
                    line: i + 1,
                    message: format!("duplicate of template {first}: {}", t.text()),
                });
            }
        }
        if !errs.is_empty() {
            return Err(LibraryError::Lines(errs));
        }
        let mut lib = TemplateLibrary {
            templates,
            index,
            checksum: [0; 32],
        };
        lib.checksum = Sha256::digest(lib.to_tsv().as_bytes()).into();
        Ok(lib)
    }

    /// Parse library TSV. Every bad row is reported, with file line numbers.
    pub fn parse_tsv(text: &str) -> Result<Self, LibraryError> {
        let mut rdr = tsv_reader(text);
        let header = rdr.headers().map_err(|e| io::Error::other(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != LIBRARY_HEADER {
            return Err(LibraryError::Header {
                expected: LIBRARY_HEADER.join("\t"),
                found: header.iter().collect::<Vec<_>>().join("\t"),
            });
        }
        let mut templates = Vec::new();
        let mut errs = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (row_index, rec) in rdr.records().enumerate() {
            let rec = match rec {
                Ok(r) => r,
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line() as usize);
                    errs.push(LineError {
                        line,
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let err = |message: String| LineError { line, message };
            if rec.len() != LIBRARY_HEADER.len() {
                errs.push(err(format!("expected 5 columns, found {}", rec.len())));
                continue;
            }
            let expected_id = row_index;
            let row = (|| {
                let id: usize = rec[0].parse().map_err(|_| format!("bad id {:?}", &rec[0]))?;
                let mut t = parse_template(&rec[1]).map_err(|e| e.to_string())?;
                t.source = TemplateSource::parse(&rec[2])
                    .ok_or_else(|| format!("source must be enz or syn, got {:?}", &rec[2]))?;
                t.enzyme = match &rec[3] {
                    "0" | "" => None,
                    e => Some(e.to_string()),
                };
                t.support = rec[4]
                    .parse()
                    .map_err(|_| format!("bad support {:?}", &rec[4]))?;
                t.id = id;
                Ok::<Template, String>(t)
            })();
            match row {
                Ok(t) => {
                    if t.id != expected_id {
                        errs.push(err(format!("id {} out of sequence, expected {expected_id}", t.id)));
                    } else if let Some(first) = seen.get(t.text()) {
                        errs.push(err(format!("duplicate rule, first seen on line {first}")));
                    } else {
                        seen.insert(t.text().to_string(), line);
                        templates.push(t);
                    }
                }
                Err(message) => errs.push(err(message)),
            }
        }
        if !errs.is_empty() {
            return Err(LibraryError::Lines(errs));
        }
        Self::new(templates)
    }

    pub fn load(path: &Path) -> Result<Self, LibraryError> {
        Self::parse_tsv(&fs::read_to_string(path)?)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = LIBRARY_HEADER.join("\t");
        s.push('\n');
        for t in &self.templates {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                t.id,
                t.text(),
                t.source,
                t.enzyme.as_deref().unwrap_or("0"),
                t.support
            ));
        }
        s
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_tsv())
    }

    /// SHA-256 of the canonical TSV serialization.
    pub fn checksum(&self) -> [u8; 32] {
        self.checksum
    }

    pub fn checksum_hex(&self) -> String {
        self.checksum.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn get(&self, id: usize) -> Option<&Template> {
        self.templates.get(id)
    }

    pub fn id_of(&self, rule_text: &str) -> Option<usize> {
        self.index.get(rule_text).copied()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// One row of an atom-mapped reaction file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactionRecord {
    pub line: usize,
    pub reaction_smiles: String,
    pub source: TemplateSource,
    pub enzyme: Option<String>,
}

/// Read reaction TSV with header `reaction_smiles  source` and an optional
/// third `enzyme_id` column.
pub fn read_reaction_tsv(path: &Path) -> Result<Vec<ReactionRecord>, LibraryError> {
    parse_reaction_tsv(&fs::read_to_string(path)?)
}

pub(crate) fn parse_reaction_tsv(text: &str) -> Result<Vec<ReactionRecord>, LibraryError> {
    let mut rdr = tsv_reader(text);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| io::Error::other(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let with_enzyme = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["reaction_smiles", "source"] => false,
        ["reaction_smiles", "source", "enzyme_id"] => true,
        _ => {
            return Err(LibraryError::Header {
                expected: "reaction_smiles\tsource[\tenzyme_id]".into(),
                found: header.join("\t"),
            })
        }
    };
    let mut out = Vec::new();
    let mut errs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| io::Error::other(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            errs.push(LineError {
                line,
                message: format!("expected {} columns, found {}", header.len(), rec.len()),
            });
            continue;
        }
        let Some(source) = TemplateSource::parse(&rec[1]) else {
            errs.push(LineError {
                line,
                message: format!("source must be enz or syn, got {:?}", &rec[1]),
            });
            continue;
        };
        let enzyme = if with_enzyme && !matches!(&rec[2], "0" | "") {
            Some(rec[2].to_string())
        } else {
            None
        };
        out.push(ReactionRecord {
            line,
            reaction_smiles: rec[0].to_string(),
            source,
            enzyme,
        });
    }
    if !errs.is_empty() {
        return Err(LibraryError::Lines(errs));
    }
    Ok(out)
}

/// Extract one template per reaction and merge identical rules, counting
/// support. Templates keep the metadata of their first occurrence. Rows
/// that fail extraction are returned with their line numbers.
pub fn extract_library(
    records: &[ReactionRecord],
    env_radius: usize,
) -> (TemplateLibrary, Vec<(usize, TemplateError)>) {
    let mut templates: Vec<Template> = Vec::new();
    let mut by_text: HashMap<String, usize> = HashMap::new();
    let mut rejects = Vec::new();
    for rec in records {
        let t = parse_mapped_reaction(&rec.reaction_smiles)
            .and_then(|rxn| extract_template(&rxn, env_radius));
        match t {
            Ok(mut t) => match by_text.get(t.text()) {
                Some(&i) => templates[i].support += 1,
                None => {
                    t.source = rec.source;
                    t.enzyme = rec.enzyme.clone();
                    t.support = 1;
                    by_text.insert(t.text().to_string(), templates.len());
                    templates.push(t);
                }
            },
            Err(e) => rejects.push((rec.line, e)),
        }
    }
    let lib = TemplateLibrary::new(templates).expect("texts are unique by construction");
    (lib, rejects)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIB: &str = "id\trule_text\tsource\tenzyme_id\tsupport\n\
        0\t[C:1][O:2][C:3]>>[C:1][O:2].[C:3]\tsyn\t0\t4\n\
        1\t[C:1]>>[C:1]\tenz\tEC1.1.1.1\t2\n";

    #[test]
    fn round_trip() {
        let lib = TemplateLibrary::parse_tsv(LIB).unwrap();
        assert_eq!(lib.len(), 2);
        assert_eq!(lib.get(1).unwrap().enzyme.as_deref(), Some("EC1.1.1.1"));
        assert_eq!(lib.get(0).unwrap().support, 4);
        let again = TemplateLibrary::parse_tsv(&lib.to_tsv()).unwrap();
        assert_eq!(again.checksum(), lib.checksum());
        assert_eq!(lib.id_of("[C:1]>>[C:1]"), Some(1));
    }

    #[test]
    fn reports_every_bad_line() {
        let text = "id\trule_text\tsource\tenzyme_id\tsupport\n\
            0\t[C$(CO):1]>>[C:1]\tsyn\t0\t1\n\
            1\t[C:1]>>[C:1]\tsyn\t0\t1\n\
            2\t[C:1]>>[C:1]\txyz\t0\t1\n\
            3\t[C,N:1]>>[C:1]\tsyn\t0\t1\n";
        match TemplateLibrary::parse_tsv(text) {
            Err(LibraryError::Lines(errs)) => {
                let lines: Vec<usize> = errs.iter().map(|e| e.line).collect();
                assert_eq!(lines, vec![2, 4, 5]);
                assert!(errs[0].message.contains("$("));
                assert!(errs[2].message.contains("','"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates() {
        let text = "id\trule_text\tsource\tenzyme_id\tsupport\n\
            0\t[C:1]>>[C:1]\tsyn\t0\t1\n\
            1\t[C:1]>>[C:1]\tsyn\t0\t1\n";
        assert!(matches!(
            TemplateLibrary::parse_tsv(text),
            Err(LibraryError::Lines(_))
        ));
    }

    #[test]
    fn bad_header() {
        assert!(matches!(
            TemplateLibrary::parse_tsv("a\tb\n"),
            Err(LibraryError::Header { .. })
        ));
    }

    #[test]
    fn extraction_merges_support() {
        let text = "reaction_smiles\tsource\n\
            [CH3:1][C:2](=[O:3])[OH:4].[OH:5][CH3:6]>>[CH3:1][C:2](=[O:3])[O:5][CH3:6]\tsyn\n\
            [CH3:11][C:12](=[O:13])[OH:14].[OH:15][CH3:16]>>[CH3:11][C:12](=[O:13])[O:15][CH3:16]\tsyn\n\
            [CH3:1][OH:2]>>[CH3:1][OH:2]\tsyn\n";
        let recs = parse_reaction_tsv(text).unwrap();
        let (lib, rejects) = extract_library(&recs, 1);
        assert_eq!(lib.len(), 1);
        assert_eq!(lib.get(0).unwrap().support, 2);
        assert_eq!(rejects.len(), 1);
        assert_eq!(rejects[0].0, 4);
    }
}
