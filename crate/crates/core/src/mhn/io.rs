//! Model file: magic "MHNP", u32 version, u32-length-prefixed JSON config,
//! 32-byte library checksum, u32 tensor count, then per tensor u32 rows,
//! u32 cols and row-major f64 values. All integers and floats little-endian.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::templates::TemplateLibrary;

use super::model::{template_inputs, Layout, PrioritizerModel};
use super::{MhnError, ModelConfig};

const MAGIC: &[u8; 4] = b"MHNP";
/// Bumped whenever the layout, fingerprint hashing or model math changes.
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn model_to_bytes(m: &PrioritizerModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    let cfg = serde_json::to_vec(&m.cfg).expect("config serializes");
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    out.extend_from_slice(&m.library_checksum);
    let tensors: Vec<&Array2<f64>> = m
        .params
        .iter()
        .chain([&m.running_mean, &m.running_var])
        .collect();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u32).to_le_bytes());
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_model(m: &PrioritizerModel, path: &Path) -> Result<(), MhnError> {
    fs::write(path, model_to_bytes(m))?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MhnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let Some(end) = end else {
            return Err(MhnError::CorruptFile(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        };
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, MhnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Load a model and bind it to `lib`, whose checksum must match the one
/// recorded at save time. The template cache is rebuilt.
pub fn model_from_bytes(data: &[u8], lib: &TemplateLibrary) -> Result<PrioritizerModel, MhnError> {
    let mut c = Cursor { data, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(MhnError::CorruptFile("bad magic".into()));
    }
    let version = c.u32()?;
    if version != MODEL_FORMAT_VERSION {
        return Err(MhnError::Version {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let n = c.u32()? as usize;
    let cfg: ModelConfig = serde_json::from_slice(c.take(n)?)
        .map_err(|e| MhnError::CorruptFile(format!("config block: {e}")))?;
    cfg.validate()
        .map_err(|e| MhnError::CorruptFile(format!("config block: {e}")))?;
    let checksum: [u8; 32] = c.take(32)?.try_into().unwrap();
    if checksum != lib.checksum() {
        return Err(MhnError::Checksum);
    }
    let layout = Layout::new(&cfg);
    let count = c.u32()? as usize;
    if count != layout.shapes.len() + 2 {
        return Err(MhnError::CorruptFile(format!("expected {} tensors, found {count}", layout.shapes.len() + 2)));
    }
    let d_mol = cfg.d_mol();
    let expected = layout.shapes.iter().copied().chain([(1, d_mol), (1, d_mol)]);
    let mut tensors = Vec::with_capacity(count);
    for (i, (r, cols)) in expected.enumerate() {
        let (fr, fc) = (c.u32()? as usize, c.u32()? as usize);
        if (fr, fc) != (r, cols) {
            return Err(MhnError::CorruptFile(format!(
                "tensor {i} has shape {fr}x{fc}, expected {r}x{cols}"
            )));
        }
        let bytes = c.take(r * cols * 8)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MhnError::CorruptFile(format!("tensor {i} has non-finite values")));
        }
        tensors.push(Array2::from_shape_vec((r, cols), values).expect("length checked"));
    }
    if c.pos != data.len() {
        return Err(MhnError::CorruptFile("trailing bytes".into()));
    }
    let running_var = tensors.pop().unwrap();
    let running_mean = tensors.pop().unwrap();
    let mut m = PrioritizerModel {
        template_inputs: template_inputs(&cfg, lib),
        cfg,
        layout,
        params: tensors,
        running_mean,
        running_var,
        library_checksum: checksum,
        cache: None,
    };
    m.build_cache();
    Ok(m)
}

pub fn load_model(path: &Path, lib: &TemplateLibrary) -> Result<PrioritizerModel, MhnError> {
    model_from_bytes(&fs::read(path)?, lib)
}
