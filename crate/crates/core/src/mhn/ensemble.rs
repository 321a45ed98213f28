use rayon::prelude::*;

use crate::chem::{fingerprint, Fingerprint, Molecule};
use crate::templates::{Template, TemplateLibrary};

use super::model::PrioritizerModel;
use super::MhnError;

/// True unless the molecule provably lacks an atom environment the
/// template's product pattern requires. Never false for an applicable
/// template.
pub fn substructure_screen(mol_fp: &Fingerprint, t: &Template) -> bool {
    t.screen_bits(mol_fp.n_bits()).is_subset_of(mol_fp)
}

/// Prioritizers sharing one template library; scores are collated by max.
#[derive(Debug, Clone)]
pub struct Ensemble {
    models: Vec<PrioritizerModel>,
    screens: Vec<Fingerprint>,
}

impl Ensemble {
    /// Template caches are built for members that lack one.
    pub fn new(mut models: Vec<PrioritizerModel>, lib: &TemplateLibrary) -> Result<Self, MhnError> {
        let Some(first) = models.first() else {
            return Err(MhnError::EmptyEnsemble);
        };
        let width = first.config().fp_bits;
        for m in &mut models {
            if m.library_checksum() != lib.checksum() || m.n_templates() != lib.len() {
                return Err(MhnError::Checksum);
            }
            if !m.cache_built() {
                m.build_cache();
            }
        }
        let screens = lib.templates().iter().map(|t| t.screen_bits(width)).collect();
        Ok(Ensemble { models, screens })
    }

    pub fn models(&self) -> &[PrioritizerModel] {
        &self.models
    }

    pub fn n_templates(&self) -> usize {
        self.screens.len()
    }

    /// Multiply every member's beta by `c` (> 0).
    pub fn scale_beta(&mut self, c: f64) -> Result<(), MhnError> {
        for m in &mut self.models {
            let b = m.config().beta * c;
            m.set_beta(b)?;
        }
        Ok(())
    }

    /// Collated score of every template: the maximum member probability.
    pub fn scores(&self, m: &Molecule) -> Vec<f64> {
        let per_model: Vec<Vec<f64>> = self
            .models
            .par_iter()
            .map(|model| {
                let cfg = model.config();
                let fp = fingerprint(m, cfg.fp_radius, cfg.fp_bits);
                model.forward(&fp).expect("cache built and width from config")
            })
            .collect();
        let mut best = per_model[0].clone();
        for p in &per_model[1..] {
            for (b, &v) in best.iter_mut().zip(p) {
                *b = b.max(v);
            }
        }
        best
    }

    fn screen_passes(&self, m: &Molecule) -> Vec<bool> {
        let cfg = self.models[0].config();
        let fp = fingerprint(m, 0, cfg.fp_bits);
        self.screens.iter().map(|s| s.is_subset_of(&fp)).collect()
    }
}

/// Templates ranked by collated score, descending, ties by ascending id.
/// With `screen`, templates failing the substructure screen are removed
/// before truncation to `top_n`.
pub fn rank_templates(e: &Ensemble, m: &Molecule, top_n: usize, screen: bool) -> Vec<(usize, f64)> {
    let scores = e.scores(m);
    let pass = if screen { Some(e.screen_passes(m)) } else { None };
    let mut ranked: Vec<(usize, f64)> = scores
        .into_iter()
        .enumerate()
        .filter(|&(i, _)| pass.as_ref().is_none_or(|p| p[i]))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(top_n);
    ranked
}
