use serde::{Deserialize, Serialize};

use super::MhnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

/// Hyperparameters of one prioritizer. Defaults follow the enzymatic
/// optimum where one is published and desk-scale sizes elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Molecule fingerprint width.
    pub fp_bits: usize,
    pub fp_radius: usize,
    /// Template fingerprint width.
    pub template_fp_bits: usize,
    pub d_assoc: usize,
    /// Molecule encoder width; `None` means `d_assoc`.
    pub d_mol: Option<usize>,
    /// Template encoder width; `None` means `d_assoc`.
    pub d_temp: Option<usize>,
    pub mol_layers: usize,
    pub temp_layers: usize,
    pub beta: f64,
    /// Number of Hopfield retrieval steps.
    pub hopfield_depth: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub concat_rand_template_threshold: u32,
    /// Probability of dropping each set bit in an augmentation copy.
    pub augment_bit_drop: f64,
    pub association_activation: Activation,
    /// Batch normalization of the molecule encoder output.
    pub input_norm: bool,
    /// Layer normalization of both projected spaces.
    pub association_norm: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            fp_bits: 4096,
            fp_radius: 2,
            template_fp_bits: 4096,
            d_assoc: 512,
            d_mol: None,
            d_temp: None,
            mol_layers: 1,
            temp_layers: 2,
            beta: 0.035,
            hopfield_depth: 1,
            dropout: 0.01,
            lr: 1e-4,
            weight_decay: 1e-4,
            epochs: 11,
            batch_size: 32,
            concat_rand_template_threshold: 3,
            augment_bit_drop: 0.1,
            association_activation: Activation::Tanh,
            input_norm: false,
            association_norm: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn d_mol(&self) -> usize {
        self.d_mol.unwrap_or(self.d_assoc)
    }

    pub fn d_temp(&self) -> usize {
        self.d_temp.unwrap_or(self.d_assoc)
    }

    pub fn validate(&self) -> Result<(), MhnError> {
        let bad = |m: &str| Err(MhnError::Config(m.to_string()));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive and finite");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.d_assoc == 0 || self.d_mol() == 0 || self.d_temp() == 0 {
            return bad("dimensions must be at least 1");
        }
        if !self.fp_bits.is_power_of_two() || !self.template_fp_bits.is_power_of_two() {
            return bad("fingerprint widths must be powers of two");
        }
        if self.hopfield_depth == 0 {
            return bad("hopfield_depth must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0) {
            return bad("lr and weight_decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.augment_bit_drop) {
            return bad("augment_bit_drop must lie in [0, 1)");
        }
        if self.input_norm && self.mol_layers == 0 {
            return bad("input_norm needs at least one molecule encoder layer");
        }
        Ok(())
    }
}
