use ndarray::{Array1, Array2, Axis};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chem::Fingerprint;
use crate::templates::{template_fingerprint, TemplateLibrary};

use super::config::{Activation, ModelConfig};
use super::MhnError;

const NORM_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

/// One training or evaluation input: the set bits of a molecule
/// fingerprint and the index of the template that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub bits: Vec<usize>,
    pub width: usize,
    pub template: usize,
}

impl Example {
    pub fn new(fp: &Fingerprint, template: usize) -> Self {
        Example {
            bits: fp.ones().collect(),
            width: fp.n_bits(),
            template,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerSpec {
    w: usize,
    b: Option<usize>,
    hidden: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    mol: Vec<LayerSpec>,
    temp: Vec<LayerSpec>,
    pub(crate) shapes: Vec<(usize, usize)>,
    pub(crate) names: Vec<String>,
    /// Whether weight decay applies (weights yes, biases no).
    pub(crate) decay: Vec<bool>,
}

impl Layout {
    pub(crate) fn new(cfg: &ModelConfig) -> Self {
        let mut l = Layout {
            mol: Vec::new(),
            temp: Vec::new(),
            shapes: Vec::new(),
            names: Vec::new(),
            decay: Vec::new(),
        };
        let push = |l: &mut Layout, name: String, shape: (usize, usize), decay: bool| {
            l.shapes.push(shape);
            l.names.push(name);
            l.decay.push(decay);
            l.shapes.len() - 1
        };
        let sides = [
            ("mol", cfg.fp_bits, cfg.d_mol(), cfg.mol_layers, "w_q"),
            ("temp", cfg.template_fp_bits, cfg.d_temp(), cfg.temp_layers, "w_k"),
        ];
        for (side, input, width, layers, proj) in sides {
            let mut specs = Vec::new();
            let mut fan_in = input;
            for k in 0..layers {
                let w = push(&mut l, format!("{side}.{k}.weight"), (fan_in, width), true);
                let b = push(&mut l, format!("{side}.{k}.bias"), (1, width), false);
                specs.push(LayerSpec {
                    w,
                    b: Some(b),
                    hidden: true,
                });
                fan_in = width;
            }
            let w = push(&mut l, proj.to_string(), (fan_in, cfg.d_assoc), true);
            specs.push(LayerSpec {
                w,
                b: None,
                hidden: false,
            });
            if side == "mol" {
                l.mol = specs;
            } else {
                l.temp = specs;
            }
        }
        l
    }

    pub(crate) fn param_count(&self) -> usize {
        self.shapes.iter().map(|(r, c)| r * c).sum()
    }
}

/// Hopfield-attention template prioritizer bound to one template library.
#[derive(Debug, Clone)]
pub struct PrioritizerModel {
    pub(crate) cfg: ModelConfig,
    pub(crate) layout: Layout,
    pub(crate) params: Vec<Array2<f64>>,
    /// BatchNorm running statistics, shape (1, d_mol).
    pub(crate) running_mean: Array2<f64>,
    pub(crate) running_var: Array2<f64>,
    pub(crate) template_inputs: Vec<Vec<usize>>,
    pub(crate) library_checksum: [u8; 32],
    pub(crate) cache: Option<Array2<f64>>,
}

/// Gradients aligned with `PrioritizerModel::params`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub tensors: Vec<Array2<f64>>,
    pub(crate) bn_batch: Option<(Array2<f64>, Array2<f64>)>,
}

pub(crate) fn template_inputs(cfg: &ModelConfig, lib: &TemplateLibrary) -> Vec<Vec<usize>> {
    lib.templates()
        .iter()
        .map(|t| template_fingerprint(t, cfg.template_fp_bits).ones().collect())
        .collect()
}

/// Xavier-uniform weights from `cfg.seed`, zero biases, cache unbuilt.
pub fn init_model(cfg: &ModelConfig, lib: &TemplateLibrary) -> Result<PrioritizerModel, MhnError> {
    cfg.validate()?;
    if lib.is_empty() {
        return Err(MhnError::Config("template library is empty".into()));
    }
    let layout = Layout::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = layout
        .shapes
        .iter()
        .zip(&layout.decay)
        .map(|(&(r, c), &is_weight)| {
            if !is_weight {
                return Array2::zeros((r, c));
            }
            let bound = (6.0 / (r + c) as f64).sqrt();
            Array2::from_shape_simple_fn((r, c), || rng.random_range(-bound..=bound))
        })
        .collect();
    let d_mol = cfg.d_mol();
    Ok(PrioritizerModel {
        cfg: cfg.clone(),
        layout,
        params,
        running_mean: Array2::zeros((1, d_mol)),
        running_var: Array2::ones((1, d_mol)),
        template_inputs: template_inputs(cfg, lib),
        library_checksum: lib.checksum(),
        cache: None,
    })
}

#[derive(Default)]
struct ChainTrace {
    /// Dense input of each layer; `None` for the sparse first layer.
    inputs: Vec<Option<Array2<f64>>>,
    /// Combined ReLU and dropout gate of each hidden layer.
    gates: Vec<Option<Array2<f64>>>,
    bn: Option<BnTrace>,
    /// Output of the association activation, before layer norm.
    act: Array2<f64>,
    /// Layer-normalized output and per-row inverse std.
    ln: Option<(Array2<f64>, Array1<f64>)>,
}

struct BnTrace {
    xhat: Array2<f64>,
    invstd: Array1<f64>,
    mean: Array2<f64>,
    var: Array2<f64>,
}

fn sparse_dot(rows: &[Vec<usize>], w: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), w.ncols()));
    for (i, bits) in rows.iter().enumerate() {
        let mut row = out.row_mut(i);
        for &j in bits {
            row += &w.row(j);
        }
    }
    out
}

fn layer_norm(x: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let d = x.ncols() as f64;
    let mut y = x.clone();
    let mut inv = Array1::zeros(x.nrows());
    for (i, mut row) in y.rows_mut().into_iter().enumerate() {
        let mean = row.sum() / d;
        row -= mean;
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        let s = 1.0 / (var + NORM_EPS).sqrt();
        row *= s;
        inv[i] = s;
    }
    (y, inv)
}

fn layer_norm_backward(dy: &Array2<f64>, y: &Array2<f64>, inv: &Array1<f64>) -> Array2<f64> {
    let d = y.ncols() as f64;
    let mut dx = dy.clone();
    for i in 0..y.nrows() {
        let (yr, dyr) = (y.row(i), dy.row(i));
        let mean_dy = dyr.sum() / d;
        let mean_dyy = dyr.dot(&yr) / d;
        let mut out = dx.row_mut(i);
        out.zip_mut_with(&yr, |g, &yv| *g = inv[i] * (*g - mean_dy - yv * mean_dyy));
    }
    dx
}

/// Row-wise log-softmax.
fn log_softmax(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row -= lse;
    }
    out
}

enum Mode<'a> {
    Eval,
    /// Batch statistics for BatchNorm; dropout when an RNG is given.
    Train(Option<&'a mut ChaCha8Rng>),
}

impl PrioritizerModel {
    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Number of templates K of the bound library.
    pub fn n_templates(&self) -> usize {
        self.template_inputs.len()
    }

    pub fn library_checksum(&self) -> [u8; 32] {
        self.library_checksum
    }

    pub fn params(&self) -> &[Array2<f64>] {
        &self.params
    }

    /// Mutable parameters; invalidates the template cache.
    pub fn params_mut(&mut self) -> &mut [Array2<f64>] {
        self.cache = None;
        &mut self.params
    }

    pub fn parameter_names(&self) -> &[String] {
        &self.layout.names
    }

    pub fn parameter_count(&self) -> usize {
        self.layout.param_count()
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<(), MhnError> {
        let mut cfg = self.cfg.clone();
        cfg.beta = beta;
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }

    pub fn cache_built(&self) -> bool {
        self.cache.is_some()
    }

    /// Encode every template into the associative space.
    pub fn build_cache(&mut self) {
        let (x, _) = self.side_forward(false, &self.template_inputs, Mode::Eval);
        self.cache = Some(x);
    }

    fn side_forward(&self, mol: bool, rows: &[Vec<usize>], mut mode: Mode) -> (Array2<f64>, ChainTrace) {
        let specs = if mol { &self.layout.mol } else { &self.layout.temp };
        let last = specs.len() - 1;
        let use_bn = mol && self.cfg.input_norm;
        let mut trace = ChainTrace::default();
        let mut x: Option<Array2<f64>> = None;
        let mut out = Array2::zeros((0, 0));
        for (l, spec) in specs.iter().enumerate() {
            if l == last && use_bn {
                let input = x.take().expect("input_norm needs a hidden layer");
                let (y, bn) = self.batch_norm(&input, &mode);
                trace.bn = bn;
                x = Some(y);
            }
            let w = &self.params[spec.w];
            let mut z = match &x {
                None => sparse_dot(rows, w),
                Some(d) => d.dot(w),
            };
            trace.inputs.push(x.take());
            if let Some(b) = spec.b {
                z += &self.params[b];
            }
            if spec.hidden {
                let p = self.cfg.dropout;
                let mut gate = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                if let Mode::Train(Some(rng)) = &mut mode {
                    if p > 0.0 {
                        let keep = 1.0 / (1.0 - p);
                        gate.mapv_inplace(|g| if rng.random::<f64>() < p { 0.0 } else { g * keep });
                    }
                }
                z *= &gate;
                trace.gates.push(Some(gate));
                x = Some(z);
            } else {
                trace.gates.push(None);
                out = z;
            }
        }
        if self.cfg.association_activation == Activation::Tanh {
            out.mapv_inplace(f64::tanh);
        }
        trace.act = out.clone();
        if self.cfg.association_norm {
            let (y, inv) = layer_norm(&out);
            trace.ln = Some((y.clone(), inv));
            out = y;
        }
        (out, trace)
    }

    fn batch_norm(&self, x: &Array2<f64>, mode: &Mode) -> (Array2<f64>, Option<BnTrace>) {
        match mode {
            Mode::Eval => {
                let inv = self.running_var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
                ((x - &self.running_mean) * &inv, None)
            }
            Mode::Train(_) => {
                let n = x.nrows() as f64;
                let mean = x.sum_axis(Axis(0)).insert_axis(Axis(0)) / n;
                let centered = x - &mean;
                let var = centered.mapv(|v| v * v).sum_axis(Axis(0)).insert_axis(Axis(0)) / n;
                let invstd = var.row(0).mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
                let xhat = &centered * &invstd.view().insert_axis(Axis(0));
                (
                    xhat.clone(),
                    Some(BnTrace {
                        xhat,
                        invstd,
                        mean,
                        var,
                    }),
                )
            }
        }
    }

    fn side_backward(&self, mol: bool, rows: &[Vec<usize>], trace: &ChainTrace, dy: Array2<f64>, grads: &mut [Array2<f64>]) {
        let specs = if mol { &self.layout.mol } else { &self.layout.temp };
        let last = specs.len() - 1;
        let mut d = match &trace.ln {
            Some((y, inv)) => layer_norm_backward(&dy, y, inv),
            None => dy,
        };
        if self.cfg.association_activation == Activation::Tanh {
            d.zip_mut_with(&trace.act, |g, &a| *g *= 1.0 - a * a);
        }
        for l in (0..specs.len()).rev() {
            let spec = &specs[l];
            match &trace.inputs[l] {
                Some(x) => grads[spec.w] += &x.t().dot(&d),
                None => {
                    let g = &mut grads[spec.w];
                    for (i, bits) in rows.iter().enumerate() {
                        let drow = d.row(i);
                        for &j in bits {
                            let mut gr = g.row_mut(j);
                            gr += &drow;
                        }
                    }
                }
            }
            if let Some(b) = spec.b {
                grads[b] += &d.sum_axis(Axis(0)).insert_axis(Axis(0));
            }
            if l == 0 {
                break;
            }
            let mut dx = d.dot(&self.params[spec.w].t());
            if l == last {
                if let Some(bn) = &trace.bn {
                    dx = bn_backward(&dx, bn);
                }
            }
            let gate = trace.gates[l - 1].as_ref().expect("earlier layers are hidden");
            dx *= gate;
            d = dx;
        }
    }

    pub(crate) fn check_examples(&self, batch: &[Example]) -> Result<(), MhnError> {
        if batch.is_empty() {
            return Err(MhnError::EmptyBatch);
        }
        let k = self.n_templates();
        for e in batch {
            if e.width != self.cfg.fp_bits {
                return Err(MhnError::Shape {
                    expected: self.cfg.fp_bits,
                    found: e.width,
                });
            }
            if e.template >= k {
                return Err(MhnError::IdOutOfRange { id: e.template, k });
            }
        }
        Ok(())
    }

    /// Mean negative log-likelihood of the batch and exact gradients of it
    /// with respect to every parameter. BatchNorm uses batch statistics and
    /// dropout is off.
    pub fn loss_and_gradients(&self, batch: &[Example]) -> Result<(f64, Gradients), MhnError> {
        self.check_examples(batch)?;
        Ok(self.loss_and_gradients_with(batch, None))
    }

    pub(crate) fn loss_and_gradients_with(&self, batch: &[Example], rng: Option<&mut ChaCha8Rng>) -> (f64, Gradients) {
        let rows: Vec<Vec<usize>> = batch.iter().map(|e| e.bits.clone()).collect();
        // Separate RNG streams keep the masks independent of K.
        let (mut r1, mut r2) = match rng {
            Some(r) => (
                Some(ChaCha8Rng::seed_from_u64(r.random())),
                Some(ChaCha8Rng::seed_from_u64(r.random())),
            ),
            None => (None, None),
        };
        let (xi, mol_trace) = self.side_forward(true, &rows, Mode::Train(r1.as_mut()));
        let (x, temp_trace) = self.side_forward(false, &self.template_inputs, Mode::Train(r2.as_mut()));
        let beta = self.cfg.beta;
        let depth = self.cfg.hopfield_depth;
        let b = batch.len() as f64;

        let mut states = vec![xi];
        let mut probs: Vec<Array2<f64>> = Vec::with_capacity(depth);
        let mut final_logp = Array2::zeros((0, 0));
        for step in 0..depth {
            let z = states[step].dot(&x.t()) * beta;
            let logp = log_softmax(&z);
            let p = logp.mapv(f64::exp);
            if step + 1 < depth {
                states.push(p.dot(&x));
            } else {
                final_logp = logp;
            }
            probs.push(p);
        }
        let loss = -batch
            .iter()
            .enumerate()
            .map(|(i, e)| final_logp[[i, e.template]])
            .sum::<f64>()
            / b;

        let mut grads: Vec<Array2<f64>> = self.params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        let mut dz = probs[depth - 1].clone();
        for (i, e) in batch.iter().enumerate() {
            dz[[i, e.template]] -= 1.0;
        }
        dz /= b;
        let mut dx = Array2::<f64>::zeros(x.raw_dim());
        let mut dstate = Array2::zeros((0, 0));
        for step in (0..depth).rev() {
            dstate = dz.dot(&x) * beta;
            dx += &(dz.t().dot(&states[step]) * beta);
            if step == 0 {
                break;
            }
            // states[step] = probs[step - 1] X
            let p = &probs[step - 1];
            let dp = dstate.dot(&x.t());
            dx += &p.t().dot(&dstate);
            let inner = (&dp * p).sum_axis(Axis(1)).insert_axis(Axis(1));
            dz = p * &(&dp - &inner);
        }
        self.side_backward(true, &rows, &mol_trace, dstate, &mut grads);
        self.side_backward(false, &self.template_inputs, &temp_trace, dx, &mut grads);
        let bn_batch = mol_trace.bn.map(|t| (t.mean, t.var));
        (loss, Gradients { tensors: grads, bn_batch })
    }

    pub(crate) fn update_running_stats(&mut self, g: &Gradients) {
        if let Some((mean, var)) = &g.bn_batch {
            self.running_mean = &self.running_mean * (1.0 - BN_MOMENTUM) + mean * BN_MOMENTUM;
            self.running_var = &self.running_var * (1.0 - BN_MOMENTUM) + var * BN_MOMENTUM;
        }
    }

    /// Template probabilities for a batch of molecules, rows aligned with
    /// the input.
    pub fn forward_batch(&self, fps: &[&Fingerprint]) -> Result<Array2<f64>, MhnError> {
        let x = self.cache.as_ref().ok_or(MhnError::CacheNotBuilt)?;
        for fp in fps {
            if fp.n_bits() != self.cfg.fp_bits {
                return Err(MhnError::Shape {
                    expected: self.cfg.fp_bits,
                    found: fp.n_bits(),
                });
            }
        }
        let rows: Vec<Vec<usize>> = fps.iter().map(|f| f.ones().collect()).collect();
        Ok(self.retrieve(&rows, x))
    }

    pub(crate) fn retrieve(&self, rows: &[Vec<usize>], x: &Array2<f64>) -> Array2<f64> {
        let (mut state, _) = self.side_forward(true, rows, Mode::Eval);
        let mut p = Array2::zeros((0, 0));
        for step in 0..self.cfg.hopfield_depth {
            p = log_softmax(&(state.dot(&x.t()) * self.cfg.beta)).mapv(f64::exp);
            if step + 1 < self.cfg.hopfield_depth {
                state = p.dot(x);
            }
        }
        p
    }

    /// Probability over the K templates for one molecule fingerprint.
    pub fn forward(&self, fp: &Fingerprint) -> Result<Vec<f64>, MhnError> {
        Ok(self.forward_batch(&[fp])?.row(0).to_vec())
    }
}

fn bn_backward(dy: &Array2<f64>, t: &BnTrace) -> Array2<f64> {
    let n = dy.nrows() as f64;
    let sum_dy = dy.sum_axis(Axis(0));
    let sum_dy_xhat = (dy * &t.xhat).sum_axis(Axis(0));
    let mut dx = dy * n;
    dx -= &sum_dy.view().insert_axis(Axis(0));
    dx -= &(&t.xhat * &sum_dy_xhat.view().insert_axis(Axis(0)));
    dx * &(&t.invstd / n).view().insert_axis(Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{fingerprint, parse_smiles};
    use crate::templates::{parse_template, Template};

    fn lib(rules: &[&str]) -> TemplateLibrary {
        TemplateLibrary::new(rules.iter().map(|r| parse_template(r).unwrap()).collect::<Vec<Template>>()).unwrap()
    }

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            fp_bits: 64,
            template_fp_bits: 64,
            d_assoc: 8,
            ..Default::default()
        }
    }

    #[test]
    fn xavier_bound_and_determinism() {
        let l = lib(&["[C:1]>>[C:1]"]);
        let cfg = ModelConfig {
            fp_bits: 128,
            template_fp_bits: 128,
            d_assoc: 100,
            mol_layers: 0,
            ..Default::default()
        };
        let a = init_model(&cfg, &l).unwrap();
        let b = init_model(&cfg, &l).unwrap();
        assert_eq!(a.params, b.params);
        let bound = (6.0f64 / 228.0).sqrt();
        assert!(a.params[0].iter().all(|w| w.abs() <= bound));
        let bad = ModelConfig { d_assoc: 0, ..cfg };
        assert!(matches!(init_model(&bad, &l), Err(MhnError::Config(_))));
    }

    #[test]
    fn single_template_is_certain() {
        let mut m = init_model(&small_cfg(), &lib(&["[C:1]>>[C:1]"])).unwrap();
        m.build_cache();
        let fp = fingerprint(&parse_smiles("CCO").unwrap(), 2, 64);
        assert_eq!(m.forward(&fp).unwrap(), vec![1.0]);
        let (loss, g) = m.loss_and_gradients(&[Example::new(&fp, 0)]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.tensors.iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn identical_encodings_split_evenly() {
        let mut m = init_model(&small_cfg(), &lib(&["[C:1]>>[C:1]", "[C:2]>>[C:2]"])).unwrap();
        m.build_cache();
        let fp = fingerprint(&parse_smiles("CCO").unwrap(), 2, 64);
        let p = m.forward(&fp).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-9 && (p[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn width_mismatch() {
        let mut m = init_model(&small_cfg(), &lib(&["[C:1]>>[C:1]"])).unwrap();
        m.build_cache();
        let fp = fingerprint(&parse_smiles("C").unwrap(), 2, 128);
        assert!(matches!(m.forward(&fp), Err(MhnError::Shape { .. })));
    }
}
