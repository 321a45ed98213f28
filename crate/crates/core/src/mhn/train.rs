use std::fmt::Write as _;
use std::io;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chem::{fingerprint, parse_smiles};
use crate::templates::TemplateLibrary;

use super::model::{Example, PrioritizerModel};
use super::{MhnError, ModelConfig};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Adaptive-moment optimizer with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    lr: f64,
    weight_decay: f64,
    step: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(model: &PrioritizerModel, lr: f64, weight_decay: f64) -> Self {
        let zeros = || model.params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        AdamW {
            lr,
            weight_decay,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update. Decay applies to weights only, never to biases.
    pub fn step(&mut self, model: &mut PrioritizerModel, grads: &[Array2<f64>]) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        let (lr, wd) = (self.lr, self.weight_decay);
        for (i, g) in grads.iter().enumerate() {
            let decay = if model.layout.decay[i] { wd } else { 0.0 };
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::Zip::from(&mut model.params[i])
                .and(m)
                .and(v)
                .and(g)
                .for_each(|w, m, v, &g| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let update = (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                    *w -= lr * (update + decay * *w);
                });
        }
        model.cache = None;
    }
}

/// Train/validation/test examples.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

impl Dataset {
    /// Random 80:10:10 split from `seed`.
    pub fn split(examples: Vec<Example>, seed: u64) -> Self {
        let [train, val, test] = split_indices(examples.len(), seed);
        let pick = |ids: Vec<usize>| ids.into_iter().map(|i| examples[i].clone()).collect();
        Dataset {
            train: pick(train),
            val: pick(val),
            test: pick(test),
        }
    }
}

/// Train, validation and test positions of an 80:10:10 split of `n` items.
/// `Dataset::split` uses the same partition.
pub fn split_indices(n: usize, seed: u64) -> [Vec<usize>; 3] {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * 8 / 10;
    let n_val = n / 10;
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    [idx, val, test]
}

/// Read a `product_smiles  template_id` TSV and fingerprint each product.
pub fn read_training_tsv(path: &Path, cfg: &ModelConfig, k: usize) -> Result<Vec<Example>, MhnError> {
    let text = std::fs::read_to_string(path)?;
    parse_training_tsv(&text, cfg, k)
}

pub fn parse_training_tsv(text: &str, cfg: &ModelConfig, k: usize) -> Result<Vec<Example>, MhnError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| io::Error::other(e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["product_smiles", "template_id"] {
        return Err(MhnError::Dataset("header must be product_smiles\\ttemplate_id".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| MhnError::Dataset(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |m: String| MhnError::Dataset(format!("line {line}: {m}"));
        if rec.len() != 2 {
            return Err(bad("expected 2 columns".into()));
        }
        let m = parse_smiles(&rec[0]).map_err(|e| bad(e.to_string()))?;
        let id: usize = rec[1].parse().map_err(|_| bad(format!("bad template id {:?}", &rec[1])))?;
        if id >= k {
            return Err(MhnError::IdOutOfRange { id, k });
        }
        out.push(Example::new(&fingerprint(&m, cfg.fp_radius, cfg.fp_bits), id));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_top1: f64,
    pub val_top100: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    /// CSV with header epoch,train_loss,val_loss,val_top1,val_top100.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_top1,val_top100\n");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                e.epoch, e.train_loss, e.val_loss, e.val_top1, e.val_top100
            );
        }
        s
    }
}

/// Loss and top-k accuracies of a built model on `examples`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub top1: f64,
    pub top100: f64,
}

pub fn evaluate(model: &PrioritizerModel, examples: &[Example]) -> Result<Evaluation, MhnError> {
    if examples.is_empty() {
        return Ok(Evaluation {
            loss: f64::NAN,
            top1: f64::NAN,
            top100: f64::NAN,
        });
    }
    let x = model.cache.as_ref().ok_or(MhnError::CacheNotBuilt)?;
    let mut loss = 0.0;
    let (mut top1, mut top100) = (0usize, 0usize);
    for chunk in examples.chunks(256) {
        let rows: Vec<Vec<usize>> = chunk.iter().map(|e| e.bits.clone()).collect();
        let p = model.retrieve(&rows, x);
        for (i, e) in chunk.iter().enumerate() {
            let row = p.row(i);
            let truth = row[e.template];
            loss -= truth.max(f64::MIN_POSITIVE).ln();
            // Rank = templates strictly better, plus equal ones with a smaller id.
            let rank = row
                .iter()
                .enumerate()
                .filter(|&(j, &v)| v > truth || (v == truth && j < e.template))
                .count();
            top1 += (rank < 1) as usize;
            top100 += (rank < 100) as usize;
        }
    }
    let n = examples.len() as f64;
    Ok(Evaluation {
        loss: loss / n,
        top1: top1 as f64 / n,
        top100: top100 as f64 / n,
    })
}

/// Copies of rare-template examples with each set bit dropped with
/// probability `cfg.augment_bit_drop`.
fn augmentation(
    train: &[Example],
    lib: &TemplateLibrary,
    cfg: &ModelConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Example> {
    train
        .iter()
        .filter(|e| {
            lib.get(e.template)
                .is_some_and(|t| t.support < cfg.concat_rand_template_threshold)
        })
        .map(|e| {
            let bits = e
                .bits
                .iter()
                .copied()
                .filter(|_| rng.random::<f64>() >= cfg.augment_bit_drop)
                .collect();
            Example {
                bits,
                width: e.width,
                template: e.template,
            }
        })
        .collect()
}

/// Minibatch AdamW training for `model.config().epochs` epochs. Returns the
/// per-epoch history; the model's template cache is rebuilt on return.
pub fn train(
    model: &mut PrioritizerModel,
    data: &Dataset,
    lib: &TemplateLibrary,
) -> Result<History, MhnError> {
    if data.train.is_empty() {
        return Err(MhnError::EmptyDataset);
    }
    if lib.checksum() != model.library_checksum {
        return Err(MhnError::Checksum);
    }
    let cfg = model.cfg.clone();
    cfg.validate()?;
    model.check_examples(&data.train)?;
    if !data.val.is_empty() {
        model.check_examples(&data.val)?;
    }
    let mut opt = AdamW::new(model, cfg.lr, cfg.weight_decay);
    let mut history = History::default();
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut epoch_set = data.train.clone();
        epoch_set.extend(augmentation(&data.train, lib, &cfg, &mut rng));
        epoch_set.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in epoch_set.chunks(cfg.batch_size) {
            let (loss, grads) = model.loss_and_gradients_with(batch, Some(&mut rng));
            total += loss * batch.len() as f64;
            model.update_running_stats(&grads);
            opt.step(model, &grads.tensors);
        }
        model.build_cache();
        let val = evaluate(model, &data.val)?;
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: total / epoch_set.len() as f64,
            val_loss: val.loss,
            val_top1: val.top1,
            val_top100: val.top100,
        });
        log::info!(
            "epoch {} train_loss {:.5} val_loss {:.5} val_top1 {:.4}",
            epoch + 1,
            total / epoch_set.len() as f64,
            val.loss,
            val.top1
        );
    }
    model.build_cache();
    Ok(history)
}
