//! Mini-batch training loop with in-batch negative sampling and
//! validation-based model selection.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::head::DEFAULT_DIM;
use super::loss::{cml_loss, DEFAULT_ALPHA, DEFAULT_MARGIN};
use super::network::{JointNetwork, NetworkShape, Objective, TextArch};
use crate::dataset::EncodedPair;
use crate::error::{Error, Result};
use crate::evaluation::{median_rank, rank_queries, score_all, Direction};
use crate::exec::Exec;
use crate::numeric::{Adam, AdamConfig};

/// Which epoch's parameters training returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSelection {
    /// Lowest validation median-rank sum (both directions); ties go to the
    /// lower validation loss.
    ValMedianRank,
    LastEpoch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub negatives_per_positive: usize,
    pub model_selection: ModelSelection,
    /// Stop after this many epochs without a better validation score.
    pub patience: Option<usize>,
    pub dim: usize,
    pub margin: f64,
    pub alpha: f64,
    pub arch: TextArch,
    pub mlp_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            lr: 1e-4,
            epochs: 500,
            seed: 0,
            negatives_per_positive: 1,
            model_selection: ModelSelection::ValMedianRank,
            patience: Some(20),
            dim: DEFAULT_DIM,
            margin: DEFAULT_MARGIN,
            alpha: DEFAULT_ALPHA,
            arch: TextArch::Bow,
            mlp_dim: DEFAULT_DIM,
        }
    }
}

impl TrainConfig {
    /// All configuration problems at once.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.batch_size < 2 {
            errs.push(format!("batch size {} must be at least 2", self.batch_size));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            errs.push(format!("learning rate {} must be finite and non-negative", self.lr));
        }
        if self.epochs == 0 {
            errs.push("epochs must be at least 1".into());
        }
        if self.dim == 0 {
            errs.push("embedding dimension must be positive".into());
        }
        if !(0.0..1.0).contains(&self.margin) {
            errs.push(format!("margin {} outside [0, 1)", self.margin));
        }
        if !(0.0..0.5).contains(&self.alpha) {
            errs.push(format!("alpha {} outside [0, 0.5)", self.alpha));
        }
        if self.arch == TextArch::Mlp && self.mlp_dim == 0 {
            errs.push("MLP text encoder width must be positive".into());
        }
        errs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training batch loss.
    pub loss: f64,
    pub val_mr_t2i: f64,
    pub val_mr_i2t: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl TrainHistory {
    /// `epoch,loss,val_mr_t2i,val_mr_i2t` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,loss,val_mr_t2i,val_mr_i2t")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{}", r.epoch, r.loss, r.val_mr_t2i, r.val_mr_i2t)?;
        }
        Ok(())
    }
}

/// Validation loss without sampling: mean matching-pair loss plus mean
/// hinge over every mismatched pair.
fn validation_scores(
    net: &JointNetwork,
    val: &[EncodedPair],
    margin: f64,
    exec: Exec,
) -> Result<(f64, f64, f64)> {
    let (text, vis) = net.embed(val, exec)?;
    let scores = score_all(&text, &vis, exec)?;
    let mr_t2i = median_rank(&rank_queries(&scores, Direction::TextToImage, exec)?)?;
    let mr_i2t = median_rank(&rank_queries(&scores, Direction::ImageToText, exec)?)?;
    let n = val.len();
    let mut pos = 0.0;
    let mut neg = 0.0;
    for t in 0..n {
        for v in 0..n {
            if t == v {
                pos += cml_loss(&vis[v], &text[t], true, margin);
            } else {
                neg += cml_loss(&vis[v], &text[t], false, margin);
            }
        }
    }
    let mut loss = pos / n as f64;
    if n > 1 {
        loss += neg / (n * (n - 1)) as f64;
    }
    Ok((mr_t2i, mr_i2t, loss))
}

/// In-batch negatives: for each sample `k`, `per_positive` partners `j != k`
/// drawn uniformly, used as both `(text k, image j)` and `(text j, image k)`.
pub fn sample_negatives<R: Rng + ?Sized>(batch_len: usize, per_positive: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(2 * batch_len * per_positive);
    if batch_len < 2 {
        return out;
    }
    for k in 0..batch_len {
        for _ in 0..per_positive {
            let mut j = rng.random_range(0..batch_len - 1);
            if j >= k {
                j += 1;
            }
            out.push((k, j));
            out.push((j, k));
        }
    }
    out
}

const SAMPLING_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// Trains a twin-tower network. `n_classes` attaches metadata classifiers.
pub fn train_network(
    train: &[EncodedPair],
    val: &[EncodedPair],
    cfg: &TrainConfig,
    n_classes: Option<usize>,
    exec: Exec,
) -> Result<(JointNetwork, TrainHistory)> {
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(Error::Argument(problems.join("; ")));
    }
    if train.len() < 2 {
        return Err(Error::Argument(format!(
            "training needs at least 2 pairs, got {}",
            train.len()
        )));
    }
    if val.is_empty() {
        return Err(Error::Argument("validation split is empty".into()));
    }
    let first = &train[0];
    let shape = NetworkShape {
        vis_in: first.image.len(),
        comment_in: first.text.comment.dim(),
        title_in: first.text.title.dim(),
        dim: cfg.dim,
        arch: cfg.arch,
        mlp_dim: cfg.mlp_dim,
        n_classes,
    };
    for p in train.iter().chain(val) {
        if p.image.len() != shape.vis_in
            || p.text.comment.dim() != shape.comment_in
            || p.text.title.dim() != shape.title_in
        {
            return Err(Error::Schema(format!("pair `{}` has inconsistent dimensions", p.id)));
        }
        if let (Some(c), Some(l)) = (n_classes, p.label) {
            if l >= c {
                return Err(Error::Argument(format!(
                    "pair `{}` has label {l} but only {c} classes",
                    p.id
                )));
            }
        }
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = JointNetwork::init(shape, &mut init_rng);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SAMPLING_STREAM);
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr), &net.param_sizes());
    let obj = Objective {
        margin: cfg.margin,
        alpha: cfg.alpha,
    };

    let mut history = TrainHistory::default();
    let mut best: Option<((f64, f64), JointNetwork)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&EncodedPair> = chunk.iter().map(|&i| &train[i]).collect();
            let negatives = sample_negatives(batch.len(), cfg.negatives_per_positive, &mut rng);
            let (loss, grads) = net.batch_objective(&batch, &negatives, obj, exec)?;
            adam.step(&mut net.params_mut(), &grads.buffers());
            total += loss;
            batches += 1;
        }
        let (mr_t2i, mr_i2t, val_loss) = validation_scores(&net, val, cfg.margin, exec)?;
        history.records.push(EpochRecord {
            epoch,
            loss: total / batches as f64,
            val_mr_t2i: mr_t2i,
            val_mr_i2t: mr_i2t,
            val_loss,
        });
        match cfg.model_selection {
            ModelSelection::LastEpoch => history.best_epoch = epoch,
            ModelSelection::ValMedianRank => {
                let key = (mr_t2i + mr_i2t, val_loss);
                let improved = best.as_ref().is_none_or(|(b, _)| {
                    key.0 < b.0 || (key.0 == b.0 && key.1 < b.1)
                });
                if improved {
                    best = Some((key, net.clone()));
                    history.best_epoch = epoch;
                    since_best = 0;
                } else {
                    since_best += 1;
                    if cfg.patience.is_some_and(|p| since_best >= p) {
                        break;
                    }
                }
            }
        }
    }
    if let Some((_, b)) = best {
        net = b;
    }
    Ok((net, history))
}
