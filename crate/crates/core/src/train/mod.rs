//! Minibatch training, evaluation and checkpoints.
//!
//! Each document in a batch gets its own tape so documents can be processed
//! on separate workers. The post-selection term couples documents only
//! through the batch-mean pre-norm `p̄`, so after a forward pass over the
//! batch each tape is seeded with `CE_i/B + 2λ_ps(p̄ − τ)/B · p_i`, which
//! yields exactly the gradient of the batch loss. Per-document gradients
//! are summed in batch order, independent of scheduling.

mod checkpoint;
mod metrics;
mod optim;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, C64};
use crate::config::{LossConfig, RunConfig};
use crate::data::Document;
use crate::error::{Error, Result};
use crate::model::{Grads, Model, Params};

pub use checkpoint::Checkpoint;
pub use metrics::{argmax, scores, Scores};
pub use optim::{AdamW, CosineSchedule};

/// Mixes a run seed with stream coordinates into an independent RNG seed.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(vec![format!("workers: cannot start thread pool: {e}")]))
}

/// Loss and gradient of one minibatch.
#[derive(Clone, Debug)]
pub struct BatchResult {
    pub grads: Grads,
    pub loss: f64,
    pub ce: f64,
    pub mean_pre_norm: f64,
}

/// Batch loss gradient via per-document tapes. `dropout_seed` enables
/// dropout with one derived stream per document.
pub fn batch_gradients(
    model: &Model,
    params: &Params,
    docs: &[&Document],
    cfg: &LossConfig,
    dropout_seed: Option<u64>,
    pool: &rayon::ThreadPool,
) -> Result<BatchResult> {
    if docs.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let b = docs.len() as f64;
    let forward = |(i, doc): (usize, &&Document)| -> Result<_> {
        let mut tape = Tape::new();
        let mut leaves = model.leaves(&mut tape, params, [*doc])?;
        let mut rng = dropout_seed.map(|s| ChaCha8Rng::seed_from_u64(derive_seed(s, i as u64, 0)));
        let out = model.forward_document(&mut tape, &mut leaves, doc, rng.as_mut())?;
        let ce = tape.cross_entropy(out.logits, doc.label)?;
        Ok((tape, leaves, out, ce))
    };
    let mut runs: Vec<_> = pool.install(|| docs.par_iter().enumerate().map(forward).collect::<Result<Vec<_>>>())?;

    let ce_sum: f64 = runs.iter().map(|(t, _, _, ce)| t.scalar_value(*ce).re).sum();
    let p_bar = runs.iter().map(|(t, _, o, _)| t.scalar_value(o.mean_pre_norm).re).sum::<f64>() / b;
    let k = 2.0 * cfg.lambda_ps * (p_bar - cfg.tau) / b;

    let backward = |(tape, leaves, out, ce): &mut (Tape, crate::model::Leaves, crate::model::DocOutput, _)| {
        let a = tape.scale_const(*ce, C64::new(1.0 / b, 0.0));
        let p = tape.scale_const(out.mean_pre_norm, C64::new(k, 0.0));
        let seed = tape.add(a, p)?;
        tape.backward(seed)?;
        Ok(leaves.grads(tape))
    };
    let per_doc: Vec<Grads> = pool.install(|| runs.par_iter_mut().map(backward).collect::<Result<Vec<_>>>())?;

    let mut grads = Grads::default();
    for g in &per_doc {
        grads.accumulate(g);
    }
    let mut loss = ce_sum / b + cfg.lambda_ps * (p_bar - cfg.tau).powi(2);
    if cfg.lambda_l1 > 0.0 || cfg.lambda_qsvt_smooth > 0.0 || cfg.lambda_qsvt_l2 > 0.0 {
        let mut tape = Tape::new();
        let leaves = model.leaves(&mut tape, params, [])?;
        let regs = model.regularizers(&mut tape, &leaves, cfg)?;
        let ones = tape.constant(vec![C64::new(1.0, 0.0); 3], &[3])?;
        let total = tape.weighted_sum(ones, &regs)?;
        loss += tape.scalar_value(total).re;
        tape.backward(total)?;
        grads.accumulate(&leaves.grads(&tape));
    }
    Ok(BatchResult {
        grads,
        loss,
        ce: ce_sum / b,
        mean_pre_norm: p_bar,
    })
}

/// Evaluation-mode metrics over a document set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Mean cross-entropy plus the post-selection term on the set-level
    /// mean pre-norm.
    pub loss: f64,
    #[serde(flatten)]
    pub scores: Scores,
    pub mean_pre_norm: f64,
}

pub fn evaluate(
    model: &Model,
    params: &Params,
    docs: &[Document],
    cfg: &LossConfig,
    pool: &rayon::ThreadPool,
) -> Result<EvalMetrics> {
    if docs.is_empty() {
        return Ok(EvalMetrics::default());
    }
    let one = |doc: &Document| -> Result<(usize, f64, f64)> {
        let mut tape = Tape::new();
        let mut leaves = model.leaves(&mut tape, params, [doc])?;
        let out = model.forward_document(&mut tape, &mut leaves, doc, None)?;
        let ce = tape.cross_entropy(out.logits, doc.label)?;
        let logits: Vec<f64> = tape.value(out.logits).iter().map(|z| z.re).collect();
        Ok((
            argmax(&logits),
            tape.scalar_value(ce).re,
            tape.scalar_value(out.mean_pre_norm).re,
        ))
    };
    let rows: Vec<_> = pool.install(|| docs.par_iter().map(one).collect::<Result<Vec<_>>>())?;
    let n = docs.len() as f64;
    let preds: Vec<usize> = rows.iter().map(|r| r.0).collect();
    let labels: Vec<usize> = docs.iter().map(|d| d.label).collect();
    let ce = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let p_bar = rows.iter().map(|r| r.2).sum::<f64>() / n;
    Ok(EvalMetrics {
        loss: ce + cfg.lambda_ps * (p_bar - cfg.tau).powi(2),
        scores: scores(&preds, &labels, model.config().classes),
        mean_pre_norm: p_bar,
    })
}

/// Mutable optimization state.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: Params,
    pub optimizer: AdamW,
    pub step: u64,
    pub epoch: u64,
    pub seed: u64,
}

impl TrainState {
    pub fn new(params: Params, cfg: &RunConfig) -> Self {
        Self {
            optimizer: AdamW::new(&cfg.optim, &params),
            params,
            step: 0,
            epoch: 0,
            seed: cfg.seed,
        }
    }

    pub fn checkpoint(&self, config: &RunConfig, vocab: &[String]) -> Checkpoint {
        Checkpoint {
            config: config.clone(),
            step: self.step,
            epoch: self.epoch,
            seed: self.seed,
            vocab: vocab.to_vec(),
            params: self.params.clone(),
            moments: Some(Checkpoint::moments_from(&self.optimizer, &self.params)),
        }
    }
}

/// One epoch's training summary and validation metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub step: u64,
    /// Mean minibatch loss over the epoch (training mode).
    pub loss: f64,
    /// Mean of the minibatch pre-norm means.
    pub mean_pre_norm: f64,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
    pub val: EvalMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Training-set metrics at initialization (evaluation mode).
    pub initial_train: EvalMetrics,
    /// Validation metrics at initialization.
    pub initial_val: EvalMetrics,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch with the best validation accuracy, if any ran.
    pub best_epoch: Option<u64>,
}

/// Progress notifications from [`train`].
pub enum TrainEvent<'a> {
    /// Initialization metrics, before any step.
    Start { train: &'a EvalMetrics, val: &'a EvalMetrics },
    /// An epoch finished; `best` marks a new best validation accuracy.
    Epoch {
        record: &'a EpochRecord,
        state: &'a TrainState,
        best: bool,
    },
}

pub struct TrainOutcome {
    pub history: History,
    /// Parameters from the best validation epoch, or the initial ones.
    pub best: Params,
}

/// Runs `cfg.optim.epochs` epochs from `state`.
///
/// `on_event` sees the initialization metrics and every epoch; the CLI uses
/// it to stream metrics and persist checkpoints.
pub fn train<F>(
    model: &Model,
    state: &mut TrainState,
    train_docs: &[Document],
    val_docs: &[Document],
    cfg: &RunConfig,
    mut on_event: F,
) -> Result<TrainOutcome>
where
    F: FnMut(TrainEvent<'_>) -> Result<()>,
{
    if train_docs.is_empty() || val_docs.is_empty() {
        return Err(Error::Input("train and validation splits must be non-empty".into()));
    }
    model.check_params(&state.params)?;
    let pool = thread_pool(cfg.workers)?;
    let o = &cfg.optim;
    let batches_per_epoch = train_docs.len().div_ceil(o.batch_size) as u64;
    let schedule = CosineSchedule {
        lr_max: o.lr_max,
        lr_min: o.lr_min,
        total_steps: batches_per_epoch * o.epochs as u64,
    };
    let initial_train = evaluate(model, &state.params, train_docs, &cfg.loss, &pool)?;
    let initial_val = evaluate(model, &state.params, val_docs, &cfg.loss, &pool)?;
    on_event(TrainEvent::Start {
        train: &initial_train,
        val: &initial_val,
    })?;
    let mut history = History {
        initial_train,
        initial_val,
        epochs: Vec::new(),
        best_epoch: None,
    };
    let mut best = state.params.clone();
    let mut best_acc = f64::NEG_INFINITY;

    while state.epoch < o.epochs as u64 {
        let mut order: Vec<usize> = (0..train_docs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(state.seed, state.epoch, 1)));
        let (mut loss_sum, mut pre_sum, mut lr) = (0.0, 0.0, o.lr_max);
        for chunk in order.chunks(o.batch_size) {
            let batch: Vec<&Document> = chunk.iter().map(|&i| &train_docs[i]).collect();
            let dropout = derive_seed(state.seed, state.step, 2);
            let r = batch_gradients(model, &state.params, &batch, &cfg.loss, Some(dropout), &pool)?;
            if !r.loss.is_finite() || !r.grads.is_finite() {
                return Err(Error::Divergence {
                    step: state.step,
                    loss: r.loss,
                    mean_pre_norm: r.mean_pre_norm,
                });
            }
            lr = schedule.lr(state.step);
            state.optimizer.step(&mut state.params, &r.grads, lr);
            state.step += 1;
            loss_sum += r.loss;
            pre_sum += r.mean_pre_norm;
        }
        state.epoch += 1;
        let val = evaluate(model, &state.params, val_docs, &cfg.loss, &pool)?;
        let record = EpochRecord {
            epoch: state.epoch,
            step: state.step,
            loss: loss_sum / batches_per_epoch as f64,
            mean_pre_norm: pre_sum / batches_per_epoch as f64,
            lr,
            val,
        };
        let improved = val.scores.accuracy > best_acc;
        if improved {
            best_acc = val.scores.accuracy;
            best = state.params.clone();
            history.best_epoch = Some(state.epoch);
        }
        history.epochs.push(record);
        on_event(TrainEvent::Epoch {
            record: &record,
            state,
            best: improved,
        })?;
    }
    Ok(TrainOutcome { history, best })
}
