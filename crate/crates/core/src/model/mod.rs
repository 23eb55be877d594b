//! The full classifier: embeddings, per-window mixing, head, aggregation
//! and the composite loss.

mod accounting;
mod params;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ComplexTensor, Tape, C64};
use crate::config::{Aggregation, LossConfig, ModelConfig};
use crate::data::Document;
use crate::error::{Error, Result};
use crate::mixer::{Mixer, MixerParams};

pub use accounting::{count_attention_params, AttentionParams, REFERENCE_COUNTS};
pub use params::{init_params, Grads, ParamGroup, ParamId, Params, Tensor};

/// Parameters recorded as leaves on one tape.
///
/// Embedding rows get a leaf per distinct token so gradients stay sparse.
#[derive(Debug)]
pub struct Leaves {
    dense: BTreeMap<ParamId, ComplexTensor>,
    rows: BTreeMap<usize, ComplexTensor>,
    angles: BTreeMap<usize, ComplexTensor>,
}

impl Leaves {
    pub fn get(&self, id: ParamId) -> ComplexTensor {
        self.dense[&id]
    }

    pub fn row(&self, token: usize) -> Option<ComplexTensor> {
        self.rows.get(&token).copied()
    }

    /// Reads accumulated leaf gradients after [`Tape::backward`].
    pub fn grads(&self, tape: &Tape) -> Grads {
        let mut out = Grads::default();
        for (&id, &t) in &self.dense {
            if let Some(g) = tape.grad(t) {
                if id.is_complex() {
                    out.add_dense(id, g);
                } else {
                    let real: Vec<C64> = g.iter().map(|z| C64::new(z.re, 0.0)).collect();
                    out.add_dense(id, &real);
                }
            }
        }
        for (&tok, &t) in &self.rows {
            if let Some(g) = tape.grad(t) {
                let real: Vec<C64> = g.iter().map(|z| C64::new(z.re, 0.0)).collect();
                out.add_row(tok, &real);
            }
        }
        out
    }
}

/// Outputs of [`Model::forward_document`].
#[derive(Clone, Debug)]
pub struct DocOutput {
    pub logits: ComplexTensor,
    /// Mean of the window pre-norms, as a tape scalar.
    pub mean_pre_norm: ComplexTensor,
    pub window_logits: Vec<ComplexTensor>,
    pub window_features: Vec<ComplexTensor>,
}

/// Loss components as tape scalars.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub total: ComplexTensor,
    pub ce: ComplexTensor,
    pub psr: ComplexTensor,
    pub l1c: ComplexTensor,
    pub smooth: ComplexTensor,
    pub l2: ComplexTensor,
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    mixer: Mixer,
}

impl Model {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        let mut mixer = Mixer::new(config.qubits, config.layers, config.ff_layers)?;
        mixer.normalize_lcu = config.normalize_lcu;
        Ok(Self {
            config: config.clone(),
            mixer,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn mixer(&self) -> &Mixer {
        &self.mixer
    }

    /// Checks that `params` fit this model.
    pub fn check_params(&self, params: &Params) -> Result<()> {
        let shapes = Params::expected_shapes(&self.config, params.vocab_size());
        for ((id, t), want) in params.iter().zip(shapes) {
            if t.shape != want {
                return Err(Error::Shape(format!(
                    "parameter {} has shape {:?}, model expects {:?}",
                    id.name(),
                    t.shape,
                    want
                )));
            }
        }
        Ok(())
    }

    /// Records every parameter as a leaf, with embedding rows only for the
    /// tokens that appear unmasked in `docs`.
    pub fn leaves<'a>(
        &self,
        tape: &mut Tape,
        params: &Params,
        docs: impl IntoIterator<Item = &'a Document>,
    ) -> Result<Leaves> {
        let mut dense = BTreeMap::new();
        for (id, t) in params.iter() {
            if id != ParamId::Embeddings {
                dense.insert(id, tape.leaf(t.data.clone(), &t.shape)?);
            }
        }
        let tokens: BTreeSet<usize> = docs
            .into_iter()
            .flat_map(|d| d.windows.iter())
            .flat_map(|w| w.ids.iter().zip(&w.mask).filter(|(_, &m)| m).map(|(&id, _)| id))
            .collect();
        let d = self.config.embed_dim;
        let mut rows = BTreeMap::new();
        for tok in tokens {
            if tok >= params.vocab_size() {
                return Err(Error::Input(format!(
                    "token id {tok} outside vocabulary of {}",
                    params.vocab_size()
                )));
            }
            rows.insert(tok, tape.leaf(params.embedding_row(tok).to_vec(), &[d])?);
        }
        Ok(Leaves {
            dense,
            rows,
            angles: BTreeMap::new(),
        })
    }

    /// `θ_w = W_E · e_w + θ_bias`, cached per token.
    fn token_angles(&self, tape: &mut Tape, leaves: &mut Leaves, token: usize) -> Result<ComplexTensor> {
        if let Some(&a) = leaves.angles.get(&token) {
            return Ok(a);
        }
        let row = leaves
            .row(token)
            .ok_or_else(|| Error::Input(format!("no embedding leaf for token {token}")))?;
        let proj = tape.matvec(leaves.get(ParamId::WE), row)?;
        let a = tape.add(proj, leaves.get(ParamId::ThetaBias))?;
        leaves.angles.insert(token, a);
        Ok(a)
    }

    fn head(
        &self,
        tape: &mut Tape,
        leaves: &Leaves,
        features: ComplexTensor,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<ComplexTensor> {
        let z = tape.matvec(leaves.get(ParamId::W1), features)?;
        let z = tape.add(z, leaves.get(ParamId::B1))?;
        let mut h = tape.relu(z);
        let p = self.config.dropout;
        if let Some(rng) = dropout {
            if p > 0.0 {
                let keep = 1.0 / (1.0 - p);
                let mask = (0..self.config.hidden)
                    .map(|_| C64::new(if rng.random::<f64>() < p { 0.0 } else { keep }, 0.0))
                    .collect();
                h = tape.mul_const(h, mask)?;
            }
        }
        let z = tape.matvec(leaves.get(ParamId::W2), h)?;
        tape.add(z, leaves.get(ParamId::B2))
    }

    /// Document logits plus per-window diagnostics. Passing an RNG enables
    /// dropout (training mode).
    pub fn forward_document(
        &self,
        tape: &mut Tape,
        leaves: &mut Leaves,
        doc: &Document,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<DocOutput> {
        if doc.windows.is_empty() {
            return Err(Error::Input("document has no windows (empty token sequence)".into()));
        }
        let mixer_params = MixerParams {
            b: leaves.get(ParamId::B),
            c: leaves.get(ParamId::C),
            phi: leaves.get(ParamId::Phi),
        };
        let feature_mask: Option<Vec<C64>> = self.config.measurement_mask.as_ref().map(|m| {
            m.iter()
                .map(|&keep| C64::new(if keep { 1.0 } else { 0.0 }, 0.0))
                .collect()
        });
        let mut window_logits = Vec::with_capacity(doc.windows.len());
        let mut window_features = Vec::with_capacity(doc.windows.len());
        let mut pre_norms = Vec::with_capacity(doc.windows.len());
        for (w, window) in doc.windows.iter().enumerate() {
            if window.ids.len() != self.config.window {
                return Err(Error::Shape(format!(
                    "window {w} has {} tokens, model window is {}",
                    window.ids.len(),
                    self.config.window
                )));
            }
            let mut angles = Vec::with_capacity(window.ids.len());
            for (&tok, &m) in window.ids.iter().zip(&window.mask) {
                // Masked slots are never read by the mixer.
                angles.push(if m {
                    self.token_angles(tape, leaves, tok)?
                } else {
                    leaves.get(ParamId::ThetaBias)
                });
            }
            let out = self.mixer.mix_window(tape, &angles, &mixer_params, &window.mask, w)?;
            let features = match &feature_mask {
                Some(m) => tape.mul_const(out.features, m.clone())?,
                None => out.features,
            };
            let logits = self.head(tape, leaves, features, dropout.as_deref_mut())?;
            window_logits.push(logits);
            window_features.push(features);
            pre_norms.push(out.pre_norm);
        }
        let logits = aggregate(
            tape,
            self.config.aggregation,
            &window_logits,
            &window_features,
            Some(leaves.get(ParamId::Attn)),
        )?;
        let mean_pre_norm = mean(tape, &pre_norms)?;
        Ok(DocOutput {
            logits,
            mean_pre_norm,
            window_logits,
            window_features,
        })
    }

    /// Parameter-only regularizers: L1C (only when forward normalization is
    /// off), polynomial smoothness and polynomial L2.
    pub fn regularizers(&self, tape: &mut Tape, leaves: &Leaves, cfg: &LossConfig) -> Result<[ComplexTensor; 3]> {
        let zero = tape.constant(vec![C64::new(0.0, 0.0)], &[])?;
        let l1c = if !self.config.normalize_lcu && cfg.lambda_l1 > 0.0 {
            let mass = tape.abs(leaves.get(ParamId::B));
            let mass = tape.sum(mass);
            let dev = tape.add_const(mass, C64::new(-1.0, 0.0));
            let sq = tape.squared_norm(dev);
            tape.scale_const(sq, C64::new(cfg.lambda_l1, 0.0))
        } else {
            zero
        };
        let c = leaves.get(ParamId::C);
        let d = self.config.degree;
        let smooth = if cfg.lambda_qsvt_smooth > 0.0 {
            let hi = tape.gather(c, &(1..=d).collect::<Vec<_>>())?;
            let lo = tape.gather(c, &(0..d).collect::<Vec<_>>())?;
            let diff = tape.sub(hi, lo)?;
            let sq = tape.squared_norm(diff);
            tape.scale_const(sq, C64::new(cfg.lambda_qsvt_smooth, 0.0))
        } else {
            zero
        };
        let l2 = if cfg.lambda_qsvt_l2 > 0.0 {
            let sq = tape.squared_norm(c);
            tape.scale_const(sq, C64::new(cfg.lambda_qsvt_l2, 0.0))
        } else {
            zero
        };
        Ok([l1c, smooth, l2])
    }

    /// Batch loss on one tape: mean cross-entropy, the post-selection
    /// regularizer on the batch-mean pre-norm, and the parameter terms.
    pub fn loss(
        &self,
        tape: &mut Tape,
        leaves: &Leaves,
        outputs: &[DocOutput],
        labels: &[usize],
        cfg: &LossConfig,
    ) -> Result<LossTerms> {
        if outputs.is_empty() || outputs.len() != labels.len() {
            return Err(Error::Arity {
                op: "loss",
                detail: format!("{} outputs for {} labels", outputs.len(), labels.len()),
            });
        }
        let mut ces = Vec::with_capacity(outputs.len());
        for (out, &y) in outputs.iter().zip(labels) {
            ces.push(tape.cross_entropy(out.logits, y)?);
        }
        let ce = mean(tape, &ces)?;
        let pre: Vec<ComplexTensor> = outputs.iter().map(|o| o.mean_pre_norm).collect();
        let p_bar = mean(tape, &pre)?;
        let psr = psr(tape, p_bar, cfg);
        let [l1c, smooth, l2] = self.regularizers(tape, leaves, cfg)?;
        let parts = [ce, psr, l1c, smooth, l2];
        let ones = tape.constant(vec![C64::new(1.0, 0.0); parts.len()], &[parts.len()])?;
        let total = tape.weighted_sum(ones, &parts)?;
        Ok(LossTerms {
            total,
            ce,
            psr,
            l1c,
            smooth,
            l2,
        })
    }
}

/// `λ_ps · (p̄ − τ)²`.
pub fn psr(tape: &mut Tape, mean_pre_norm: ComplexTensor, cfg: &LossConfig) -> ComplexTensor {
    let dev = tape.add_const(mean_pre_norm, C64::new(-cfg.tau, 0.0));
    let sq = tape.squared_norm(dev);
    tape.scale_const(sq, C64::new(cfg.lambda_ps, 0.0))
}

fn mean(tape: &mut Tape, xs: &[ComplexTensor]) -> Result<ComplexTensor> {
    let w = C64::new(1.0 / xs.len() as f64, 0.0);
    let coeffs = tape.constant(vec![w; xs.len()], &[xs.len()])?;
    tape.weighted_sum(coeffs, xs)
}

/// Combines window logits into document logits.
///
/// `attention_pool` weights windows by `softmax(a · o_w)` over their readout
/// features `o_w`; `attn` holds the score vector `a` with shape `[1, 3q]`.
pub fn aggregate(
    tape: &mut Tape,
    mode: Aggregation,
    window_logits: &[ComplexTensor],
    window_features: &[ComplexTensor],
    attn: Option<ComplexTensor>,
) -> Result<ComplexTensor> {
    if window_logits.is_empty() {
        return Err(Error::Input("cannot aggregate zero windows".into()));
    }
    match mode {
        Aggregation::MeanLogits => mean(tape, window_logits),
        Aggregation::AttentionPool => {
            let attn = attn.ok_or_else(|| Error::Input("attention pooling needs a score vector".into()))?;
            if window_features.len() != window_logits.len() {
                return Err(Error::Arity {
                    op: "aggregate",
                    detail: format!(
                        "{} feature vectors for {} windows",
                        window_features.len(),
                        window_logits.len()
                    ),
                });
            }
            let mut scores = Vec::with_capacity(window_features.len());
            for &f in window_features {
                scores.push(tape.matvec(attn, f)?);
            }
            let scores = tape.concat(&scores)?;
            let alpha = tape.softmax(scores);
            tape.weighted_sum(alpha, window_logits)
        }
    }
}
