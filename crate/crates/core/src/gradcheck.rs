//! End-to-end gradient check against central differences.

use std::fmt;

use crate::autodiff::{Tape, C64};
use crate::config::{Aggregation, LossConfig, ModelConfig};
use crate::data::Document;
use crate::error::{Error, Result};
use crate::model::{Grads, Model, ParamGroup, ParamId, Params};

pub const MAX_QUBITS: usize = 6;
pub const MAX_WINDOW: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradcheckOptions {
    /// Central-difference step.
    pub step: f64,
    pub rel_tol: f64,
    /// Entries whose analytic and numeric values differ by at most this
    /// pass regardless of relative error.
    pub abs_tol: f64,
    /// Test hook: perturbs the analytic gradient of one group.
    pub corrupt: Option<ParamGroup>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            rel_tol: 1e-4,
            abs_tol: 1e-6,
            corrupt: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupReport {
    pub group: ParamGroup,
    /// Real scalars checked.
    pub entries: usize,
    pub max_abs_err: f64,
    /// Largest relative error among entries with magnitude at least
    /// `100 · abs_tol`; smaller entries are judged by absolute error.
    pub max_rel_err: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub groups: Vec<GroupReport>,
}

impl GradcheckReport {
    pub fn pass(&self) -> bool {
        self.groups.iter().all(|g| g.pass)
    }

    pub fn failing(&self) -> Vec<ParamGroup> {
        self.groups.iter().filter(|g| !g.pass).map(|g| g.group).collect()
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>8} {:>12} {:>12}  result", "group", "entries", "max abs", "max rel")?;
        for g in &self.groups {
            writeln!(
                f,
                "{:<12} {:>8} {:>12.3e} {:>12.3e}  {}",
                g.group.name(),
                g.entries,
                g.max_abs_err,
                g.max_rel_err,
                if g.pass { "PASS" } else { "FAIL" }
            )?;
        }
        write!(f, "gradcheck: {}", if self.pass() { "PASS" } else { "FAIL" })
    }
}

/// Refuses configurations too large for an exhaustive finite-difference sweep.
pub fn check_budget(config: &ModelConfig) -> Result<()> {
    if config.qubits > MAX_QUBITS || config.window > MAX_WINDOW {
        return Err(Error::Budget(format!(
            "gradcheck is limited to qubits ≤ {MAX_QUBITS} and window ≤ {MAX_WINDOW} (got {} and {})",
            config.qubits, config.window
        )));
    }
    Ok(())
}

/// Full batch loss and its analytic gradient, on a single tape, in
/// evaluation mode.
pub fn loss_and_grad(
    model: &Model,
    params: &Params,
    docs: &[Document],
    cfg: &LossConfig,
) -> Result<(f64, Grads)> {
    let mut tape = Tape::new();
    let mut leaves = model.leaves(&mut tape, params, docs)?;
    let mut outs = Vec::with_capacity(docs.len());
    for doc in docs {
        outs.push(model.forward_document(&mut tape, &mut leaves, doc, None)?);
    }
    let labels: Vec<usize> = docs.iter().map(|d| d.label).collect();
    let terms = model.loss(&mut tape, &leaves, &outs, &labels, cfg)?;
    let value = tape.scalar_value(terms.total).re;
    tape.backward(terms.total)?;
    Ok((value, leaves.grads(&tape)))
}

fn loss_only(model: &Model, params: &Params, docs: &[Document], cfg: &LossConfig) -> Result<f64> {
    let mut tape = Tape::new();
    let mut leaves = model.leaves(&mut tape, params, docs)?;
    let mut outs = Vec::with_capacity(docs.len());
    for doc in docs {
        outs.push(model.forward_document(&mut tape, &mut leaves, doc, None)?);
    }
    let labels: Vec<usize> = docs.iter().map(|d| d.label).collect();
    let terms = model.loss(&mut tape, &leaves, &outs, &labels, cfg)?;
    Ok(tape.scalar_value(terms.total).re)
}

/// Compares every real coordinate of every parameter group (embedding rows
/// only for tokens the documents use).
pub fn gradcheck(
    model: &Model,
    params: &Params,
    docs: &[Document],
    cfg: &LossConfig,
    opts: &GradcheckOptions,
) -> Result<GradcheckReport> {
    let (_, analytic) = loss_and_grad(model, params, docs, cfg)?;
    let embed_dim = model.config().embed_dim;
    let used_rows: Vec<usize> = analytic.rows.keys().copied().collect();
    let mut groups: Vec<GroupReport> = Vec::new();
    let mut probe = params.clone();
    for id in ParamId::ALL {
        let group = id.group();
        if group == ParamGroup::Attention && model.config().aggregation != Aggregation::AttentionPool {
            continue;
        }
        let len = params.get(id).len();
        let flat: Vec<usize> = if id == ParamId::Embeddings {
            used_rows.iter().flat_map(|&r| r * embed_dim..(r + 1) * embed_dim).collect()
        } else {
            (0..len).collect()
        };
        let parts: &[bool] = if id.is_complex() { &[false, true] } else { &[false] };
        let report = match groups.iter_mut().position(|g| g.group == group) {
            Some(i) => i,
            None => {
                groups.push(GroupReport {
                    group,
                    entries: 0,
                    max_abs_err: 0.0,
                    max_rel_err: 0.0,
                    pass: true,
                });
                groups.len() - 1
            }
        };
        for i in flat {
            for &imag in parts {
                let delta = if imag { C64::new(0.0, opts.step) } else { C64::new(opts.step, 0.0) };
                let orig = probe.get(id).data[i];
                probe.get_mut(id).data[i] = orig + delta;
                let plus = loss_only(model, &probe, docs, cfg)?;
                probe.get_mut(id).data[i] = orig - delta;
                let minus = loss_only(model, &probe, docs, cfg)?;
                probe.get_mut(id).data[i] = orig;
                let numeric = (plus - minus) / (2.0 * opts.step);
                let g = analytic.entry(id, i, embed_dim);
                let mut a = if imag { g.im } else { g.re };
                if opts.corrupt == Some(group) {
                    a = 1.5 * a + 1e-3;
                }
                let abs = (a - numeric).abs();
                let r = &mut groups[report];
                r.entries += 1;
                let scale = a.abs().max(numeric.abs());
                let rel = if scale > 0.0 { abs / scale } else { 0.0 };
                r.max_abs_err = r.max_abs_err.max(abs);
                if scale >= 100.0 * opts.abs_tol {
                    r.max_rel_err = r.max_rel_err.max(rel);
                }
                if !(abs <= opts.abs_tol || rel <= opts.rel_tol) {
                    r.pass = false;
                    r.max_rel_err = r.max_rel_err.max(rel);
                }
            }
        }
    }
    groups.sort_by_key(|g| g.group);
    Ok(GradcheckReport { groups })
}
