use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("arity error in {op}: {detail}")]
    Arity { op: &'static str, detail: String },

    #[error("autodiff error: {0}")]
    Autodiff(String),

    #[error("qubit count {qubits} outside supported range 1..={max}")]
    Capacity { qubits: usize, max: usize },

    #[error("qubit index {index} out of range for {qubits}-qubit register")]
    QubitIndex { index: usize, qubits: usize },

    #[error("invalid wiring: control and target are both qubit {0}")]
    Wiring(usize),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("state norm {norm:e} too small for readout")]
    DegenerateState { norm: f64 },

    #[error("window has no unmasked tokens")]
    EmptyWindow,

    #[error("LCU coefficients have vanishing total magnitude {total:e}")]
    DegenerateCoefficients { total: f64 },

    #[error("window {window}: polynomial state collapsed (pre_norm = {pre_norm:e})")]
    CollapsedState { window: usize, pre_norm: f64 },

    #[error("input error: {0}")]
    Input(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("training diverged at step {step} (loss = {loss}, mean pre_norm = {mean_pre_norm})")]
    Divergence {
        step: u64,
        loss: f64,
        mean_pre_norm: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("refused: {0}")]
    Budget(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
