//! Attention-parameter accounting for the mixer.

use std::fmt;

use crate::config::ModelConfig;
use crate::quantum::angle_count;

/// Published totals as `(window, degree, attention params)` for an 8-qubit
/// mixer with a 6-layer feed-forward circuit.
pub const REFERENCE_COUNTS: [(usize, usize, usize); 2] = [(256, 5, 454), (128, 5, 326)];
const REFERENCE_QUBITS: usize = 8;
const REFERENCE_FF_LAYERS: usize = 6;

/// Mixer parameter counts under both ways of counting complex scalars.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionParams {
    pub window: usize,
    pub degree: usize,
    /// Feed-forward angles `|φ| = 4·ℓ_ff·q`.
    pub feed_forward: usize,
    pub data_qubits: usize,
    /// `⌈log₂ n⌉` LCU control qubits; only relevant on hardware.
    pub control_qubits: usize,
}

impl AttentionParams {
    /// Complex entries counted as two reals: `2n + 2(d+1) + |φ|`.
    pub fn as_two_reals(&self) -> usize {
        2 * self.window + 2 * (self.degree + 1) + self.feed_forward
    }

    /// Complex entries counted once: `n + (d+1) + |φ|`.
    pub fn as_one(&self) -> usize {
        self.window + self.degree + 1 + self.feed_forward
    }

    /// Each published total next to both accountings for the reference
    /// circuit: `(window, degree, published, as_one, as_two_reals)`.
    pub fn reference_rows() -> Vec<(usize, usize, usize, usize, usize)> {
        REFERENCE_COUNTS
            .iter()
            .map(|&(n, d, published)| {
                let cfg = ModelConfig {
                    qubits: REFERENCE_QUBITS,
                    ff_layers: REFERENCE_FF_LAYERS,
                    window: n,
                    degree: d,
                    ..ModelConfig::default()
                };
                let p = count_attention_params(&cfg);
                (n, d, published, p.as_one(), p.as_two_reals())
            })
            .collect()
    }
}

pub fn count_attention_params(config: &ModelConfig) -> AttentionParams {
    AttentionParams {
        window: config.window,
        degree: config.degree,
        feed_forward: angle_count(config.qubits, config.ff_layers),
        data_qubits: config.qubits,
        control_qubits: config.window.next_power_of_two().trailing_zeros() as usize,
    }
}

impl fmt::Display for AttentionParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d1, ff) = (self.window, self.degree + 1, self.feed_forward);
        writeln!(f, "attention parameters (n = {n}, d = {})", self.degree)?;
        writeln!(f, "  group             complex-as-1  complex-as-2-reals")?;
        writeln!(f, "  LCU b             {n:>12}  {:>18}", 2 * n)?;
        writeln!(f, "  polynomial c      {d1:>12}  {:>18}", 2 * d1)?;
        writeln!(f, "  feed-forward φ    {ff:>12}  {ff:>18}")?;
        writeln!(f, "  total             {:>12}  {:>18}", self.as_one(), self.as_two_reals())?;
        writeln!(
            f,
            "qubits: {} data + {} LCU control (control register is hardware-only; the simulator does not allocate it)",
            self.data_qubits, self.control_qubits
        )?;
        writeln!(f, "published totals (q = {REFERENCE_QUBITS}, ff_layers = {REFERENCE_FF_LAYERS}):")?;
        let rows = Self::reference_rows();
        for &(n, d, published, one, two) in &rows {
            let verdict = if one == published { "matches complex-as-1" } else { "MISMATCH" };
            writeln!(
                f,
                "  n = {n:>3}, d = {d}: published {published}, complex-as-1 {one}, complex-as-2-reals {two}  [{verdict}]"
            )?;
        }
        let delta_pub = rows[0].2 as i64 - rows[1].2 as i64;
        let delta_one = rows[0].3 as i64 - rows[1].3 as i64;
        let delta_two = rows[0].4 as i64 - rows[1].4 as i64;
        writeln!(
            f,
            "  window delta: published {delta_pub}, complex-as-1 {delta_one}, complex-as-2-reals {delta_two}"
        )?;
        write!(
            f,
            "note: the published totals are consistent only with complex-as-1; \
             counting 2n for the LCU coefficients gives {} and {} instead",
            rows[0].4, rows[1].4
        )
    }
}
