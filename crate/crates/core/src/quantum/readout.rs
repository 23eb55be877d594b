//! XYZ multi-axis readout: `⟨X_i⟩, ⟨Y_i⟩, ⟨Z_i⟩` for every qubit,
//! ordered `[X_0..X_{q−1}, Y_0..Y_{q−1}, Z_0..Z_{q−1}]`.

use crate::autodiff::{ComplexTensor, CustomOp, Tape, C64};
use crate::error::{Error, Result};

use super::statevector::Statevector;

/// Unnormalized expectations `ψ†Pψ`.
pub(crate) fn raw_expectations(amps: &[C64], qubits: usize) -> Vec<f64> {
    let mut out = vec![0.0; 3 * qubits];
    for i in 0..qubits {
        let stride = 1usize << i;
        let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
        for block in amps.chunks_exact(2 * stride) {
            for k in 0..stride {
                let (a0, a1) = (block[k], block[k + stride]);
                let cross = a0.conj() * a1;
                x += cross.re;
                y += cross.im;
                z += a0.norm_sqr() - a1.norm_sqr();
            }
        }
        out[i] = 2.0 * x;
        out[qubits + i] = 2.0 * y;
        out[2 * qubits + i] = z;
    }
    out
}

/// Expectations of the normalized input state.
pub fn pauli_expectations(s: &Statevector) -> Result<Vec<f64>> {
    let norm = s.norm_sqr();
    if norm.sqrt() <= 1e-12 {
        return Err(Error::DegenerateState { norm: norm.sqrt() });
    }
    let mut out = raw_expectations(s.amplitudes(), s.qubits());
    out.iter_mut().for_each(|v| *v /= norm);
    Ok(out)
}

/// Records the readout of an already normalized state on the tape.
pub fn pauli_readout_on_tape(tape: &mut Tape, state: ComplexTensor) -> Result<ComplexTensor> {
    let n = tape.value(state).len();
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::Shape(format!("{n} amplitudes is not a qubit register")));
    }
    let qubits = n.trailing_zeros() as usize;
    let norm = tape.value(state).iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        return Err(Error::DegenerateState { norm });
    }
    let values = raw_expectations(tape.value(state), qubits)
        .into_iter()
        .map(|v| C64::new(v, 0.0))
        .collect();
    tape.custom(Box::new(PauliReadout { qubits }), &[state], values, &[3 * qubits])
}

struct PauliReadout {
    qubits: usize,
}

impl CustomOp for PauliReadout {
    fn name(&self) -> &'static str {
        "pauli_readout"
    }

    fn backward(&self, inputs: &[&[C64]], _output: &[C64], grad_out: &[C64]) -> Vec<Option<Vec<C64>>> {
        let psi = inputs[0];
        let q = self.qubits;
        let mut g = vec![C64::new(0.0, 0.0); psi.len()];
        // ∂(ψ†Pψ) stored as 2Pψ
        for i in 0..q {
            let gx = 2.0 * grad_out[i].re;
            let gy = 2.0 * grad_out[q + i].re;
            let gz = 2.0 * grad_out[2 * q + i].re;
            let stride = 1usize << i;
            for (gb, pb) in g.chunks_exact_mut(2 * stride).zip(psi.chunks_exact(2 * stride)) {
                for k in 0..stride {
                    let (a0, a1) = (pb[k], pb[k + stride]);
                    let i_unit = C64::new(0.0, 1.0);
                    gb[k] += a1 * gx - i_unit * a1 * gy + a0 * gz;
                    gb[k + stride] += a0 * gx + i_unit * a0 * gy - a1 * gz;
                }
            }
        }
        vec![Some(g)]
    }
}
