//! Dense-matrix reference implementations.
//!
//! Everything here builds explicit `2^q × 2^q` matrices from Kronecker
//! products and shares no code with the in-place kernels, so it can serve as
//! an independent oracle for them. Only use it for small registers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::autodiff::C64;
use crate::quantum::Statevector;

pub type Matrix = DMatrix<C64>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn m2(a: C64, b: C64, cc: C64, d: C64) -> Matrix {
    Matrix::from_row_slice(2, 2, &[a, b, cc, d])
}

pub fn identity2() -> Matrix {
    Matrix::identity(2, 2)
}

pub fn ry(theta: f64) -> Matrix {
    let (s, co) = (theta / 2.0).sin_cos();
    m2(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
}

pub fn rx(theta: f64) -> Matrix {
    let (s, co) = (theta / 2.0).sin_cos();
    m2(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0))
}

pub fn pauli_x() -> Matrix {
    m2(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

pub fn pauli_y() -> Matrix {
    m2(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
}

pub fn pauli_z() -> Matrix {
    m2(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
}

fn projector(bit: usize) -> Matrix {
    let mut p = Matrix::zeros(2, 2);
    p[(bit, bit)] = c(1.0, 0.0);
    p
}

/// `⊗_{k=q−1..0} ops[k]`, so `ops[0]` acts on the least-significant bit.
pub fn kron_chain(ops: &[Matrix]) -> Matrix {
    let mut out = Matrix::identity(1, 1);
    for op in ops.iter().rev() {
        out = out.kronecker(op);
    }
    out
}

/// `I^{⊗(q−1−k)} ⊗ m ⊗ I^{⊗k}`.
pub fn single_qubit(qubits: usize, k: usize, m: &Matrix) -> Matrix {
    let ops: Vec<Matrix> = (0..qubits).map(|i| if i == k { m.clone() } else { identity2() }).collect();
    kron_chain(&ops)
}

/// `|0⟩⟨0|_c ⊗ I + |1⟩⟨1|_c ⊗ m_t`.
pub fn controlled(qubits: usize, control: usize, target: usize, m: &Matrix) -> Matrix {
    let build = |bit: usize, on_target: Matrix| {
        let ops: Vec<Matrix> = (0..qubits)
            .map(|i| {
                if i == control {
                    projector(bit)
                } else if i == target {
                    on_target.clone()
                } else {
                    identity2()
                }
            })
            .collect();
        kron_chain(&ops)
    };
    build(0, identity2()) + build(1, m.clone())
}

/// The ansatz-14 unitary as a product of explicit gate matrices.
pub fn ansatz_matrix(qubits: usize, layers: usize, angles: &[f64]) -> Matrix {
    let q = qubits;
    assert_eq!(angles.len(), 4 * layers * q);
    let dim = 1 << q;
    let mut u = Matrix::identity(dim, dim);
    let mut apply = |g: Matrix| u = &g * &u;
    for l in 0..layers {
        let a = &angles[4 * q * l..4 * q * (l + 1)];
        for i in 0..q {
            apply(single_qubit(q, i, &ry(a[i])));
        }
        for i in (0..q).rev() {
            apply(controlled(q, i, (i + 1) % q, &rx(a[q + i])));
        }
        for i in 0..q {
            apply(single_qubit(q, i, &ry(a[2 * q + i])));
        }
        for i in 0..q {
            apply(controlled(q, i, (i + q - 1) % q, &rx(a[3 * q + i])));
        }
    }
    u
}

pub fn apply(m: &Matrix, v: &[C64]) -> Vec<C64> {
    let out = m * DVector::from_column_slice(v);
    out.iter().copied().collect()
}

/// Builds a matrix column by column by feeding computational basis states
/// through `f`.
pub fn unitary_from_columns(qubits: usize, f: impl Fn(&Statevector) -> Statevector) -> Matrix {
    let dim = 1 << qubits;
    let mut u = Matrix::zeros(dim, dim);
    for col in 0..dim {
        let mut amps = vec![c(0.0, 0.0); dim];
        amps[col] = c(1.0, 0.0);
        let out = f(&Statevector::from_amplitudes(amps).expect("valid register"));
        for (row, a) in out.amplitudes().iter().enumerate() {
            u[(row, col)] = *a;
        }
    }
    u
}

/// `max |U†U − I|` over entries.
pub fn unitarity_error(u: &Matrix) -> f64 {
    let n = u.nrows();
    let p = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
            worst = worst.max((p[(i, j)] - target).norm());
        }
    }
    worst
}

/// `Σ_k c_k M^k v` with dense matrices.
pub fn matrix_polynomial_apply(m: &Matrix, coeffs: &[C64], v: &[C64]) -> Vec<C64> {
    let dim = m.nrows();
    let mut acc = Matrix::zeros(dim, dim);
    let mut power = Matrix::identity(dim, dim);
    for (k, ck) in coeffs.iter().enumerate() {
        if k > 0 {
            power = &power * m;
        }
        acc += &power * *ck;
    }
    apply(&acc, v)
}

/// `⟨ψ|P|ψ⟩ / ⟨ψ|ψ⟩` for every readout Pauli, complex before real-casting.
pub fn pauli_expectations(amps: &[C64]) -> Vec<C64> {
    let dim = amps.len();
    let q = dim.trailing_zeros() as usize;
    let psi = DVector::from_column_slice(amps);
    let norm = psi.dotc(&psi);
    let mut out = Vec::with_capacity(3 * q);
    for pauli in [pauli_x(), pauli_y(), pauli_z()] {
        for i in 0..q {
            let p = single_qubit(q, i, &pauli);
            out.push(psi.dotc(&(&p * &psi)) / norm);
        }
    }
    out
}

pub fn random_state<R: Rng>(rng: &mut R, qubits: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..1 << qubits)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
