//! Dense-matrix cross-checks of the simulator and mixer.
//!
//! Every check builds the full `2^q × 2^q` operators with Kronecker products
//! and compares them to the in-place kernels, so it is limited to tiny
//! registers.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, C64};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::mixer::{apply_m, apply_polynomial, l1_normalize};
use crate::quantum::{dense, pauli_expectations, Ansatz, AnsatzAngles, Statevector};

pub const MAX_QUBITS: usize = 3;
pub const TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub qubits: usize,
    pub seeds: usize,
    pub unitarity: f64,
    pub lcu: f64,
    pub polynomial: f64,
    pub readout: f64,
    /// Seeds for which some check exceeded [`TOLERANCE`].
    pub failures: Vec<u64>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn max_error(&self) -> f64 {
        self.unitarity.max(self.lcu).max(self.polynomial).max(self.readout)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dense oracle suite: q = {}, {} seeds, tolerance {TOLERANCE:e}", self.qubits, self.seeds)?;
        for (name, v) in [
            ("unitarity", self.unitarity),
            ("LCU", self.lcu),
            ("polynomial", self.polynomial),
            ("readout", self.readout),
        ] {
            writeln!(f, "  {name:<11} max error {v:.3e}  {}", if v <= TOLERANCE { "PASS" } else { "FAIL" })?;
        }
        write!(
            f,
            "verify: {} ({} failing seeds)",
            if self.pass() { "PASS" } else { "FAIL" },
            self.failures.len()
        )
    }
}

fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn random_angles(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
}

/// Errors of the four checks for one seed.
pub fn check_seed(config: &ModelConfig, seed: u64) -> Result<[f64; 4]> {
    let q = config.qubits;
    let n = config.window;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ansatz = Ansatz::new(q, config.layers)?;
    let a = ansatz.angle_count();

    // Unitarity of the kernel-built circuit, and agreement with the dense product.
    let angles = random_angles(&mut rng, a);
    let circuit = AnsatzAngles::new(angles.clone(), q, config.layers)?;
    let cols = dense::unitary_from_columns(q, |s| ansatz.apply(s, &circuit).expect("angle count checked"));
    let oracle = dense::ansatz_matrix(q, config.layers, &angles);
    let mismatch = (&cols - &oracle).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let unitarity = dense::unitarity_error(&cols).max(mismatch);

    // One application of M and the full polynomial, against dense matrices.
    let token_angles: Vec<Vec<f64>> = (0..n).map(|_| random_angles(&mut rng, a)).collect();
    let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.8)).collect();
    mask[rng.random_range(0..n)] = true;
    let b = random_complex(&mut rng, n);
    let c = random_complex(&mut rng, config.degree + 1);
    let psi = dense::random_state(&mut rng, q);

    let mut tape = Tape::new();
    let bt = tape.constant(b, &[n])?;
    let b_norm = l1_normalize(&mut tape, bt, &mask)?;
    let b_vals = tape.value(b_norm).to_vec();
    let dim = 1usize << q;
    let mut m = dense::Matrix::zeros(dim, dim);
    for j in (0..n).filter(|&j| mask[j]) {
        m += dense::ansatz_matrix(q, config.layers, &token_angles[j]) * b_vals[j];
    }
    let thetas = token_angles
        .iter()
        .map(|t| tape.constant_real(t, &[a]))
        .collect::<Result<Vec<_>>>()?;
    let state = tape.constant(psi.clone(), &[dim])?;
    let mv = apply_m(&mut tape, &ansatz, state, b_norm, &thetas, &mask)?;
    let lcu = dense::max_abs_diff(tape.value(mv), &dense::apply(&m, &psi));

    let ct = tape.constant(c.clone(), &[c.len()])?;
    let poly = apply_polynomial(&mut tape, &ansatz, b_norm, &thetas, &mask, ct)?;
    let mut zero = vec![C64::new(0.0, 0.0); dim];
    zero[0] = C64::new(1.0, 0.0);
    let polynomial = dense::max_abs_diff(tape.value(poly), &dense::matrix_polynomial_apply(&m, &c, &zero));

    // Readout of a random normalized state against dense Pauli operators.
    let s = Statevector::from_amplitudes(psi.clone())?;
    let fast = pauli_expectations(&s)?;
    let slow = dense::pauli_expectations(&psi);
    let readout = fast
        .iter()
        .zip(&slow)
        .map(|(x, y)| (C64::new(*x, 0.0) - y).norm())
        .fold(0.0, f64::max);

    Ok([unitarity, lcu, polynomial, readout])
}

/// Runs the suite for `seeds` seeds; refuses more than [`MAX_QUBITS`] qubits.
pub fn verify(config: &ModelConfig, seeds: usize, base_seed: u64) -> Result<VerifyReport> {
    if config.qubits > MAX_QUBITS {
        return Err(Error::Budget(format!(
            "verify builds dense 2^q operators and is limited to qubits ≤ {MAX_QUBITS} (got {})",
            config.qubits
        )));
    }
    let mut report = VerifyReport {
        qubits: config.qubits,
        seeds,
        unitarity: 0.0,
        lcu: 0.0,
        polynomial: 0.0,
        readout: 0.0,
        failures: Vec::new(),
    };
    for s in 0..seeds as u64 {
        let seed = base_seed.wrapping_add(s);
        let [u, l, p, r] = check_seed(config, seed)?;
        report.unitarity = report.unitarity.max(u);
        report.lcu = report.lcu.max(l);
        report.polynomial = report.polynomial.max(p);
        report.readout = report.readout.max(r);
        if !(u.max(l).max(p).max(r) <= TOLERANCE) {
            report.failures.push(seed);
        }
    }
    Ok(report)
}
