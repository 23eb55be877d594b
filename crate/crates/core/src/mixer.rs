//! LCU/QSVT token mixing for one window.
//!
//! The window operator `M = Σ_j b̃_j U_j` is never materialized: applying it
//! to a state runs each token circuit on that state and takes the weighted
//! sum. The polynomial `P_c(M)|0⟩ = Σ_k c_k M^k |0⟩` is built from the chain
//! `v_0 = |0⟩, v_k = M v_{k−1}`, costing `d·n` token-circuit applications.
//!
//! Sums over tokens run in a canonical order derived from the values being
//! summed, so jointly permuting `(b_j, U_j)` leaves every output bit-for-bit
//! unchanged.

use std::cmp::Ordering;

use crate::autodiff::{ComplexTensor, Tape, C64};
use crate::error::{Error, Result};
use crate::quantum::{pauli_readout_on_tape, Ansatz, Statevector};

/// Pre-norms below this abort the forward pass.
pub const COLLAPSE_THRESHOLD: f64 = 1e-12;

/// Trainable mixer parameters as tape nodes.
#[derive(Clone, Copy, Debug)]
pub struct MixerParams {
    /// Raw LCU coefficients, one per window position.
    pub b: ComplexTensor,
    /// Polynomial coefficients; index `k` multiplies `M^k`.
    pub c: ComplexTensor,
    /// Feed-forward ansatz angles.
    pub phi: ComplexTensor,
}

#[derive(Clone, Copy, Debug)]
pub struct MixerOutput {
    /// Real readout features, length `3q`.
    pub features: ComplexTensor,
    /// `‖P_c(M)|0⟩‖²`, the post-selection success proxy.
    pub pre_norm: ComplexTensor,
    /// Normalized state after the feed-forward circuit.
    pub state: ComplexTensor,
}

fn cmp_c64(a: &C64, b: &C64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn cmp_slices(a: &[C64], b: &[C64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| cmp_c64(x, y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

fn active(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(j, _)| j).collect()
}

/// `b̃ = b / Σ_{unmasked} |b_k|` with masked entries forced to zero.
pub fn l1_normalize(tape: &mut Tape, b: ComplexTensor, mask: &[bool]) -> Result<ComplexTensor> {
    let masked = mask_coefficients(tape, b, mask)?;
    let mut order = active(mask);
    if order.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let bv = tape.value(b);
    order.sort_by(|&x, &y| cmp_c64(&bv[x], &bv[y]));

    let live = tape.gather(masked, &order)?;
    let mag = tape.abs(live);
    let total = tape.sum(mag);
    let t = tape.scalar_value(total).re;
    if t <= 1e-12 {
        return Err(Error::DegenerateCoefficients { total: t });
    }
    let inv = tape.recip(total);
    tape.scale(masked, inv)
}

/// Zeros masked coefficients without normalizing.
pub fn mask_coefficients(tape: &mut Tape, b: ComplexTensor, mask: &[bool]) -> Result<ComplexTensor> {
    if tape.value(b).len() != mask.len() {
        return Err(Error::Arity {
            op: "l1_normalize",
            detail: format!("{} coefficients for a mask of {}", tape.value(b).len(), mask.len()),
        });
    }
    let keep = mask.iter().map(|&m| C64::new(if m { 1.0 } else { 0.0 }, 0.0)).collect();
    tape.mul_const(b, keep)
}

/// `Σ_j b̃_j U_j s` over unmasked positions.
pub fn apply_m(
    tape: &mut Tape,
    ansatz: &Ansatz,
    state: ComplexTensor,
    b_norm: ComplexTensor,
    tokens: &[ComplexTensor],
    mask: &[bool],
) -> Result<ComplexTensor> {
    let n = tape.value(b_norm).len();
    if tokens.len() != n || mask.len() != n {
        return Err(Error::Arity {
            op: "apply_m",
            detail: format!("{n} coefficients, {} token circuits, mask of {}", tokens.len(), mask.len()),
        });
    }
    let mut order = active(mask);
    if order.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let bv = tape.value(b_norm);
    order.sort_by(|&x, &y| {
        cmp_c64(&bv[x], &bv[y]).then_with(|| cmp_slices(tape.value(tokens[x]), tape.value(tokens[y])))
    });

    let coeffs = tape.gather(b_norm, &order)?;
    let mut terms = Vec::with_capacity(order.len());
    for &j in &order {
        terms.push(ansatz.apply_on_tape(tape, state, tokens[j])?);
    }
    tape.weighted_sum(coeffs, &terms)
}

/// `P_c(M)|0^q⟩`, unnormalized.
pub fn apply_polynomial(
    tape: &mut Tape,
    ansatz: &Ansatz,
    b_norm: ComplexTensor,
    tokens: &[ComplexTensor],
    mask: &[bool],
    c: ComplexTensor,
) -> Result<ComplexTensor> {
    let terms = tape.value(c).len();
    if terms < 2 {
        return Err(Error::Shape(format!(
            "polynomial degree must be at least 1, got {} coefficients",
            terms
        )));
    }
    let zero = Statevector::zero_state(ansatz.qubits())?;
    let dim = zero.amplitudes().len();
    let mut powers = vec![tape.constant(zero.into_amplitudes(), &[dim])?];
    for _ in 1..terms {
        let prev = *powers.last().expect("non-empty");
        powers.push(apply_m(tape, ansatz, prev, b_norm, tokens, mask)?);
    }
    tape.weighted_sum(c, &powers)
}

/// Circuit templates shared by every window.
#[derive(Clone, Debug)]
pub struct Mixer {
    pub embedding: Ansatz,
    pub feed_forward: Ansatz,
    /// When false, coefficients are only masked; used by the L1C ablation.
    pub normalize_lcu: bool,
}

impl Mixer {
    pub fn new(qubits: usize, embedding_layers: usize, ff_layers: usize) -> Result<Self> {
        Ok(Self {
            embedding: Ansatz::new(qubits, embedding_layers)?,
            feed_forward: Ansatz::new(qubits, ff_layers)?,
            normalize_lcu: true,
        })
    }

    pub fn qubits(&self) -> usize {
        self.embedding.qubits()
    }

    /// Full window pipeline: normalize, polynomial, record pre-norm,
    /// renormalize, feed-forward circuit, XYZ readout.
    pub fn mix_window(
        &self,
        tape: &mut Tape,
        token_angles: &[ComplexTensor],
        params: &MixerParams,
        mask: &[bool],
        window: usize,
    ) -> Result<MixerOutput> {
        let n = tape.value(params.b).len();
        if token_angles.len() != n || mask.len() != n {
            return Err(Error::Arity {
                op: "mix_window",
                detail: format!(
                    "window length {n}, got {} token angle vectors and a mask of {}",
                    token_angles.len(),
                    mask.len()
                ),
            });
        }
        for (j, &t) in token_angles.iter().enumerate() {
            if mask[j] && tape.value(t).len() != self.embedding.angle_count() {
                return Err(Error::Shape(format!(
                    "token {j}: {} angles, ansatz expects {}",
                    tape.value(t).len(),
                    self.embedding.angle_count()
                )));
            }
        }
        let b_norm = if self.normalize_lcu {
            l1_normalize(tape, params.b, mask)?
        } else {
            mask_coefficients(tape, params.b, mask)?
        };
        let poly = apply_polynomial(tape, &self.embedding, b_norm, token_angles, mask, params.c)?;
        let pre_norm = tape.squared_norm(poly);
        let p = tape.scalar_value(pre_norm).re;
        if !(p >= COLLAPSE_THRESHOLD) {
            return Err(Error::CollapsedState { window, pre_norm: p });
        }
        let root = tape.sqrt(pre_norm);
        let inv = tape.recip(root);
        let normalized = tape.scale(poly, inv)?;
        let state = self.feed_forward.apply_on_tape(tape, normalized, params.phi)?;
        let features = pauli_readout_on_tape(tape, state)?;
        Ok(MixerOutput {
            features,
            pre_norm,
            state,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::dense;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
        (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    fn random_angles(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-3.1..3.1)).collect()
    }

    fn normalized(tape: &mut Tape, b: Vec<C64>, mask: &[bool]) -> Result<Vec<C64>> {
        let n = b.len();
        let bt = tape.constant(b, &[n])?;
        let out = l1_normalize(tape, bt, mask)?;
        Ok(tape.value(out).to_vec())
    }

    #[test]
    fn l1_examples() {
        let mut tape = Tape::new();
        assert_eq!(normalized(&mut tape, vec![c(1.0, 0.0); 2], &[true, true]).unwrap(), vec![c(0.5, 0.0); 2]);

        let out = normalized(&mut tape, vec![c(0.0, 3.0), c(-4.0, 0.0)], &[true, true]).unwrap();
        assert!((out[0] - c(0.0, 3.0 / 7.0)).norm() < 1e-15);
        assert!((out[1] - c(-4.0 / 7.0, 0.0)).norm() < 1e-15);
        assert!((out.iter().map(|x| x.norm()).sum::<f64>() - 1.0).abs() <= 1e-12);

        let out = normalized(&mut tape, vec![c(1.0, 0.0); 3], &[true, true, false]).unwrap();
        assert_eq!(out, vec![c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn l1_errors() {
        let mut tape = Tape::new();
        assert!(matches!(
            normalized(&mut tape, vec![c(1.0, 0.0); 2], &[false, false]),
            Err(Error::EmptyWindow)
        ));
        assert!(matches!(
            normalized(&mut tape, vec![c(0.0, 0.0), c(1.0, 0.0)], &[true, false]),
            Err(Error::DegenerateCoefficients { .. })
        ));
    }

    proptest! {
        #[test]
        fn l1_invariant(seed in any::<u64>(), n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<C64> = (0..n).map(|_| c(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0))).collect();
            let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
            mask[rng.random_range(0..n)] = true;
            let mut tape = Tape::new();
            let out = normalized(&mut tape, b, &mask).unwrap();
            let total: f64 = out.iter().map(|x| x.norm()).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            for (x, m) in out.iter().zip(&mask) {
                if !m { prop_assert_eq!(*x, c(0.0, 0.0)); }
            }
        }
    }

    struct Instance {
        qubits: usize,
        layers: usize,
        b: Vec<C64>,
        angles: Vec<Vec<f64>>,
        coeffs: Vec<C64>,
    }

    impl Instance {
        fn random(rng: &mut ChaCha8Rng, qubits: usize, layers: usize, n: usize, degree: usize) -> Self {
            Self {
                qubits,
                layers,
                b: random_complex(rng, n),
                angles: (0..n).map(|_| random_angles(rng, 4 * layers * qubits)).collect(),
                coeffs: random_complex(rng, degree + 1),
            }
        }

        fn dense_m(&self) -> dense::Matrix {
            let total: f64 = self.b.iter().map(|x| x.norm()).sum();
            let dim = 1 << self.qubits;
            let mut m = dense::Matrix::zeros(dim, dim);
            for (bj, a) in self.b.iter().zip(&self.angles) {
                m += dense::ansatz_matrix(self.qubits, self.layers, a) * (*bj / total);
            }
            m
        }

        fn tokens(&self, tape: &mut Tape) -> Vec<ComplexTensor> {
            self.angles.iter().map(|a| tape.constant_real(a, &[a.len()]).unwrap()).collect()
        }
    }

    #[test]
    fn apply_m_trivial_cases() {
        let ansatz = Ansatz::new(2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = dense::random_state(&mut rng, 2);

        let mut tape = Tape::new();
        let st = tape.constant(s.clone(), &[4]).unwrap();
        let b = tape.constant_real(&[1.0], &[1]).unwrap();
        let id = tape.constant_real(&[0.0; 8], &[8]).unwrap();
        let out = apply_m(&mut tape, &ansatz, st, b, &[id], &[true]).unwrap();
        assert_eq!(tape.value(out), s.as_slice());

        let theta = tape.constant_real(&random_angles(&mut rng, 8), &[8]).unwrap();
        let b = tape.constant_real(&[0.5, 0.5], &[2]).unwrap();
        let out = apply_m(&mut tape, &ansatz, st, b, &[theta, theta], &[true, true]).unwrap();
        let single = ansatz.apply_on_tape(&mut tape, st, theta).unwrap();
        assert!(dense::max_abs_diff(tape.value(out), tape.value(single)) <= 1e-15);

        assert!(matches!(
            apply_m(&mut tape, &ansatz, st, b, &[theta], &[true, true]),
            Err(Error::Arity { .. })
        ));
    }

    #[test]
    fn apply_m_matches_dense_lcu() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let inst = Instance::random(&mut rng, 2, 1, 3, 1);
        let s = dense::random_state(&mut rng, 2);
        let ansatz = Ansatz::new(2, 1).unwrap();
        let mut tape = Tape::new();
        let tokens = inst.tokens(&mut tape);
        let b = tape.constant(inst.b.clone(), &[3]).unwrap();
        let bn = l1_normalize(&mut tape, b, &[true; 3]).unwrap();
        let st = tape.constant(s.clone(), &[4]).unwrap();
        let out = apply_m(&mut tape, &ansatz, st, bn, &tokens, &[true; 3]).unwrap();
        let expected = dense::apply(&inst.dense_m(), &s);
        assert!(dense::max_abs_diff(tape.value(out), &expected) <= 1e-10);
    }

    #[test]
    fn polynomial_trivial_cases() {
        let ansatz = Ansatz::new(2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut tape = Tape::new();
        let theta = random_angles(&mut rng, 8);
        let tok = tape.constant_real(&theta, &[8]).unwrap();
        let b = tape.constant_real(&[1.0], &[1]).unwrap();

        let c0 = tape.constant_real(&[1.0, 0.0, 0.0], &[3]).unwrap();
        let out = apply_polynomial(&mut tape, &ansatz, b, &[tok], &[true], c0).unwrap();
        assert_eq!(tape.value(out), Statevector::zero_state(2).unwrap().amplitudes());

        let c1 = tape.constant_real(&[0.0, 1.0, 0.0], &[3]).unwrap();
        let out = apply_polynomial(&mut tape, &ansatz, b, &[tok], &[true], c1).unwrap();
        let expected = dense::apply(&dense::ansatz_matrix(2, 1, &theta), Statevector::zero_state(2).unwrap().amplitudes());
        assert!(dense::max_abs_diff(tape.value(out), &expected) <= 1e-12);

        let bad = tape.constant_real(&[1.0], &[1]).unwrap();
        assert!(apply_polynomial(&mut tape, &ansatz, b, &[tok], &[true], bad).is_err());
    }

    fn polynomial_error(inst: &Instance) -> f64 {
        let ansatz = Ansatz::new(inst.qubits, inst.layers).unwrap();
        let n = inst.b.len();
        let mask = vec![true; n];
        let mut tape = Tape::new();
        let tokens = inst.tokens(&mut tape);
        let b = tape.constant(inst.b.clone(), &[n]).unwrap();
        let bn = l1_normalize(&mut tape, b, &mask).unwrap();
        let ct = tape.constant(inst.coeffs.clone(), &[inst.coeffs.len()]).unwrap();
        let out = apply_polynomial(&mut tape, &ansatz, bn, &tokens, &mask, ct).unwrap();
        let zero = Statevector::zero_state(inst.qubits).unwrap();
        let expected = dense::matrix_polynomial_apply(&inst.dense_m(), &inst.coeffs, zero.amplitudes());
        dense::max_abs_diff(tape.value(out), &expected)
    }

    #[test]
    fn polynomial_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = Instance::random(&mut rng, 2, 1, 2, 3);
        assert!(polynomial_error(&inst) <= 1e-10);
    }

    #[test]
    fn polynomial_oracle_sweep() {
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = rng.random_range(2..=3);
            let n = rng.random_range(1..=4);
            let d = rng.random_range(1..=4);
            let layers = rng.random_range(1..=2);
            let inst = Instance::random(&mut rng, q, layers, n, d);
            let err = polynomial_error(&inst);
            assert!(err <= 1e-10, "seed {seed}: {err:e}");
        }
    }

    #[test]
    fn contraction_bound() {
        for seed in 0..30u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = Instance::random(&mut rng, 3, 2, 5, 1);
            let s = dense::random_state(&mut rng, 3);
            let out = dense::apply(&inst.dense_m(), &s);
            let norm = out.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            assert!(norm <= 1.0 + 1e-10);
        }
    }

    fn mix(inst: &Instance, phi: &[f64], mask: &[bool]) -> (Vec<C64>, f64, Vec<C64>) {
        let mixer = Mixer::new(inst.qubits, inst.layers, 1).unwrap();
        let mut tape = Tape::new();
        let tokens = inst.tokens(&mut tape);
        let params = MixerParams {
            b: tape.constant(inst.b.clone(), &[inst.b.len()]).unwrap(),
            c: tape.constant(inst.coeffs.clone(), &[inst.coeffs.len()]).unwrap(),
            phi: tape.constant_real(phi, &[phi.len()]).unwrap(),
        };
        let out = mixer.mix_window(&mut tape, &tokens, &params, mask, 0).unwrap();
        (
            tape.value(out.features).to_vec(),
            tape.scalar_value(out.pre_norm).re,
            tape.value(out.state).to_vec(),
        )
    }

    #[test]
    fn identity_polynomial_reads_zero_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut inst = Instance::random(&mut rng, 3, 1, 4, 2);
        inst.coeffs = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let (features, pre_norm, _) = mix(&inst, &[0.0; 12], &[true; 4]);
        assert_eq!(pre_norm, 1.0);
        let expected: Vec<C64> = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0].iter().map(|&x| c(x, 0.0)).collect();
        assert_eq!(features, expected);
    }

    #[test]
    fn single_token_pre_norm_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let inst = Instance::random(&mut rng, 2, 1, 1, 3);
        let (_, pre_norm, _) = mix(&inst, &random_angles(&mut rng, 8), &[true]);
        // b̃ = b/|b| is a pure phase, so M = e^{iα} U
        let zero = Statevector::zero_state(2).unwrap();
        let v = dense::matrix_polynomial_apply(&inst.dense_m(), &inst.coeffs, zero.amplitudes());
        let expected: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        assert!((pre_norm - expected).abs() <= 1e-12);
    }

    #[test]
    fn joint_permutation_is_bitwise_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let inst = Instance::random(&mut rng, 3, 1, 5, 3);
        let phi = random_angles(&mut rng, 12);
        let mask = [true, true, false, true, true];
        let base = mix(&inst, &phi, &mask);
        for _ in 0..10 {
            let mut perm: Vec<usize> = (0..5).collect();
            for i in (1..5).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let permuted = Instance {
                qubits: 3,
                layers: 1,
                b: perm.iter().map(|&j| inst.b[j]).collect(),
                angles: perm.iter().map(|&j| inst.angles[j].clone()).collect(),
                coeffs: inst.coeffs.clone(),
            };
            let pmask: Vec<bool> = perm.iter().map(|&j| mask[j]).collect();
            let out = mix(&permuted, &phi, &pmask);
            assert_eq!(out.1.to_bits(), base.1.to_bits());
            assert!(out.0.iter().zip(&base.0).all(|(a, b)| a.re.to_bits() == b.re.to_bits()));
            assert!(out.2.iter().zip(&base.2).all(|(a, b)| a == b));
        }
    }

    #[test]
    fn collapsed_state_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut inst = Instance::random(&mut rng, 2, 1, 2, 1);
        inst.coeffs = vec![c(0.0, 0.0), c(0.0, 0.0)];
        let mixer = Mixer::new(2, 1, 1).unwrap();
        let mut tape = Tape::new();
        let tokens = inst.tokens(&mut tape);
        let params = MixerParams {
            b: tape.constant(inst.b.clone(), &[2]).unwrap(),
            c: tape.constant(inst.coeffs.clone(), &[2]).unwrap(),
            phi: tape.constant_real(&[0.0; 8], &[8]).unwrap(),
        };
        let err = mixer.mix_window(&mut tape, &tokens, &params, &[true, true], 7).unwrap_err();
        assert!(matches!(err, Error::CollapsedState { window: 7, .. }));
    }

    #[test]
    fn gradients_of_b_c_phi_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let inst = Instance::random(&mut rng, 4, 1, 4, 3);
        let phi = random_angles(&mut rng, 16);
        let w: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mixer = Mixer::new(4, 1, 1).unwrap();
        let mask = [true, true, true, false];

        let run = |b: &[C64], cc: &[C64], phi: &[f64], track: bool| {
            let mut tape = Tape::new();
            let tokens = inst.tokens(&mut tape);
            let mk = |tape: &mut Tape, v: Vec<C64>| {
                let n = v.len();
                if track { tape.leaf(v, &[n]).unwrap() } else { tape.constant(v, &[n]).unwrap() }
            };
            let params = MixerParams {
                b: mk(&mut tape, b.to_vec()),
                c: mk(&mut tape, cc.to_vec()),
                phi: mk(&mut tape, phi.iter().map(|&x| c(x, 0.0)).collect()),
            };
            let out = mixer.mix_window(&mut tape, &tokens, &params, &mask, 0).unwrap();
            let wf = tape.mul_const(out.features, w.iter().map(|&x| c(x, 0.0)).collect()).unwrap();
            let s = tape.sum(wf);
            let pn = tape.add_const(out.pre_norm, c(-0.5, 0.0));
            let sq = tape.mul(pn, pn).unwrap();
            let l = tape.add(s, sq).unwrap();
            let l = tape.real(l);
            let value = tape.scalar_value(l).re;
            if track {
                tape.backward(l).unwrap();
                let g = |t: ComplexTensor| tape.grad(t).unwrap().to_vec();
                (value, vec![g(params.b), g(params.c), g(params.phi)])
            } else {
                (value, vec![])
            }
        };

        let (_, grads) = run(&inst.b, &inst.coeffs, &phi, true);
        let h = 1e-5;
        let check = |analytic: f64, plus: f64, minus: f64| {
            let fd = (plus - minus) / (2.0 * h);
            assert!(
                (analytic - fd).abs() <= 1e-6 || (analytic - fd).abs() / fd.abs().max(analytic.abs()) <= 1e-4,
                "{analytic} vs {fd}"
            );
        };
        for k in 0..inst.b.len() {
            for (dir, a) in [(c(h, 0.0), grads[0][k].re), (c(0.0, h), grads[0][k].im)] {
                let mut p = inst.b.clone();
                p[k] += dir;
                let mut m = inst.b.clone();
                m[k] -= dir;
                check(a, run(&p, &inst.coeffs, &phi, false).0, run(&m, &inst.coeffs, &phi, false).0);
            }
        }
        for k in 0..inst.coeffs.len() {
            for (dir, a) in [(c(h, 0.0), grads[1][k].re), (c(0.0, h), grads[1][k].im)] {
                let mut p = inst.coeffs.clone();
                p[k] += dir;
                let mut m = inst.coeffs.clone();
                m[k] -= dir;
                check(a, run(&inst.b, &p, &phi, false).0, run(&inst.b, &m, &phi, false).0);
            }
        }
        for k in 0..phi.len() {
            let mut p = phi.clone();
            p[k] += h;
            let mut m = phi.clone();
            m[k] -= h;
            check(grads[2][k].re, run(&inst.b, &inst.coeffs, &p, false).0, run(&inst.b, &inst.coeffs, &m, false).0);
        }
    }
}
