//! Statevector simulation of the data register.

mod ansatz;
pub mod dense;
mod gates;
mod readout;
mod statevector;

pub use ansatz::{angle_count, apply_ansatz14, Ansatz, AnsatzAngles, Gate, ScheduledGate};
pub use readout::{pauli_expectations, pauli_readout_on_tape};
pub use statevector::{apply_crx, apply_ry, zero_state, Statevector, MAX_QUBITS};

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ry_matches_kronecker_oracle_on_every_wire() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for q in 1..=4 {
            for k in 0..q {
                let theta = rng.random_range(-3.0..3.0);
                let amps = dense::random_state(&mut rng, q);
                let s = Statevector::from_amplitudes(amps.clone()).unwrap();
                let got = apply_ry(&s, k, theta).unwrap();
                let expected = dense::apply(&dense::single_qubit(q, k, &dense::ry(theta)), &amps);
                assert!(dense::max_abs_diff(got.amplitudes(), &expected) <= 1e-12);
            }
        }
    }

    #[test]
    fn crx_matches_kronecker_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let amps = dense::random_state(&mut rng, 3);
        let s = Statevector::from_amplitudes(amps.clone()).unwrap();
        for (control, target) in [(0, 1), (1, 0), (2, 0), (0, 2), (1, 2), (2, 1)] {
            let got = apply_crx(&s, control, target, 0.7).unwrap();
            let expected = dense::apply(&dense::controlled(3, control, target, &dense::rx(0.7)), &amps);
            assert!(dense::max_abs_diff(got.amplitudes(), &expected) <= 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gates_preserve_norm(seed in any::<u64>(), q in 2usize..6, layers in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let amps = dense::random_state(&mut rng, q);
            let theta: Vec<f64> = (0..angle_count(q, layers)).map(|_| rng.random_range(-6.3..6.3)).collect();
            let s = Statevector::from_amplitudes(amps).unwrap();
            let out = apply_ansatz14(&s, &AnsatzAngles::new(theta, q, layers).unwrap(), layers).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn expectations_are_bounded(seed in any::<u64>(), q in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = Statevector::from_amplitudes(dense::random_state(&mut rng, q)).unwrap();
            for e in pauli_expectations(&s).unwrap() {
                prop_assert!(e.abs() <= 1.0 + 1e-10);
            }
        }
    }
}
