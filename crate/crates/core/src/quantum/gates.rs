//! In-place gate kernels over raw amplitude slices.
//!
//! Basis indices are little-endian: qubit `k` is bit `k` of the index.
//! Kernels assume the caller validated qubit indices.

use crate::autodiff::C64;

/// Visits every amplitude pair `(i, i | 1<<target)` with bit `target` clear.
#[inline]
fn for_each_pair(amps: &mut [C64], target: usize, mut f: impl FnMut(&mut C64, &mut C64)) {
    let stride = 1usize << target;
    for block in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
            f(a0, a1);
        }
    }
}

/// Same as [`for_each_pair`] restricted to indices whose `control` bit is set.
#[inline]
fn for_each_controlled_pair(
    amps: &mut [C64],
    control: usize,
    target: usize,
    mut f: impl FnMut(&mut C64, &mut C64),
) {
    let stride = 1usize << target;
    let cmask = 1usize << control;
    for (b, block) in amps.chunks_exact_mut(2 * stride).enumerate() {
        let base = b * 2 * stride;
        let (lo, hi) = block.split_at_mut(stride);
        for (off, (a0, a1)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
            if (base + off) & cmask != 0 {
                f(a0, a1);
            }
        }
    }
}

/// `RY(θ) = [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]]`.
pub fn ry(amps: &mut [C64], target: usize, angle: f64) {
    let (s, c) = (angle / 2.0).sin_cos();
    for_each_pair(amps, target, |a0, a1| {
        let (x, y) = (*a0, *a1);
        *a0 = x * c - y * s;
        *a1 = x * s + y * c;
    });
}

/// `RX(θ) = [[cos θ/2, −i sin θ/2], [−i sin θ/2, cos θ/2]]` on `target`
/// where `control` is 1.
pub fn crx(amps: &mut [C64], control: usize, target: usize, angle: f64) {
    let (s, c) = (angle / 2.0).sin_cos();
    let mis = C64::new(0.0, -s);
    for_each_controlled_pair(amps, control, target, |a0, a1| {
        let (x, y) = (*a0, *a1);
        *a0 = x * c + y * mis;
        *a1 = x * mis + y * c;
    });
}

/// `Re⟨λ| (−iY/2) |ψ⟩` on `target`: the RY angle derivative evaluated at
/// the gate output, since `Y` commutes with `RY`.
pub fn ry_generator_overlap(lambda: &[C64], psi: &[C64], target: usize) -> f64 {
    let stride = 1usize << target;
    let mut acc = 0.0;
    for (lb, pb) in lambda.chunks_exact(2 * stride).zip(psi.chunks_exact(2 * stride)) {
        for k in 0..stride {
            let (l0, l1) = (lb[k], lb[k + stride]);
            let (p0, p1) = (pb[k], pb[k + stride]);
            // (−iY/2)(p0, p1) = (−p1/2, p0/2)
            acc += (l0.conj() * (-p1) + l1.conj() * p0).re;
        }
    }
    0.5 * acc
}

/// `Re⟨λ| (|1⟩⟨1|_c ⊗ −iX/2) |ψ⟩`: the CRX angle derivative at the gate output.
pub fn crx_generator_overlap(lambda: &[C64], psi: &[C64], control: usize, target: usize) -> f64 {
    let stride = 1usize << target;
    let cmask = 1usize << control;
    let mut acc = 0.0;
    for (b, (lb, pb)) in lambda.chunks_exact(2 * stride).zip(psi.chunks_exact(2 * stride)).enumerate() {
        let base = b * 2 * stride;
        for k in 0..stride {
            if (base + k) & cmask == 0 {
                continue;
            }
            let (l0, l1) = (lb[k], lb[k + stride]);
            let (p0, p1) = (pb[k], pb[k + stride]);
            // (−iX)(p0, p1) = (−i p1, −i p0); Re(conj(l)·(−i p)) = Im(conj(l)·p)
            acc += (l0.conj() * p1).im + (l1.conj() * p0).im;
        }
    }
    0.5 * acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ry_and_inverse_cancel() {
        let mut amps = vec![C64::new(0.6, 0.1), C64::new(-0.2, 0.3), C64::new(0.5, 0.0), C64::new(0.1, -0.4)];
        let orig = amps.clone();
        ry(&mut amps, 1, 0.83);
        ry(&mut amps, 1, -0.83);
        for (a, b) in amps.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn crx_acts_only_under_control() {
        // |q1 q0> = |0 1>: control qubit 1 is clear, nothing happens
        let mut amps = vec![C64::new(0.0, 0.0); 4];
        amps[1] = C64::new(1.0, 0.0);
        crx(&mut amps, 1, 0, 1.3);
        assert_eq!(amps[1], C64::new(1.0, 0.0));
    }
}
