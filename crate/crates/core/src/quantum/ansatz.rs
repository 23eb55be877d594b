//! The ansatz-14 circuit template.
//!
//! One layer is four sublayers, each carrying `q` angles:
//!
//! 1. `RY` on every qubit (angle slot = qubit)
//! 2. ring A: `CRX` with control `i`, target `(i+1) mod q`, applied for
//!    `i = q−1` down to `0` (angle slot = control)
//! 3. `RY` on every qubit
//! 4. ring B: `CRX` with control `i`, target `(i−1) mod q`, applied for
//!    `i = 0` up to `q−1` (angle slot = control)
//!
//! `ℓ` layers therefore consume `4ℓq` angles, laid out layer by layer.

use std::sync::Arc;

use crate::autodiff::{ComplexTensor, CustomOp, Tape, C64};
use crate::error::{Error, Result};

use super::gates;
use super::statevector::{check_qubits, Statevector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Ry { target: usize },
    Crx { control: usize, target: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScheduledGate {
    pub gate: Gate,
    pub angle: usize,
}

/// Angle vector for one ansatz instantiation.
#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzAngles(Vec<f64>);

impl AnsatzAngles {
    pub fn new(values: Vec<f64>, qubits: usize, layers: usize) -> Result<Self> {
        let expected = angle_count(qubits, layers);
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "ansatz with {qubits} qubits and {layers} layers needs {expected} angles, got {}",
                values.len()
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(qubits: usize, layers: usize) -> Self {
        Self(vec![0.0; angle_count(qubits, layers)])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn angle_count(qubits: usize, layers: usize) -> usize {
    4 * layers * qubits
}

/// Gate schedule for a fixed register size and depth.
#[derive(Clone, Debug)]
pub struct Ansatz {
    qubits: usize,
    layers: usize,
    schedule: Arc<[ScheduledGate]>,
}

impl Ansatz {
    pub fn new(qubits: usize, layers: usize) -> Result<Self> {
        check_qubits(qubits)?;
        if qubits < 2 {
            return Err(Error::Shape(
                "ansatz-14 requires at least 2 qubits for its entangling rings".into(),
            ));
        }
        let q = qubits;
        let mut schedule = Vec::with_capacity(angle_count(q, layers));
        for layer in 0..layers {
            let base = 4 * q * layer;
            for i in 0..q {
                schedule.push(ScheduledGate {
                    gate: Gate::Ry { target: i },
                    angle: base + i,
                });
            }
            for i in (0..q).rev() {
                schedule.push(ScheduledGate {
                    gate: Gate::Crx {
                        control: i,
                        target: (i + 1) % q,
                    },
                    angle: base + q + i,
                });
            }
            for i in 0..q {
                schedule.push(ScheduledGate {
                    gate: Gate::Ry { target: i },
                    angle: base + 2 * q + i,
                });
            }
            for i in 0..q {
                schedule.push(ScheduledGate {
                    gate: Gate::Crx {
                        control: i,
                        target: (i + q - 1) % q,
                    },
                    angle: base + 3 * q + i,
                });
            }
        }
        Ok(Self {
            qubits,
            layers,
            schedule: schedule.into(),
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn angle_count(&self) -> usize {
        angle_count(self.qubits, self.layers)
    }

    pub fn schedule(&self) -> &[ScheduledGate] {
        &self.schedule
    }

    fn check(&self, amps: usize, angles: usize) -> Result<()> {
        if amps != 1 << self.qubits {
            return Err(Error::Shape(format!(
                "{amps} amplitudes for a {}-qubit ansatz",
                self.qubits
            )));
        }
        if angles != self.angle_count() {
            return Err(Error::Shape(format!(
                "ansatz with {} qubits and {} layers needs {} angles, got {angles}",
                self.qubits,
                self.layers,
                self.angle_count()
            )));
        }
        Ok(())
    }

    /// Applies the circuit in place. Lengths must already be validated.
    pub fn apply_in_place(&self, amps: &mut [C64], angles: &[f64]) {
        for g in self.schedule.iter() {
            let theta = angles[g.angle];
            match g.gate {
                Gate::Ry { target } => gates::ry(amps, target, theta),
                Gate::Crx { control, target } => gates::crx(amps, control, target, theta),
            }
        }
    }

    pub fn apply(&self, s: &Statevector, angles: &AnsatzAngles) -> Result<Statevector> {
        self.check(s.amplitudes().len(), angles.as_slice().len())?;
        let mut amps = s.amplitudes().to_vec();
        self.apply_in_place(&mut amps, angles.as_slice());
        Statevector::from_amplitudes(amps)
    }

    /// Records `U(angles)·state` on the tape. `angles` is read through its
    /// real parts and receives a real gradient.
    pub fn apply_on_tape(&self, tape: &mut Tape, state: ComplexTensor, angles: ComplexTensor) -> Result<ComplexTensor> {
        self.check(tape.value(state).len(), tape.value(angles).len())?;
        let theta: Vec<f64> = tape.value(angles).iter().map(|a| a.re).collect();
        let mut out = tape.value(state).to_vec();
        self.apply_in_place(&mut out, &theta);
        let op = AnsatzAdjoint {
            schedule: Arc::clone(&self.schedule),
        };
        let len = out.len();
        tape.custom(Box::new(op), &[state, angles], out, &[len])
    }
}

/// Adjoint-method backward: walks the schedule in reverse, uncomputing the
/// state and pulling the cotangent back one gate at a time, so memory stays
/// at two statevectors regardless of depth.
struct AnsatzAdjoint {
    schedule: Arc<[ScheduledGate]>,
}

impl CustomOp for AnsatzAdjoint {
    fn name(&self) -> &'static str {
        "ansatz14"
    }

    fn backward(&self, inputs: &[&[C64]], output: &[C64], grad_out: &[C64]) -> Vec<Option<Vec<C64>>> {
        let angles = inputs[1];
        let mut psi = output.to_vec();
        let mut lambda = grad_out.to_vec();
        let mut grad_angles = vec![C64::new(0.0, 0.0); angles.len()];
        for g in self.schedule.iter().rev() {
            let theta = angles[g.angle].re;
            match g.gate {
                Gate::Ry { target } => {
                    grad_angles[g.angle].re += gates::ry_generator_overlap(&lambda, &psi, target);
                    gates::ry(&mut psi, target, -theta);
                    gates::ry(&mut lambda, target, -theta);
                }
                Gate::Crx { control, target } => {
                    grad_angles[g.angle].re += gates::crx_generator_overlap(&lambda, &psi, control, target);
                    gates::crx(&mut psi, control, target, -theta);
                    gates::crx(&mut lambda, control, target, -theta);
                }
            }
        }
        vec![Some(lambda), Some(grad_angles)]
    }
}

/// Value-level convenience wrapper.
pub fn apply_ansatz14(s: &Statevector, angles: &AnsatzAngles, layers: usize) -> Result<Statevector> {
    Ansatz::new(s.qubits(), layers)?.apply(s, angles)
}
