use crate::autodiff::C64;
use crate::error::{Error, Result};

use super::gates;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 14;

/// Amplitudes of a `q`-qubit register, little-endian basis order.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    qubits: usize,
    amps: Vec<C64>,
}

pub(crate) fn check_qubits(qubits: usize) -> Result<()> {
    if qubits == 0 || qubits > MAX_QUBITS {
        return Err(Error::Capacity {
            qubits,
            max: MAX_QUBITS,
        });
    }
    Ok(())
}

impl Statevector {
    /// `|0…0⟩`.
    pub fn zero_state(qubits: usize) -> Result<Self> {
        check_qubits(qubits)?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << qubits];
        amps[0] = C64::new(1.0, 0.0);
        Ok(Self { qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n = amps.len();
        if !n.is_power_of_two() {
            return Err(Error::Shape(format!("{n} amplitudes is not a power of two")));
        }
        let qubits = n.trailing_zeros() as usize;
        check_qubits(qubits)?;
        Ok(Self { qubits, amps })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.qubits {
            return Err(Error::QubitIndex {
                index,
                qubits: self.qubits,
            });
        }
        Ok(())
    }

    pub fn ry(&mut self, qubit: usize, angle: f64) -> Result<()> {
        self.check_index(qubit)?;
        gates::ry(&mut self.amps, qubit, angle);
        Ok(())
    }

    pub fn crx(&mut self, control: usize, target: usize, angle: f64) -> Result<()> {
        self.check_index(control)?;
        self.check_index(target)?;
        if control == target {
            return Err(Error::Wiring(control));
        }
        gates::crx(&mut self.amps, control, target, angle);
        Ok(())
    }
}

pub fn zero_state(qubits: usize) -> Result<Statevector> {
    Statevector::zero_state(qubits)
}

pub fn apply_ry(s: &Statevector, qubit: usize, angle: f64) -> Result<Statevector> {
    let mut out = s.clone();
    out.ry(qubit, angle)?;
    Ok(out)
}

pub fn apply_crx(s: &Statevector, control: usize, target: usize, angle: f64) -> Result<Statevector> {
    let mut out = s.clone();
    out.crx(control, target, angle)?;
    Ok(out)
}
