//! The CNOT probe: controlled-NOT from the signal (symmetric basis) onto a
//! two-dimensional probe prepared in a tilted state.

use super::{symmetrize, symmetrized_geometry, EntanglingProbe, ProbeGeometry};
use crate::error::{Error, Result};
use crate::linalg::{Ket, Operator};
use crate::signals::{AttackExecutor, Basis};

#[derive(Debug, Clone, PartialEq)]
pub struct SbProbe {
    e: f64,
    probe: EntanglingProbe,
    unitary: Operator,
    initial: Ket,
}

/// CNOT attack inducing QBER `e ∈ [0, ½]`.
///
/// The probe starts in `[(C + S)|0⟩ + (C − S)|1⟩]/√2` with `S = √(2e)`,
/// `C = √(1 − 2e)`.
pub fn sb_attack(e: f64) -> Result<SbProbe> {
    if !(0.0..=0.5).contains(&e) {
        return Err(Error::OutOfRange {
            name: "e",
            value: e,
            range: "[0, 1/2]",
        });
    }
    let s = (2.0 * e).sqrt();
    let c = (1.0 - 2.0 * e).sqrt();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let initial = Ket::from_real(&[h * (c + s), h * (c - s)])?;
    #[rustfmt::skip]
    let cnot = Operator::from_real_rows(4, &[
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 1.0, 0.0,
    ])?;
    let probe = EntanglingProbe::from_unitary(&cnot, &initial)?;
    Ok(SbProbe {
        e,
        probe,
        unitary: cnot,
        initial,
    })
}

impl SbProbe {
    pub fn e(&self) -> f64 {
        self.e
    }

    pub fn probe(&self) -> &EntanglingProbe {
        &self.probe
    }

    pub fn unitary(&self) -> &Operator {
        &self.unitary
    }

    pub fn initial_probe(&self) -> &Ket {
        &self.initial
    }

    /// Probe vectors of the bare CNOT. Their error vectors are not
    /// orthogonal to the correct ones, so this is not a symmetric geometry.
    pub fn raw_geometry(&self, basis: Basis) -> Result<ProbeGeometry> {
        ProbeGeometry::from_attack(&self.probe, basis)
    }

    /// Geometry of the symmetrized attack, which realises `δ = 2e − ½`.
    pub fn geometry(&self) -> Result<ProbeGeometry> {
        symmetrized_geometry(&self.probe, Basis::U)
    }

    /// The symmetrized attack itself, on a 16-dimensional probe.
    pub fn symmetrized_probe(&self) -> Result<EntanglingProbe> {
        symmetrize(&self.unitary, &self.initial)?.probe()
    }
}

impl AttackExecutor for SbProbe {
    fn probe_dim(&self) -> usize {
        2
    }

    fn interact(&self, signal: &Ket) -> Ket {
        self.probe.interact(signal)
    }
}
