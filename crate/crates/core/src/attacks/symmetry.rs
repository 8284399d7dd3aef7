//! Symmetrization of an arbitrary probe over the symmetry group of the
//! four signals.
//!
//! The group is generated (up to phases) by the bit flip `X`, which swaps
//! `u ↔ v` and `ū ↔ v̄`, and the Hadamard `H`, which fixes `u`, negates `ū`
//! and swaps `v ↔ v̄`. Eve runs the conjugated attack `R_ℓ† U R_ℓ` with a
//! uniformly random label `ℓ` kept in an 8-dimensional register.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{EntanglingProbe, ProbeGeometry};
use crate::error::{Error, Result};
use crate::linalg::{haar_unitary, real, DensityMatrix, Ket, Operator};
use crate::signals::Basis;

/// Tolerance used to identify group elements up to a phase.
const PHASE_TOL: f64 = 1e-9;

/// A finite group of 2×2 unitaries modulo phases.
#[derive(Debug, Clone)]
pub struct SymmetryGroup {
    elements: Vec<Operator>,
    /// `table[l][g] = m` with `R_l R_g ∝ R_m`.
    table: Vec<Vec<usize>>,
}

impl SymmetryGroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    /// Index of `R_l R_g`.
    pub fn product(&self, l: usize, g: usize) -> usize {
        self.table[l][g]
    }
}

fn same_ray(a: &Operator, b: &Operator) -> bool {
    (a.dagger().matmul(b).trace().norm() - 2.0).abs() < PHASE_TOL
}

fn find(elements: &[Operator], m: &Operator) -> Option<usize> {
    elements.iter().position(|e| same_ray(e, m))
}

/// Closure of `generators` under multiplication, identity first.
fn generate(generators: &[Operator]) -> SymmetryGroup {
    let mut elements = vec![Operator::identity(2)];
    let mut frontier = 0;
    while frontier < elements.len() {
        let current = elements[frontier].clone();
        for g in generators {
            let next = current.matmul(g);
            if find(&elements, &next).is_none() {
                elements.push(next);
            }
        }
        frontier += 1;
    }
    let table = elements
        .iter()
        .map(|l| {
            elements
                .iter()
                .map(|g| find(&elements, &l.matmul(g)).expect("closed under products"))
                .collect()
        })
        .collect();
    SymmetryGroup { elements, table }
}

/// The order-8 group preserving the four signal rays.
pub fn bb84_group() -> SymmetryGroup {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let x = Operator::from_real_rows(2, &[0.0, 1.0, 1.0, 0.0]).expect("2x2");
    let had = Operator::from_real_rows(2, &[h, h, h, -h]).expect("2x2");
    generate(&[x, had])
}

/// A symmetrized attack on signal ⊗ probe ⊗ label.
#[derive(Debug, Clone)]
pub struct Symmetrized {
    pub group: SymmetryGroup,
    pub unitary: Operator,
    pub initial: Ket,
    probe_dim: usize,
}

impl Symmetrized {
    /// Dimension of the enlarged probe (original probe ⊗ label).
    pub fn probe_dim(&self) -> usize {
        self.probe_dim * self.group.order()
    }

    /// `R̃_g = R_g† ⊗ I ⊗ X_g` where `X_g|ℓ⟩ = |ℓg⟩`.
    pub fn symmetry(&self, g: usize) -> Operator {
        let n = self.group.order();
        let mut perm = Operator::zeros(n);
        for l in 0..n {
            perm.set(self.group.product(l, g), l, real(1.0));
        }
        self.group.elements[g]
            .dagger()
            .tensor(&Operator::identity(self.probe_dim))
            .tensor(&perm)
    }

    pub fn probe(&self) -> Result<EntanglingProbe> {
        EntanglingProbe::from_unitary(&self.unitary, &self.initial)
    }
}

/// Builds `Ũ = Σ_ℓ (Q_ℓ† U Q_ℓ) ⊗ |ℓ⟩⟨ℓ|` with `Q_ℓ = R_ℓ ⊗ I`, and the
/// initial probe `w ⊗ Σ_ℓ|ℓ⟩/√8`.
pub fn symmetrize(u: &Operator, w: &Ket) -> Result<Symmetrized> {
    let d = w.dim();
    if u.dim() != 2 * d {
        return Err(Error::DimensionMismatch {
            expected: 2 * d,
            found: u.dim(),
        });
    }
    let group = bb84_group();
    let n = group.order();
    let mut unitary = Operator::zeros(2 * d * n);
    for (l, r) in group.elements.iter().enumerate() {
        let q = r.tensor(&Operator::identity(d));
        let conj = q.dagger().matmul(u).matmul(&q);
        let label = Ket::basis(n, l).projector();
        unitary = &unitary + &conj.tensor(&label);
    }
    let uniform = Ket::new(vec![real(1.0 / (n as f64).sqrt()); n])?;
    Ok(Symmetrized {
        group,
        unitary,
        initial: w.tensor(&uniform),
        probe_dim: d,
    })
}

/// Invariance and orthogonality residuals of a symmetrized attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub group_order: usize,
    /// `max_g ‖R̃_g Ũ R̃_g† − Ũ‖` (entrywise max).
    pub unitary_residual: f64,
    /// `max_g ‖R̂_g ω̃ R̂_g† − ω̃‖` for the probe part of `R̃_g`.
    pub state_residual: f64,
    /// `│⟨Φ̃00│Φ̃01⟩│`.
    pub orthogonality: f64,
    /// `│⟨Φ̃01│Φ̃10⟩ + ⟨Φ̃00│Φ̃11⟩ − (1 − 2‖Φ̃01‖²)│`.
    pub sum_rule: f64,
}

impl SymmetryReport {
    pub fn max_residual(&self) -> f64 {
        self.unitary_residual
            .max(self.state_residual)
            .max(self.orthogonality)
            .max(self.sum_rule)
    }

    fn worst(self, other: SymmetryReport) -> SymmetryReport {
        SymmetryReport {
            group_order: self.group_order,
            unitary_residual: self.unitary_residual.max(other.unitary_residual),
            state_residual: self.state_residual.max(other.state_residual),
            orthogonality: self.orthogonality.max(other.orthogonality),
            sum_rule: self.sum_rule.max(other.sum_rule),
        }
    }
}

/// Symmetrizes `u` and measures how well the result is invariant.
pub fn symmetrize_and_verify(u: &Operator, w: &Ket) -> Result<(Symmetrized, SymmetryReport)> {
    if !u.is_unitary(1e-10) {
        return Err(Error::NotUnitary {
            residual: u.unitarity_residual(),
        });
    }
    let sym = symmetrize(u, w)?;
    let n = sym.group.order();
    let omega = DensityMatrix::from_ket(&sym.initial);
    let mut unitary_residual: f64 = 0.0;
    let mut state_residual: f64 = 0.0;
    for g in 0..n {
        let r = sym.symmetry(g);
        let moved = r.matmul(&sym.unitary).matmul(&r.dagger());
        unitary_residual = unitary_residual.max(moved.max_abs_diff(&sym.unitary));

        let mut perm = Operator::zeros(n);
        for l in 0..n {
            perm.set(sym.group.product(l, g), l, real(1.0));
        }
        let probe_part = Operator::identity(sym.probe_dim).tensor(&perm);
        let moved = omega.conjugate_by(&probe_part);
        state_residual = state_residual.max(moved.as_operator().max_abs_diff(omega.as_operator()));
    }
    let phi = sym.probe()?.phi();
    let orthogonality = phi[0][0].inner(&phi[0][1]).norm();
    let sum = phi[0][1].inner(&phi[1][0]) + phi[0][0].inner(&phi[1][1]);
    let sum_rule = (sum - real(1.0 - 2.0 * phi[0][1].norm_sqr())).norm();
    Ok((
        sym,
        SymmetryReport {
            group_order: n,
            unitary_residual,
            state_residual,
            orthogonality,
            sum_rule,
        },
    ))
}

/// Geometry, in `basis`, of the symmetrized version of `probe`.
pub fn symmetrized_geometry(probe: &EntanglingProbe, basis: Basis) -> Result<ProbeGeometry> {
    let (u, w) = probe.to_unitary();
    let sym = symmetrize(&u, &w)?;
    ProbeGeometry::from_attack(&sym.probe()?, basis)
}

/// Symmetrizes `trials` Haar-random unitaries on a qubit ⊗ `probe_dim`
/// probe and returns the worst residuals seen.
pub fn verify_random_symmetrization(
    trials: usize,
    probe_dim: usize,
    seed: u64,
) -> Result<SymmetryReport> {
    if trials == 0 {
        return Err(Error::EmptyInput);
    }
    if probe_dim == 0 {
        return Err(Error::EmptyDimension);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Ket::basis(probe_dim, 0);
    let mut worst: Option<SymmetryReport> = None;
    for _ in 0..trials {
        let u = haar_unitary(2 * probe_dim, &mut rng);
        let (_, report) = symmetrize_and_verify(&u, &w)?;
        worst = Some(match worst {
            None => report,
            Some(prev) => prev.worst(report),
        });
    }
    Ok(worst.expect("at least one trial"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::encode;

    #[test]
    fn group_has_order_eight_and_permutes_signal_rays() {
        let g = bb84_group();
        assert_eq!(g.order(), 8);
        let rays: Vec<Ket> = Basis::ALL
            .iter()
            .flat_map(|&b| [encode(b, false), encode(b, true)])
            .collect();
        for r in g.elements() {
            for s in &rays {
                let image = r.apply(s);
                let hits = rays
                    .iter()
                    .filter(|t| (t.inner(&image).norm() - 1.0).abs() < 1e-12);
                assert_eq!(hits.count(), 1);
            }
        }
    }

    #[test]
    fn multiplication_table_is_a_latin_square() {
        let g = bb84_group();
        for l in 0..8 {
            let mut row: Vec<usize> = (0..8).map(|k| g.product(l, k)).collect();
            row.sort_unstable();
            assert_eq!(row, (0..8).collect::<Vec<_>>());
        }
    }

    #[test]
    fn random_unitaries_become_symmetric() {
        for d in [1, 2, 3] {
            let report = verify_random_symmetrization(10, d, 7 + d as u64).unwrap();
            assert!(report.max_residual() < 1e-10, "d={d}: {report:?}");
        }
    }

    #[test]
    fn symmetrized_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = haar_unitary(4, &mut rng);
        let sym = symmetrize(&u, &Ket::basis(2, 0)).unwrap();
        assert!(sym.unitary.is_unitary(1e-10));
        assert!((sym.initial.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_unitary() {
        let m = Operator::from_real_rows(2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(symmetrize_and_verify(&m, &Ket::basis(1, 0)).is_err());
    }
}
