//! Entangling-probe attacks.
//!
//! A symmetric attack is described by two reals, the QBER `e` and the
//! imbalance `delta`, which fix every inner product between the four probe
//! vectors `ψ_ab` left behind when Alice sends `a` and Bob reads `b`:
//!
//! | product                 | value          |
//! |-------------------------|----------------|
//! | `‖ψ_uu‖² = ‖ψ_ūū‖²`     | `1 − e`        |
//! | `‖ψ_uū‖² = ‖ψ_ūu‖²`     | `e`            |
//! | `⟨ψ_uu│ψ_ūū⟩`           | `½ − e − δ`    |
//! | `⟨ψ_uū│ψ_ūu⟩`           | `½ − e + δ`    |
//! | correct ⟂ error span    | `0`            |

mod angles;
mod sb;
mod symmetry;

pub use angles::{
    angles_for_params, attack_from_angles, attack_from_x, solve_optimal_angles, Abcd, AngleAttack,
    AngleParams, SolverReport, XCoefficients, SOLVER_MAX_ITER, SOLVER_TOL,
};
pub use sb::{sb_attack, SbProbe};
pub use symmetry::{
    bb84_group, symmetrize, symmetrize_and_verify, symmetrized_geometry,
    verify_random_symmetrization, Symmetrized, SymmetryGroup, SymmetryReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complete_basis, Ket, Operator};
use crate::signals::{encode, AttackExecutor, Basis};

/// Slack allowed on the feasibility inequalities for round-off.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Tolerance used when validating probe geometries.
pub const GEOMETRY_TOL: f64 = 1e-12;

/// The two-parameter description of a symmetric attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackParams {
    pub e: f64,
    pub delta: f64,
}

impl AttackParams {
    pub fn new(e: f64, delta: f64) -> Self {
        Self { e, delta }
    }

    /// The imbalance that makes both conditional fidelities equal,
    /// `δ = −(1 − 2e)² / 2`.
    pub fn optimal(e: f64) -> Self {
        Self::new(e, -(1.0 - 2.0 * e).powi(2) / 2.0)
    }

    /// The imbalance of the CNOT attack, `δ = 2e − ½`.
    pub fn slutsky_brandt(e: f64) -> Self {
        Self::new(e, 2.0 * e - 0.5)
    }

    /// Names the first violated constraint, if any.
    pub fn violated_constraint(&self) -> Option<&'static str> {
        let AttackParams { e, delta } = *self;
        if !e.is_finite() || !delta.is_finite() {
            return Some("finite parameters");
        }
        if !(-FEASIBILITY_TOL..=0.5 + FEASIBILITY_TOL).contains(&e) {
            return Some("0 <= e <= 1/2");
        }
        if delta < -0.5 - FEASIBILITY_TOL {
            return Some("-1/2 <= delta");
        }
        if delta > 0.5 - (1.0 - 2.0 * e).abs() + FEASIBILITY_TOL {
            return Some("delta <= 1/2 - |1 - 2e|");
        }
        None
    }

    pub fn check(&self) -> Result<()> {
        match self.violated_constraint() {
            None => Ok(()),
            Some(constraint) => Err(Error::Infeasible {
                e: self.e,
                delta: self.delta,
                constraint,
            }),
        }
    }
}

/// `−½ ≤ δ ≤ ½ − |1 − 2e|` with `0 ≤ e ≤ ½`.
pub fn feasible(p: AttackParams) -> bool {
    p.violated_constraint().is_none()
}

/// The four probe vectors left by one basis, indexed by Alice's bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGeometry {
    /// `same[s] = ψ_ss` (Bob reads Alice's bit).
    same: [Ket; 2],
    /// `flipped[s] = ψ_ss̄` (Bob reads the complement).
    flipped: [Ket; 2],
}

impl ProbeGeometry {
    /// Unchecked construction; see [`ProbeGeometry::check`].
    pub fn new(same: [Ket; 2], flipped: [Ket; 2]) -> Result<Self> {
        let d = same[0].dim();
        for k in same.iter().chain(flipped.iter()) {
            if k.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: k.dim(),
                });
            }
        }
        Ok(Self { same, flipped })
    }

    /// Decomposes `attack` on the signals of `basis`:
    /// `U|a⟩|w⟩ = |a⟩ψ_aa + |ā⟩ψ_aā`.
    pub fn from_attack(attack: &dyn AttackExecutor, basis: Basis) -> Result<Self> {
        let mut same = Vec::with_capacity(2);
        let mut flipped = Vec::with_capacity(2);
        for bit in [false, true] {
            let joint = attack.interact(&encode(basis, bit));
            same.push(joint.contract_first(&encode(basis, bit))?);
            flipped.push(joint.contract_first(&encode(basis, !bit))?);
        }
        let [s0, s1]: [Ket; 2] = same.try_into().expect("two bits");
        let [f0, f1]: [Ket; 2] = flipped.try_into().expect("two bits");
        Self::new([s0, s1], [f0, f1])
    }

    pub fn probe_dim(&self) -> usize {
        self.same[0].dim()
    }

    pub fn psi_uu(&self) -> &Ket {
        &self.same[0]
    }
    pub fn psi_ubub(&self) -> &Ket {
        &self.same[1]
    }
    pub fn psi_uub(&self) -> &Ket {
        &self.flipped[0]
    }
    pub fn psi_ubu(&self) -> &Ket {
        &self.flipped[1]
    }

    /// `ψ_{s s}` for Alice's bit `s`.
    pub fn correct(&self, bit: bool) -> &Ket {
        &self.same[bit as usize]
    }

    /// `ψ_{s s̄}` for Alice's bit `s`.
    pub fn error(&self, bit: bool) -> &Ket {
        &self.flipped[bit as usize]
    }

    fn ordered(&self) -> [&Ket; 4] {
        [
            &self.same[0],
            &self.same[1],
            &self.flipped[0],
            &self.flipped[1],
        ]
    }

    /// Real part of the Gram matrix in the order `ψ_uu, ψ_ūū, ψ_uū, ψ_ūu`.
    pub fn gram(&self) -> [[f64; 4]; 4] {
        let v = self.ordered();
        let mut g = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                g[i][j] = v[i].inner(v[j]).re;
            }
        }
        g
    }

    /// Largest imaginary part in the Gram matrix.
    pub fn gram_imag_residual(&self) -> f64 {
        let v = self.ordered();
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max(v[i].inner(v[j]).im.abs());
            }
        }
        worst
    }

    /// QBER seen in this basis, averaged over Alice's bit.
    pub fn qber(&self) -> f64 {
        0.5 * (self.flipped[0].norm_sqr() + self.flipped[1].norm_sqr())
    }

    /// `(e, δ)` read off the Gram matrix.
    pub fn params(&self) -> AttackParams {
        let e = self.qber();
        let overlap = self.same[0].inner(&self.same[1]).re;
        AttackParams::new(e, 0.5 - e - overlap)
    }

    /// Largest deviation of the Gram matrix from the symmetric table at
    /// the geometry's own `(e, δ)`.
    pub fn table_residual(&self) -> f64 {
        let p = self.params();
        let expected = table_gram(p);
        let g = self.gram();
        let mut worst = self.gram_imag_residual();
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((g[i][j] - expected[i][j]).abs());
            }
        }
        worst
    }

    /// Validates the symmetric-attack invariants within `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        let g = self.gram();
        let e = self.qber();
        let fail = |what, residual: f64| {
            if residual > tol {
                Err(Error::GeometryViolation { what, residual })
            } else {
                Ok(())
            }
        };
        fail(
            "norms of the correct pair",
            (g[0][0] - (1.0 - e)).abs().max((g[1][1] - (1.0 - e)).abs()),
        )?;
        fail(
            "norms of the error pair",
            (g[2][2] - e).abs().max((g[3][3] - e).abs()),
        )?;
        let mut cross: f64 = 0.0;
        for i in 0..2 {
            for j in 2..4 {
                cross = cross.max(g[i][j].abs());
            }
        }
        fail("orthogonality of correct and error spans", cross)?;
        fail("reality of inner products", self.gram_imag_residual())?;
        let p = self.params();
        fail(
            "sum of intra-span products",
            (g[2][3] - (0.5 - p.e + p.delta)).abs(),
        )?;
        Ok(())
    }
}

/// Gram matrix prescribed by `(e, δ)`, order `ψ_uu, ψ_ūū, ψ_uū, ψ_ūu`.
pub fn table_gram(p: AttackParams) -> [[f64; 4]; 4] {
    let AttackParams { e, delta } = p;
    let eq = 0.5 - e - delta;
    let ne = 0.5 - e + delta;
    [
        [1.0 - e, eq, 0.0, 0.0],
        [eq, 1.0 - e, 0.0, 0.0],
        [0.0, 0.0, e, ne],
        [0.0, 0.0, ne, e],
    ]
}

/// Cosine of the angle between two vectors of common norm² `norm_sqr`
/// having inner product `product`; `None` for an empty pair.
fn pair_cosine(product: f64, norm_sqr: f64, p: AttackParams) -> Result<Option<f64>> {
    if norm_sqr == 0.0 {
        return Ok(None);
    }
    let c = product / norm_sqr;
    if c.abs() > 1.0 + 1e-9 {
        return Err(Error::GramNotPositive {
            e: p.e,
            delta: p.delta,
        });
    }
    Ok(Some(c.clamp(-1.0, 1.0)))
}

/// Explicit 4-dimensional vectors realising the `(e, δ)` table.
///
/// The correct pair lives in coordinates `{0, 1}`, the error pair in
/// `{2, 3}`; the first vector of each pair is along the first coordinate.
pub fn realize_probe_geometry(p: AttackParams) -> Result<ProbeGeometry> {
    p.check()?;
    let e = p.e.clamp(0.0, 0.5);
    let zero = Ket::zeros(4);

    let r = (1.0 - e).sqrt();
    let (uu, ubub) = match pair_cosine(0.5 - e - p.delta, 1.0 - e, p)? {
        Some(c) => {
            let s = (1.0 - c * c).max(0.0).sqrt();
            (
                Ket::from_real(&[r, 0.0, 0.0, 0.0])?,
                Ket::from_real(&[r * c, r * s, 0.0, 0.0])?,
            )
        }
        None => (zero.clone(), zero.clone()),
    };
    let q = e.sqrt();
    let (uub, ubu) = match pair_cosine(0.5 - e + p.delta, e, p)? {
        Some(c) => {
            let s = (1.0 - c * c).max(0.0).sqrt();
            (
                Ket::from_real(&[0.0, 0.0, q, 0.0])?,
                Ket::from_real(&[0.0, 0.0, q * c, q * s])?,
            )
        }
        None => (zero.clone(), zero),
    };
    let g = ProbeGeometry::new([uu, ubub], [uub, ubu])?;
    g.check(GEOMETRY_TOL)?;
    Ok(g)
}

/// Probability that Bob reads the wrong bit, `‖ψ_uū‖²`.
pub fn qber_of_attack(geometry: &ProbeGeometry) -> f64 {
    geometry.psi_uub().norm_sqr()
}

/// An attack given by the images `U(|e_m⟩ ⊗ |w⟩)` of the symmetric basis.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglingProbe {
    probe_dim: usize,
    images: [Ket; 2],
}

impl EntanglingProbe {
    pub fn new(probe_dim: usize, images: [Ket; 2]) -> Result<Self> {
        for img in &images {
            if img.dim() != 2 * probe_dim {
                return Err(Error::DimensionMismatch {
                    expected: 2 * probe_dim,
                    found: img.dim(),
                });
            }
        }
        let residual = (images[0].norm_sqr() - 1.0)
            .abs()
            .max((images[1].norm_sqr() - 1.0).abs())
            .max(images[0].inner(&images[1]).norm());
        if residual > 1e-10 {
            return Err(Error::NotUnitary { residual });
        }
        Ok(Self { probe_dim, images })
    }

    pub fn identity() -> Self {
        Self {
            probe_dim: 1,
            images: [Ket::basis(2, 0), Ket::basis(2, 1)],
        }
    }

    /// Images of a unitary on signal⊗probe with initial probe state `w`.
    pub fn from_unitary(u: &Operator, w: &Ket) -> Result<Self> {
        let d = w.dim();
        if u.dim() != 2 * d {
            return Err(Error::DimensionMismatch {
                expected: 2 * d,
                found: u.dim(),
            });
        }
        let images = [
            u.apply(&Ket::basis(2, 0).tensor(w)),
            u.apply(&Ket::basis(2, 1).tensor(w)),
        ];
        Self::new(d, images)
    }

    /// `U|e_m⟩|w⟩ = |e₀⟩Φ_m0 + |e₁⟩Φ_m1`.
    pub fn from_phi(phi: &[[Ket; 2]; 2]) -> Result<Self> {
        let d = phi[0][0].dim();
        let img =
            |m: usize| &Ket::basis(2, 0).tensor(&phi[m][0]) + &Ket::basis(2, 1).tensor(&phi[m][1]);
        Self::new(d, [img(0), img(1)])
    }

    pub fn images(&self) -> &[Ket; 2] {
        &self.images
    }

    /// `Φ_mn = (⟨e_n| ⊗ I) U |e_m⟩|w⟩`.
    pub fn phi(&self) -> [[Ket; 2]; 2] {
        let p = |m: usize, n: usize| {
            self.images[m]
                .contract_first(&Ket::basis(2, n))
                .expect("even dimension")
        };
        [[p(0, 0), p(0, 1)], [p(1, 0), p(1, 1)]]
    }

    /// A full unitary on signal⊗probe with initial probe `|0⟩` that agrees
    /// with this attack.
    pub fn to_unitary(&self) -> (Operator, Ket) {
        let d = self.probe_dim;
        let n = 2 * d;
        let w = Ket::basis(d, 0);
        let inputs = complete_basis(&[Ket::basis(n, 0), Ket::basis(n, d)], n);
        let outputs = complete_basis(&self.images, n);
        let mut u = Operator::zeros(n);
        for (inp, out) in inputs.iter().zip(&outputs) {
            u = &u + &out.outer(inp);
        }
        (u, w)
    }
}

impl AttackExecutor for EntanglingProbe {
    fn probe_dim(&self) -> usize {
        self.probe_dim
    }

    fn interact(&self, signal: &Ket) -> Ket {
        &self.images[0].scale(signal.get(0)) + &self.images[1].scale(signal.get(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Sb,
    Param,
    Angles,
}

/// JSON description of an attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackDescription {
    #[serde(rename = "type")]
    pub kind: AttackKind,
    pub e: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub angles: Option<AngleParams>,
    pub gram: [[f64; 4]; 4],
}

impl AttackDescription {
    pub fn new(kind: AttackKind, geometry: &ProbeGeometry, angles: Option<AngleParams>) -> Self {
        let p = geometry.params();
        Self {
            kind,
            e: p.e,
            delta: p.delta,
            angles,
            gram: geometry.gram(),
        }
    }
}
