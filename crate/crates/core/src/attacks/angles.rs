//! Four-angle family of real probe unitaries on a 4-dimensional probe.
//!
//! With `w₀..w₃` an orthonormal probe basis and `e₀, e₁` the symmetric
//! signal basis, the attack is `U|e_m⟩|w⟩ = |e₀⟩Φ_m0 + |e₁⟩Φ_m1` where
//!
//! ```text
//! Φ00 = X0 w0 + X1 w1 + X2 w2 + X3 w3      Φ01 = X5 w1 + X6 w2
//! Φ11 = X3 w0 + X2 w1 + X1 w2 + X0 w3      Φ10 = X6 w1 + X5 w2
//! ```
//!
//! and the coefficients come from angles `λ, μ, φ, θ`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{AttackParams, EntanglingProbe, ProbeGeometry};
use crate::error::{Error, Result};
use crate::linalg::Ket;
use crate::signals::Basis;

/// Iteration cap per starting point of the root finder.
pub const SOLVER_MAX_ITER: usize = 200;

/// Residual (max-norm) accepted by the root finder.
pub const SOLVER_TOL: f64 = 1e-10;

const STARTS: [[f64; 4]; 8] = [
    [0.6, 0.4, 2.0, 1.3],
    [1.0, 0.3, 2.5, 1.8],
    [0.3, 0.6, 1.8, 1.5],
    [0.8, 0.7, 2.2, 1.2],
    [1.2, 0.2, 1.9, 1.7],
    [0.5, 1.0, 2.8, 1.4],
    [0.9, 0.5, 3.5, 2.0],
    [0.4, 0.2, 4.0, 1.1],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleParams {
    pub lambda: f64,
    pub mu: f64,
    pub phi: f64,
    pub theta: f64,
}

impl AngleParams {
    fn from_array(v: [f64; 4]) -> Self {
        Self {
            lambda: v[0],
            mu: v[1],
            phi: v[2],
            theta: v[3],
        }
    }

    fn to_array(self) -> [f64; 4] {
        [self.lambda, self.mu, self.phi, self.theta]
    }

    /// The combinations `a, b, c, d` in closed form.
    pub fn abcd(&self) -> Abcd {
        let (sl2, cl2) = (self.lambda.sin().powi(2), self.lambda.cos().powi(2));
        let s2m = (2.0 * self.mu).sin();
        let (s2f, c2f) = ((2.0 * self.phi).sin(), (2.0 * self.phi).cos());
        let (s2t, c2t) = ((2.0 * self.theta).sin(), (2.0 * self.theta).cos());
        Abcd {
            a: sl2 * s2m + cl2 * c2t * s2f,
            b: sl2 * s2m + cl2 * s2f,
            c: cl2 * s2t * c2f,
            d: sl2 + cl2 * c2t,
        }
    }

    /// Residuals of the optimality conditions at QBER `e`, with their
    /// Jacobian with respect to `(λ, μ, φ, θ)`.
    fn residuals(&self, e: f64) -> ([f64; 4], [[f64; 4]; 4]) {
        let abcd = self.abcd();
        let t = 1.0 - 2.0 * e;
        let r = [abcd.a - t, abcd.d - t, abcd.c, abcd.b - t * t];

        let (sl2, cl2) = (self.lambda.sin().powi(2), self.lambda.cos().powi(2));
        let s2l = (2.0 * self.lambda).sin();
        let (s2m, c2m) = ((2.0 * self.mu).sin(), (2.0 * self.mu).cos());
        let (s2f, c2f) = ((2.0 * self.phi).sin(), (2.0 * self.phi).cos());
        let (s2t, c2t) = ((2.0 * self.theta).sin(), (2.0 * self.theta).cos());
        let j = [
            [
                s2l * (s2m - c2t * s2f),
                2.0 * sl2 * c2m,
                2.0 * cl2 * c2t * c2f,
                -2.0 * cl2 * s2t * s2f,
            ],
            [s2l * (1.0 - c2t), 0.0, 0.0, -2.0 * cl2 * s2t],
            [
                -s2l * s2t * c2f,
                0.0,
                -2.0 * cl2 * s2t * s2f,
                2.0 * cl2 * c2t * c2f,
            ],
            [s2l * (s2m - s2f), 2.0 * sl2 * c2m, 2.0 * cl2 * c2f, 0.0],
        ];
        (r, j)
    }
}

/// `a = D + E`, `b = D − E`, `c` (span overlap), `d` (correct minus error
/// weight), with `D = ⟨Φ00│Φ11⟩` and `E = ⟨Φ01│Φ10⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Abcd {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Coefficients `X0..X6`; `X4` does not appear in the family and is kept
/// at zero so indices match the usual labelling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XCoefficients(pub [f64; 7]);

impl XCoefficients {
    pub fn from_angles(p: AngleParams) -> Self {
        let (sl, cl) = p.lambda.sin_cos();
        let (sm, cm) = p.mu.sin_cos();
        let (sf, cf) = p.phi.sin_cos();
        let (st, ct) = p.theta.sin_cos();
        XCoefficients([
            sl * cm,
            cl * ct * cf,
            cl * ct * sf,
            sl * sm,
            0.0,
            cl * st * cf,
            -cl * st * sf,
        ])
    }

    /// `D = ⟨Φ00│Φ11⟩`.
    pub fn d_overlap(&self) -> f64 {
        let x = &self.0;
        2.0 * x[0] * x[3] + 2.0 * x[1] * x[2]
    }

    /// `E = ⟨Φ01│Φ10⟩`.
    pub fn e_overlap(&self) -> f64 {
        2.0 * self.0[5] * self.0[6]
    }

    pub fn abcd(&self) -> Abcd {
        let x = &self.0;
        let (d_ov, e_ov) = (self.d_overlap(), self.e_overlap());
        Abcd {
            a: d_ov + e_ov,
            b: d_ov - e_ov,
            c: 2.0 * (x[1] * x[5] + x[2] * x[6]),
            d: x[..4].iter().map(|v| v * v).sum::<f64>() - x[5] * x[5] - x[6] * x[6],
        }
    }

    /// `(e, δ)` implied by the coefficients: `e = X5² + X6²`,
    /// `2δ = E − D`.
    pub fn params(&self) -> AttackParams {
        let x = &self.0;
        AttackParams::new(
            x[5] * x[5] + x[6] * x[6],
            0.5 * (self.e_overlap() - self.d_overlap()),
        )
    }

    fn phi(&self) -> [[Ket; 2]; 2] {
        let x = &self.0;
        let k = |v: [f64; 4]| Ket::from_real(&v).expect("finite coefficients");
        [
            [k([x[0], x[1], x[2], x[3]]), k([0.0, x[5], x[6], 0.0])],
            [k([0.0, x[6], x[5], 0.0]), k([x[3], x[2], x[1], x[0]])],
        ]
    }
}

/// An attack from the four-angle family.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleAttack {
    angles: Option<AngleParams>,
    x: XCoefficients,
    probe: EntanglingProbe,
}

impl AngleAttack {
    pub fn angles(&self) -> Option<AngleParams> {
        self.angles
    }

    pub fn x(&self) -> &XCoefficients {
        &self.x
    }

    pub fn probe(&self) -> &EntanglingProbe {
        &self.probe
    }

    pub fn geometry(&self, basis: Basis) -> Result<ProbeGeometry> {
        ProbeGeometry::from_attack(&self.probe, basis)
    }
}

/// Builds the attack for explicit coefficients, which must describe an
/// isometry.
pub fn attack_from_x(x: XCoefficients) -> Result<AngleAttack> {
    if x.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let probe = EntanglingProbe::from_phi(&x.phi())?;
    Ok(AngleAttack {
        angles: None,
        x,
        probe,
    })
}

pub fn attack_from_angles(p: AngleParams) -> Result<AngleAttack> {
    let mut attack = attack_from_x(XCoefficients::from_angles(p))?;
    attack.angles = Some(p);
    Ok(attack)
}

/// Closed-form angles realising `(e, δ)` on the branch `θ = π/2`.
pub fn angles_for_params(p: AttackParams) -> Result<AngleParams> {
    p.check()?;
    let e = p.e.clamp(0.0, 0.5);
    let lambda = e.sqrt().acos();
    let mu = if e < 1.0 {
        0.5 * ((1.0 - 2.0 * e - 2.0 * p.delta) / (2.0 * (1.0 - e)))
            .clamp(-1.0, 1.0)
            .asin()
    } else {
        0.0
    };
    let phi = if e > 0.0 {
        0.5 * ((-2.0 * p.delta - 1.0 + 2.0 * e) / (2.0 * e))
            .clamp(-1.0, 1.0)
            .asin()
    } else {
        0.0
    };
    Ok(AngleParams {
        lambda,
        mu,
        phi,
        theta: FRAC_PI_2,
    })
}

/// Outcome of [`solve_optimal_angles`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverReport {
    pub angles: AngleParams,
    pub residual: f64,
    pub iterations: usize,
    pub start: usize,
}

fn max_abs(v: &[f64; 4]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `A x = b` for a 4×4 system by partial pivoting; `None` if singular.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Levenberg–Marquardt from one start; returns the best point reached.
fn levenberg_marquardt(e: f64, start: [f64; 4]) -> (AngleParams, f64, usize) {
    let mut p = AngleParams::from_array(start);
    let (mut r, mut j) = p.residuals(e);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut damping = 1e-3;
    for iter in 0..SOLVER_MAX_ITER {
        if max_abs(&r) < SOLVER_TOL {
            return (p, max_abs(&r), iter);
        }
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for a in 0..4 {
            for b in 0..4 {
                jtj[a][b] = (0..4).map(|k| j[k][a] * j[k][b]).sum();
            }
            jtr[a] = -(0..4).map(|k| j[k][a] * r[k]).sum::<f64>();
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut m = jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += damping * (1.0 + jtj[a][a]);
            }
            let Some(step) = solve4(m, jtr) else {
                damping *= 10.0;
                continue;
            };
            let mut trial = p.to_array();
            for (t, s) in trial.iter_mut().zip(step) {
                *t += s;
            }
            let cand = AngleParams::from_array(trial);
            let (rc, jc) = cand.residuals(e);
            let cc: f64 = rc.iter().map(|v| v * v).sum();
            if cc < cost {
                p = cand;
                r = rc;
                j = jc;
                cost = cc;
                damping = (damping * 0.3).max(1e-15);
                accepted = true;
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            return (p, max_abs(&r), iter);
        }
    }
    (p, max_abs(&r), SOLVER_MAX_ITER)
}

/// Finds angles with `a = d = 1 − 2e`, `c = 0`, `b = (1 − 2e)²`, the
/// conditions for the attack with equal conditional fidelities.
pub fn solve_optimal_angles(e: f64) -> Result<SolverReport> {
    if !(0.0..=0.5).contains(&e) {
        return Err(Error::OutOfRange {
            name: "e",
            value: e,
            range: "[0, 1/2]",
        });
    }
    let mut best: Option<SolverReport> = None;
    let mut total = 0;
    for (k, start) in STARTS.iter().enumerate() {
        let (angles, residual, iterations) = levenberg_marquardt(e, *start);
        total += iterations;
        let report = SolverReport {
            angles,
            residual,
            iterations,
            start: k,
        };
        if residual < SOLVER_TOL {
            return Ok(report);
        }
        if best.is_none_or(|b| residual < b.residual) {
            best = Some(report);
        }
    }
    Err(Error::NoConvergence {
        iterations: total,
        residual: best.map_or(f64::INFINITY, |b| b.residual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{table_gram, GEOMETRY_TOL};

    fn angles(lambda: f64, mu: f64, phi: f64, theta: f64) -> AngleParams {
        AngleParams {
            lambda,
            mu,
            phi,
            theta,
        }
    }

    #[test]
    fn closed_form_abcd_matches_coefficients() {
        for k in 0..200 {
            let t = k as f64;
            let p = angles(0.37 * t, 1.3 * t + 0.1, 0.71 * t + 0.2, 2.1 * t + 0.3);
            let lhs = p.abcd();
            let rhs = XCoefficients::from_angles(p).abcd();
            for (l, r) in [
                (lhs.a, rhs.a),
                (lhs.b, rhs.b),
                (lhs.c, rhs.c),
                (lhs.d, rhs.d),
            ] {
                assert!((l - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn family_is_unitary() {
        for k in 0..50 {
            let t = 0.13 * k as f64;
            let a = attack_from_angles(angles(t, 2.0 * t, 3.0 * t + 0.5, 0.7 * t)).unwrap();
            let (u, _) = a.probe().to_unitary();
            assert!(u.is_unitary(1e-12));
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = angles(0.7, 0.3, 1.9, 1.2);
        let e = 0.15;
        let (_, j) = p.residuals(e);
        let h = 1e-6;
        for col in 0..4 {
            let mut plus = p.to_array();
            let mut minus = p.to_array();
            plus[col] += h;
            minus[col] -= h;
            let (rp, _) = AngleParams::from_array(plus).residuals(e);
            let (rm, _) = AngleParams::from_array(minus).residuals(e);
            for row in 0..4 {
                let fd = (rp[row] - rm[row]) / (2.0 * h);
                assert!((fd - j[row][col]).abs() < 1e-7, "J[{row}][{col}]");
            }
        }
    }

    #[test]
    fn closed_form_angles_realise_params() {
        for i in 0..=20 {
            let e = 0.5 * i as f64 / 20.0;
            let hi = 0.5 - (1.0 - 2.0 * e).abs();
            for j in 0..=10 {
                let p = AttackParams::new(e, -0.5 + (hi + 0.5) * j as f64 / 10.0);
                let a = attack_from_angles(angles_for_params(p).unwrap()).unwrap();
                let got = a.x().params();
                assert!((got.e - p.e).abs() < 1e-12 && (got.delta - p.delta).abs() < 1e-12);
                for basis in Basis::ALL {
                    let g = a.geometry(basis).unwrap();
                    g.check(GEOMETRY_TOL).unwrap();
                    let want = table_gram(p);
                    let have = g.gram();
                    for r in 0..4 {
                        for c in 0..4 {
                            assert!((have[r][c] - want[r][c]).abs() < 1e-12, "{p:?} {basis:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn solver_hits_optimum() {
        for i in 1..50 {
            let e = 0.01 * i as f64;
            let rep = solve_optimal_angles(e).unwrap();
            assert!(rep.residual < SOLVER_TOL);
            let a = attack_from_angles(rep.angles).unwrap();
            let p = a.geometry(Basis::U).unwrap().params();
            let want = AttackParams::optimal(e);
            assert!(
                (p.e - want.e).abs() < 1e-9 && (p.delta - want.delta).abs() < 1e-9,
                "{e}"
            );
        }
    }

    #[test]
    fn solver_rejects_out_of_range() {
        assert!(matches!(
            solve_optimal_angles(0.7),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn high_error_limit_angles() {
        let a = angles(std::f64::consts::FRAC_PI_4, 0.0, 0.0, FRAC_PI_2).abcd();
        assert!(a.a.abs() < 1e-15 && a.b.abs() < 1e-15 && a.c.abs() < 1e-15 && a.d.abs() < 1e-15);
    }
}
