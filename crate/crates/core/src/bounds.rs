//! Discarded-fraction curves, the imbalance optimizer and key gains.
//!
//! All logarithms are base 2, so `τ` and gains are in bits.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::attacks::AttackParams;
use crate::error::{Error, Result};
use crate::eve::leakage_assisted_cp;
use crate::signals::chunk_rng;

/// Default grid spacing for the imbalance scan.
pub const DEFAULT_RESOLUTION: f64 = 1e-5;

/// Width at which golden-section refinement stops.
pub const GOLDEN_TOL: f64 = 1e-12;

/// Slack allowed by the bound verifier.
pub const BOUND_TOL: f64 = 1e-9;

const SAMPLES_PER_STREAM: usize = 4096;

fn check_e(e: f64) -> Result<f64> {
    if e.is_finite() && (0.0..=0.5).contains(&e) {
        Ok(e)
    } else {
        Err(Error::OutOfRange {
            name: "e",
            value: e,
            range: "[0, 1/2]",
        })
    }
}

fn clamp_tau(tau: f64) -> f64 {
    tau.clamp(0.0, 1.0)
}

/// `h(e) = −e log e − (1 − e) log(1 − e)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(e: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::OutOfRange {
            name: "e",
            value: e,
            range: "[0, 1]",
        });
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(e) + term(1.0 - e))
}

/// Discarded fraction against the best attack when errors are discarded:
/// `log((1 + 2e − 7e²)/(1 − e)²)` up to `e = 1/3`, then 1.
pub fn tau_error_discard(e: f64) -> Result<f64> {
    let e = check_e(e)?;
    if e > 1.0 / 3.0 {
        return Ok(1.0);
    }
    Ok(clamp_tau(
        ((1.0 + 2.0 * e - 7.0 * e * e) / (1.0 - e).powi(2)).log2(),
    ))
}

/// The CNOT attack under error correction: only the correct bits leak,
/// `(1 − e) τ_d(e)`.
pub fn tau_sb_with_ec(e: f64) -> Result<f64> {
    Ok(clamp_tau((1.0 - e) * tau_error_discard(e)?))
}

/// `log(1 + 4e − 4e²)`.
pub fn tau_lutkenhaus(e: f64) -> Result<f64> {
    let e = check_e(e)?;
    Ok(clamp_tau((1.0 + 4.0 * e - 4.0 * e * e).log2()))
}

/// `1 + log ⟨P_c⟩`.
pub fn tau_from_cp(cp: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&cp) {
        return Err(Error::OutOfRange {
            name: "cp",
            value: cp,
            range: "[1/2, 1]",
        });
    }
    Ok(clamp_tau(1.0 + cp.log2()))
}

/// Discarded fraction forced by the attack `p` under error correction.
pub fn tau_of_params(p: AttackParams) -> Result<f64> {
    tau_from_cp(leakage_assisted_cp(p)?.clamp(0.5, 1.0))
}

/// `(1 − e) log(2 − f_eq) + e log(2 − f_neq)` without feasibility checks.
fn objective(e: f64, delta: f64) -> f64 {
    let f_eq = ((0.5 - e - delta) / (1.0 - e)).powi(2).min(1.0);
    let f_neq = if e > 0.0 {
        ((0.5 - e + delta) / e).powi(2).min(1.0)
    } else {
        0.0
    };
    (1.0 - e) * (2.0 - f_eq).log2() + e * (2.0 - f_neq).log2()
}

/// Feasible imbalance range at QBER `e`.
pub fn delta_range(e: f64) -> Result<(f64, f64)> {
    let e = check_e(e)?;
    Ok((-0.5, 0.5 - (1.0 - 2.0 * e).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaOptimum {
    pub e: f64,
    pub delta: f64,
    pub tau: f64,
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > GOLDEN_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Maximises the discarded fraction over the feasible imbalances at fixed
/// QBER: a grid scan at `resolution`, then golden-section refinement around
/// the best grid point.
pub fn optimize_delta(e: f64, resolution: f64) -> Result<DeltaOptimum> {
    let (lo, hi) = delta_range(e)?;
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::OutOfRange {
            name: "resolution",
            value: resolution,
            range: "(0, inf)",
        });
    }
    if hi - lo <= 0.0 {
        return Ok(DeltaOptimum {
            e,
            delta: lo,
            tau: clamp_tau(objective(e, lo)),
        });
    }
    let steps = ((hi - lo) / resolution).ceil() as usize;
    let at = |k: usize| (lo + k as f64 * resolution).min(hi);
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for k in 0..=steps {
        let v = objective(e, at(k));
        if v > best_val {
            best_val = v;
            best = k;
        }
    }
    let a = at(best.saturating_sub(1));
    let b = at((best + 1).min(steps));
    let delta = golden_section(|d| objective(e, d), a, b);
    Ok(DeltaOptimum {
        e,
        delta,
        tau: clamp_tau(objective(e, delta)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    ErrorDiscard,
    SbWithEc,
    Lutkenhaus,
    OptimizedEc,
}

impl CurveKind {
    pub const ALL: [CurveKind; 4] = [
        CurveKind::ErrorDiscard,
        CurveKind::SbWithEc,
        CurveKind::Lutkenhaus,
        CurveKind::OptimizedEc,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CurveKind::ErrorDiscard => "error-discard",
            CurveKind::SbWithEc => "sb-with-ec",
            CurveKind::Lutkenhaus => "lutkenhaus",
            CurveKind::OptimizedEc => "optimized-ec",
        }
    }

    pub fn tau(self, e: f64) -> Result<f64> {
        match self {
            CurveKind::ErrorDiscard => tau_error_discard(e),
            CurveKind::SbWithEc => tau_sb_with_ec(e),
            CurveKind::Lutkenhaus => tau_lutkenhaus(e),
            CurveKind::OptimizedEc => optimize_delta(e, DEFAULT_RESOLUTION).map(|o| o.tau),
        }
    }
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Inclusive, evenly spaced QBER grid inside `[0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl EGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(Error::InvalidGrid("non-finite bound".into()));
        }
        if step <= 0.0 {
            return Err(Error::InvalidGrid(format!("step {step} must be positive")));
        }
        if start >= stop {
            return Err(Error::InvalidGrid(format!(
                "start {start} must be below stop {stop}"
            )));
        }
        if start < 0.0 || stop > 0.5 {
            return Err(Error::InvalidGrid(format!(
                "[{start}, {stop}] must lie inside [0, 0.5]"
            )));
        }
        Ok(Self { start, stop, step })
    }

    /// Grid points; `stop` is included when it lies on the grid.
    pub fn points(&self) -> Vec<f64> {
        let span = (self.stop - self.start) / self.step;
        let n = (span + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| (self.start + i as f64 * self.step).min(self.stop))
            .collect()
    }
}

impl Default for EGrid {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 0.5,
            step: 0.005,
        }
    }
}

impl FromStr for EGrid {
    type Err = Error;

    /// Parses `start:stop:step`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidGrid(format!(
                "expected start:stop:step, got {s:?}"
            )));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidGrid(format!("not a number: {p:?}")))
        };
        EGrid::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }
}

impl fmt::Display for EGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecurityCurve {
    pub kind: CurveKind,
    /// `(e, τ)` pairs in increasing `e`.
    pub samples: Vec<(f64, f64)>,
    pub monotonicized: bool,
}

impl SecurityCurve {
    pub fn sample(kind: CurveKind, grid: &EGrid) -> Result<Self> {
        let samples = grid
            .points()
            .into_par_iter()
            .map(|e| kind.tau(e).map(|t| (e, t)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind,
            samples,
            monotonicized: false,
        })
    }

    /// Sample with the largest `τ`, first one on ties.
    pub fn argmax(&self) -> Option<(f64, f64)> {
        self.samples
            .iter()
            .copied()
            .fold(None, |best: Option<(f64, f64)>, s| match best {
                Some(b) if b.1 >= s.1 => Some(b),
                _ => Some(s),
            })
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].1 >= w[0].1)
    }
}

/// Running maximum of `τ` along increasing `e`.
pub fn monotonicize(curve: &SecurityCurve) -> SecurityCurve {
    let mut running = f64::NEG_INFINITY;
    let samples = curve
        .samples
        .iter()
        .map(|&(e, t)| {
            running = running.max(t);
            (e, running)
        })
        .collect();
    SecurityCurve {
        kind: curve.kind,
        samples,
        monotonicized: true,
    }
}

/// Secret key left from `n` sifted bits under each reconciliation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainModel {
    pub n: u64,
    pub e: f64,
    /// Error discard: `n(1 − e)(1 − τ_d) − n h(e)`.
    pub g_d: f64,
    /// Error correction: `n(1 − τ_c) − n h(e)`.
    pub g_c: f64,
}

pub fn gains(n: u64, e: f64) -> Result<GainModel> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let e = check_e(e)?;
    let nf = n as f64;
    let h = binary_entropy(e)?;
    let tau_d = tau_error_discard(e)?;
    let tau_c = optimize_delta(e, DEFAULT_RESOLUTION)?.tau;
    let g_d = nf * (1.0 - e) * (1.0 - tau_d) - nf * h;
    let g_c = nf * (1.0 - tau_c) - nf * h;
    if g_c < g_d - 1e-9 * nf {
        return Err(Error::GainOrdering { e, g_d, g_c });
    }
    Ok(GainModel { n, e, g_d, g_c })
}

/// Largest and smallest distance below the bound seen by the verifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub samples: usize,
    pub violations: usize,
    pub max_slack: f64,
    pub max_slack_at: AttackParams,
    pub min_slack: f64,
    pub min_slack_at: AttackParams,
}

/// `τ_L(e) − τ(p)`; negative means the attack beats the bound.
pub fn bound_slack(p: AttackParams) -> Result<f64> {
    Ok(tau_lutkenhaus(p.e)? - tau_of_params(p)?)
}

/// Slack at `p`, or [`Error::BoundViolation`] if it is below `−tol`.
pub fn check_bound_at(p: AttackParams, tol: f64) -> Result<f64> {
    let slack = bound_slack(p)?;
    if slack < -tol {
        return Err(Error::BoundViolation {
            e: p.e,
            delta: p.delta,
            excess: -slack,
        });
    }
    Ok(slack)
}

fn sample_feasible<R: Rng + ?Sized>(rng: &mut R) -> AttackParams {
    loop {
        let p = AttackParams::new(rng.random_range(0.0..=0.5), rng.random_range(-0.5..=0.5));
        if p.violated_constraint().is_none() {
            return p;
        }
    }
}

/// Checks `τ ≤ τ_L(e) + tol` at the given points.
pub fn verify_bound_points(points: &[AttackParams], tol: f64) -> Result<BoundReport> {
    let first = *points.first().ok_or(Error::EmptyInput)?;
    let mut report = BoundReport {
        samples: 0,
        violations: 0,
        max_slack: f64::NEG_INFINITY,
        max_slack_at: first,
        min_slack: f64::INFINITY,
        min_slack_at: first,
    };
    for &p in points {
        let slack = check_bound_at(p, tol)?;
        report.samples += 1;
        if slack > report.max_slack {
            report.max_slack = slack;
            report.max_slack_at = p;
        }
        if slack < report.min_slack {
            report.min_slack = slack;
            report.min_slack_at = p;
        }
    }
    Ok(report)
}

/// Draws `samples` points uniformly from the feasible `(e, δ)` region and
/// checks the bound at each. Stops at the first violation.
pub fn verify_bound_random(samples: usize, seed: u64) -> Result<BoundReport> {
    if samples == 0 {
        return Err(Error::EmptyInput);
    }
    let streams = samples.div_ceil(SAMPLES_PER_STREAM);
    let points: Vec<AttackParams> = (0..streams)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut rng = chunk_rng(seed, k as u64);
            let count = SAMPLES_PER_STREAM.min(samples - k * SAMPLES_PER_STREAM);
            (0..count)
                .map(move |_| sample_feasible(&mut rng))
                .collect::<Vec<_>>()
        })
        .collect();
    verify_bound_points(&points, BOUND_TOL)
}

/// Formats `x` with 12 significant digits, locale-free.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{:.*e}", (DIGITS - 1) as usize, x)
    }
}

/// Writes curves as `e,tau,kind,monotonicized` rows.
pub fn write_curves_csv<W: Write>(curves: &[SecurityCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["e", "tau", "kind", "monotonicized"])?;
    for c in curves {
        for &(e, t) in &c.samples {
            w.write_record([
                format_sig(e),
                format_sig(t),
                c.kind.label().to_string(),
                c.monotonicized.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes gains as `e,n,g_d,g_c` rows.
pub fn write_gains_csv<W: Write>(rows: &[GainModel], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["e", "n", "g_d", "g_c"])?;
    for g in rows {
        w.write_record([
            format_sig(g.e),
            g.n.to_string(),
            format_sig(g.g_d),
            format_sig(g.g_c),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.11).unwrap() - 0.499915958164528).abs() < 1e-12);
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(tau_error_discard(0.0).unwrap(), 0.0);
        assert!((tau_error_discard(1.0 / 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((tau_error_discard(0.1).unwrap() - 0.480328959530563).abs() < 1e-12);
        assert_eq!(tau_error_discard(0.4).unwrap(), 1.0);
        assert!((tau_sb_with_ec(0.1).unwrap() - 0.432296063577506).abs() < 1e-12);
        assert_eq!(tau_lutkenhaus(0.0).unwrap(), 0.0);
        assert_eq!(tau_lutkenhaus(0.5).unwrap(), 1.0);
        assert!((tau_lutkenhaus(0.25).unwrap() - 1.75f64.log2()).abs() < 1e-15);
        assert!(tau_lutkenhaus(0.6).is_err());
    }

    #[test]
    fn tau_from_cp_values() {
        assert_eq!(tau_from_cp(0.5).unwrap(), 0.0);
        assert_eq!(tau_from_cp(1.0).unwrap(), 1.0);
        assert!((tau_from_cp(0.875).unwrap() - tau_lutkenhaus(0.25).unwrap()).abs() < 1e-15);
        assert!(tau_from_cp(0.4).is_err());
    }

    #[test]
    fn optimizer_examples() {
        let o = optimize_delta(0.25, DEFAULT_RESOLUTION).unwrap();
        assert!((o.delta + 0.125).abs() < 1e-6);
        assert!((o.tau - 1.75f64.log2()).abs() < 1e-12);
        let o = optimize_delta(0.45, DEFAULT_RESOLUTION).unwrap();
        assert!((o.tau - 1.99f64.log2()).abs() < 1e-12);
        let o = optimize_delta(0.0, DEFAULT_RESOLUTION).unwrap();
        assert_eq!((o.delta, o.tau), (-0.5, 0.0));
        let o = optimize_delta(1e-6, DEFAULT_RESOLUTION).unwrap();
        assert!(o.tau < 1e-5);
    }

    #[test]
    fn am_gm_step_on_delta_grid() {
        for i in 1..50 {
            let e = 0.01 * i as f64;
            let (lo, hi) = delta_range(e).unwrap();
            for k in 0..=100 {
                let delta = lo + (hi - lo) * k as f64 / 100.0;
                let f_eq = ((0.5 - e - delta) / (1.0 - e)).powi(2);
                let f_neq = ((0.5 - e + delta) / e).powi(2).min(1.0);
                let lhs = objective(e, delta);
                let rhs = ((1.0 - e) * (2.0 - f_eq) + e * (2.0 - f_neq)).log2();
                assert!(lhs <= rhs + 1e-14);
                if (f_eq - f_neq).abs() > 1e-6 {
                    assert!(lhs < rhs);
                }
            }
        }
    }

    #[test]
    fn grid_parsing() {
        let g: EGrid = "0:0.5:0.005".parse().unwrap();
        assert_eq!(g.points().len(), 101);
        assert_eq!(*g.points().last().unwrap(), 0.5);
        assert!("0:0.5".parse::<EGrid>().is_err());
        assert!("0.5:0:0.1".parse::<EGrid>().is_err());
        assert!("0:0.5:0".parse::<EGrid>().is_err());
        assert!("0:0.7:0.1".parse::<EGrid>().is_err());
    }

    #[test]
    fn monotonicize_examples() {
        let g = EGrid::default();
        let l = SecurityCurve::sample(CurveKind::Lutkenhaus, &g).unwrap();
        assert_eq!(monotonicize(&l).samples, l.samples);
        let sb = SecurityCurve::sample(CurveKind::SbWithEc, &g).unwrap();
        let m = monotonicize(&sb);
        assert!(m.is_nondecreasing());
        assert_eq!(monotonicize(&m), m);
        let (emax, tmax) = sb.argmax().unwrap();
        assert!(m
            .samples
            .iter()
            .filter(|s| s.0 >= emax)
            .all(|s| s.1 == tmax));
        let flat = SecurityCurve {
            kind: CurveKind::Lutkenhaus,
            samples: vec![(0.0, 0.3), (0.1, 0.3)],
            monotonicized: false,
        };
        assert_eq!(monotonicize(&flat).samples, flat.samples);
    }

    #[test]
    fn gain_examples() {
        let g = gains(1000, 0.0).unwrap();
        assert_eq!((g.g_d, g.g_c), (1000.0, 1000.0));
        let g = gains(1_000_000, 0.05).unwrap();
        assert!(g.g_c >= g.g_d);
        let g = gains(1000, 1.0 / 3.0).unwrap();
        assert!(g.g_d < 0.0);
        assert!(gains(0, 0.1).is_err());
    }

    #[test]
    fn verifier_points() {
        let opt = AttackParams::optimal(0.2);
        assert!(check_bound_at(opt, BOUND_TOL).unwrap() <= 1e-9);
        let sb = AttackParams::slutsky_brandt(0.2);
        assert!(check_bound_at(sb, BOUND_TOL).unwrap() > 1e-3);
        let r = verify_bound_random(1000, 1).unwrap();
        assert_eq!(r.samples, 1000);
        assert_eq!(r.violations, 0);
        assert!(r.min_slack >= -BOUND_TOL);
    }

    #[test]
    fn verifier_is_reproducible() {
        assert_eq!(
            verify_bound_random(5000, 3).unwrap(),
            verify_bound_random(5000, 3).unwrap()
        );
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(0.5), "0.500000000000");
        assert_eq!(format_sig(1.0), "1.00000000000");
        assert_eq!(format_sig(0.480328959513), "0.480328959513");
        assert_eq!(format_sig(-1234.5), "-1234.50000000");
        assert_eq!(format_sig(1e-7), "1.00000000000e-7");
    }

    #[test]
    fn curve_csv_shape() {
        let g = EGrid::default();
        let c = SecurityCurve::sample(CurveKind::Lutkenhaus, &g).unwrap();
        let mut buf = Vec::new();
        write_curves_csv(&[c], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "e,tau,kind,monotonicized");
        assert_eq!(lines.len(), 102);
        assert_eq!(lines[101], "0.500000000000,1.00000000000,lutkenhaus,false");
    }
}
