//! Eve's measurements on her probe and the collision probability they yield.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::attacks::{AttackParams, ProbeGeometry};
use crate::error::{Error, Result};
use crate::linalg::{complete_basis, real, Ket};
use crate::signals::{chunk_rng, AttackExecutor, Basis, Exchange, ExchangeRecord, CHUNK};

/// Fidelities closer than this to 0 or 1 take the explicit limit branches.
const FIDELITY_EDGE: f64 = 1e-14;

/// Branch weights below this are treated as empty.
const EMPTY_BRANCH: f64 = 1e-14;

/// Geometry tolerance required before running the two-stage measurement.
const TWO_STAGE_TOL: f64 = 1e-9;

/// Number of bootstrap resamples behind [`EmpiricalCollision::stderr`].
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Optimal projective measurement for two equiprobable pure states.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrimination {
    /// Normalised first state.
    pub phi0: Ket,
    /// Normalised second state, rephased so `⟨φ₀│φ₁⟩ ≥ 0`.
    pub phi1: Ket,
    /// `│⟨φ₀│φ₁⟩│²`.
    pub f: f64,
    /// Outcome read as "state 0".
    pub chi0: Ket,
    /// Outcome read as "state 1". Zero in a one-dimensional space, where
    /// the states coincide and no second outcome exists.
    pub chi1: Ket,
}

impl Discrimination {
    /// `(1 − √(1 − f)) / 2`.
    pub fn error_probability(&self) -> f64 {
        0.5 * (1.0 - (1.0 - self.f).sqrt())
    }

    /// Error probability computed from the measurement vectors themselves.
    pub fn realised_error_probability(&self) -> f64 {
        0.5 * (self.chi1.inner(&self.phi0).norm_sqr() + self.chi0.inner(&self.phi1).norm_sqr())
    }

    pub fn collision_probability(&self) -> f64 {
        1.0 - 0.5 * self.f
    }
}

/// Helstrom measurement between `phi0` and `phi1` with equal priors.
pub fn helstrom(phi0: &Ket, phi1: &Ket) -> Result<Discrimination> {
    if phi0.dim() != phi1.dim() {
        return Err(Error::DimensionMismatch {
            expected: phi0.dim(),
            found: phi1.dim(),
        });
    }
    let phi0 = phi0.normalized()?;
    let phi1 = phi1.normalized()?;
    let overlap = phi0.inner(&phi1);
    let phase = if overlap.norm() > 0.0 {
        overlap.conj() / overlap.norm()
    } else {
        real(1.0)
    };
    let phi1 = phi1.scale(phase);
    let f = overlap.norm_sqr().min(1.0);

    let (chi0, chi1) = if f >= 1.0 - FIDELITY_EDGE {
        // Indistinguishable: answer "0" and keep an orthogonal direction
        // for "1" when the space allows it.
        let chi1 = complete_basis(std::slice::from_ref(&phi0), phi0.dim())
            .get(1)
            .cloned()
            .unwrap_or_else(|| Ket::zeros(phi0.dim()));
        (phi0.clone(), chi1)
    } else if f <= FIDELITY_EDGE {
        (
            phi0.clone(),
            (&phi1 - &phi0.scale(phi0.inner(&phi1))).normalized()?,
        )
    } else {
        let root = f.sqrt();
        let denom = 2.0 * (1.0 - f).sqrt();
        let a = (1.0 - root).sqrt();
        let b = (1.0 + root).sqrt();
        let theta0 = (a + b) / denom;
        let theta1 = (a - b) / denom;
        (
            &phi0.scale(real(theta0)) + &phi1.scale(real(theta1)),
            &phi0.scale(real(theta1)) + &phi1.scale(real(theta0)),
        )
    };
    Ok(Discrimination {
        phi0,
        phi1,
        f,
        chi0,
        chi1,
    })
}

/// Maximum collision probability for two equiprobable pure states of
/// fidelity `f`: `1 − f/2`.
pub fn collision_probability_pure(f: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::OutOfRange {
            name: "f",
            value: f,
            range: "[0, 1]",
        });
    }
    Ok(1.0 - 0.5 * f)
}

/// Fidelities between Eve's normalised probe states for the two bit values,
/// given that Bob read correctly (`f_eq`) or wrongly (`f_neq`).
pub fn conditional_fidelities(p: AttackParams) -> Result<(f64, f64)> {
    p.check()?;
    let e = p.e.clamp(0.0, 0.5);
    let root_eq = (0.5 - e - p.delta).abs() / (1.0 - e);
    let root_neq = if e > 0.0 {
        (0.5 - e + p.delta).abs() / e
    } else {
        0.0
    };
    Ok((root_eq.min(1.0).powi(2), root_neq.min(1.0).powi(2)))
}

/// Collision probability when Eve learns which sifted bits were flipped:
/// `(1 − f_eq/2)^(1−e) (1 − f_neq/2)^e`.
pub fn leakage_assisted_cp(p: AttackParams) -> Result<f64> {
    let (f_eq, f_neq) = conditional_fidelities(p)?;
    Ok((1.0 - 0.5 * f_eq).powf(1.0 - p.e) * (1.0 - 0.5 * f_neq).powf(p.e))
}

/// Probability and posterior of one measurement outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeStats {
    pub probability: f64,
    /// `P(S = s │ M = m)` for Alice's bit `s`.
    pub posterior: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionStats {
    /// `Σ_m P(m) Σ_s P(s│m)²`.
    pub cp: f64,
    pub outcomes: Vec<OutcomeStats>,
}

impl CollisionStats {
    /// Builds the statistics from joint weights `P(s, m)`, listed per outcome.
    pub fn from_joint(joint: &[[f64; 2]]) -> Self {
        let outcomes: Vec<OutcomeStats> = joint
            .iter()
            .map(|&[p0, p1]| {
                let pm = p0 + p1;
                let posterior = if pm > 0.0 {
                    [p0 / pm, p1 / pm]
                } else {
                    [0.5, 0.5]
                };
                OutcomeStats {
                    probability: pm,
                    posterior,
                }
            })
            .collect();
        let total: f64 = outcomes.iter().map(|o| o.probability).sum();
        let cp = if total > 0.0 {
            outcomes
                .iter()
                .map(|o| o.probability * (o.posterior[0].powi(2) + o.posterior[1].powi(2)))
                .sum::<f64>()
                / total
        } else {
            0.5
        };
        Self { cp, outcomes }
    }
}

/// Which subspace the first stage of the two-stage measurement selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Bob read Alice's bit.
    Correct,
    /// Bob read the complement.
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub vector: Ket,
    pub stage: Stage,
    /// Eve's guess for Alice's bit.
    pub guess: bool,
}

/// A projective measurement on Eve's probe, possibly incomplete; missing
/// weight is an extra "inconclusive" outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeMeasurement {
    pub outcomes: Vec<Outcome>,
}

impl ProbeMeasurement {
    fn helstrom_pair(d: &Discrimination, stage: Stage) -> Vec<Outcome> {
        let mut out = vec![Outcome {
            vector: d.chi0.clone(),
            stage,
            guess: false,
        }];
        // For coinciding states the second direction lies outside their
        // span and would clash with other outcomes; one outcome suffices.
        if d.f < 1.0 - FIDELITY_EDGE {
            out.push(Outcome {
                vector: d.chi1.clone(),
                stage,
                guess: true,
            });
        }
        out
    }

    /// Helstrom measurement between the two correct-branch states.
    pub fn correct_bits(g: &ProbeGeometry) -> Result<Self> {
        let d = helstrom(g.correct(false), g.correct(true))?;
        Ok(Self {
            outcomes: Self::helstrom_pair(&d, Stage::Correct),
        })
    }

    /// Outcome probabilities for a (not necessarily normalised) probe vector,
    /// with the inconclusive remainder last.
    pub fn probabilities(&self, probe: &Ket) -> Vec<f64> {
        let mut p: Vec<f64> = self
            .outcomes
            .iter()
            .map(|o| o.vector.inner(probe).norm_sqr())
            .collect();
        let rest = (probe.norm_sqr() - p.iter().sum::<f64>()).max(0.0);
        p.push(rest);
        p
    }

    /// Number of outcomes including the inconclusive one.
    pub fn len(&self) -> usize {
        self.outcomes.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Collision statistics against a geometry: Alice's bit is uniform and
    /// Bob's reading is part of the probe branch.
    pub fn stats_for(&self, g: &ProbeGeometry) -> CollisionStats {
        let mut joint = vec![[0.0; 2]; self.len()];
        for bit in [false, true] {
            for probe in [g.correct(bit), g.error(bit)] {
                for (m, p) in self.probabilities(probe).into_iter().enumerate() {
                    joint[m][bit as usize] += 0.5 * p;
                }
            }
        }
        CollisionStats::from_joint(&joint)
    }
}

/// The two-stage measurement and what it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStage {
    pub measurement: ProbeMeasurement,
    /// Statistics of the full measurement, `Σ_m P(m) Σ_s P(s│m)²`.
    pub stats: CollisionStats,
    /// Collision probability inside the correct branch, `1 − f_eq/2`.
    pub cp_correct: f64,
    /// Collision probability inside the error branch, `1 − f_neq/2`.
    pub cp_error: f64,
    /// `cp_correct^(1−e) · cp_error^e`.
    pub cp_combined: f64,
}

/// Projects onto the correct or error span, then discriminates Alice's bit
/// inside the selected span.
pub fn two_stage_strategy(g: &ProbeGeometry) -> Result<TwoStage> {
    let e = g.qber();
    let mut outcomes = Vec::new();
    let mut branch_cp = [0.5; 2];
    for (k, stage) in [Stage::Correct, Stage::Error].into_iter().enumerate() {
        let (v0, v1) = match stage {
            Stage::Correct => (g.correct(false), g.correct(true)),
            Stage::Error => (g.error(false), g.error(true)),
        };
        if v0.norm_sqr() < EMPTY_BRANCH || v1.norm_sqr() < EMPTY_BRANCH {
            continue;
        }
        let d = helstrom(v0, v1)?;
        branch_cp[k] = d.collision_probability();
        outcomes.extend(ProbeMeasurement::helstrom_pair(&d, stage));
    }
    let measurement = ProbeMeasurement { outcomes };
    let stats = measurement.stats_for(g);
    let cp_combined = branch_cp[0].powf(1.0 - e) * branch_cp[1].powf(e);
    Ok(TwoStage {
        measurement,
        stats,
        cp_correct: branch_cp[0],
        cp_error: branch_cp[1],
        cp_combined,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    /// Helstrom on sifted rounds where Bob read correctly.
    CorrectBits,
    /// Two-stage measurement on every sifted round.
    TwoStage,
}

/// Per-basis measurements Eve applies once bases are announced.
#[derive(Debug, Clone, PartialEq)]
pub struct EveStrategy {
    pub kind: StrategyKind,
    pub measurements: [ProbeMeasurement; 2],
    /// Analytic collision probability, averaged over the two bases.
    pub predicted_cp: f64,
}

impl EveStrategy {
    pub fn new(kind: StrategyKind, attack: &dyn AttackExecutor) -> Result<Self> {
        let mut ms = Vec::with_capacity(2);
        let mut predicted = 0.0;
        for basis in Basis::ALL {
            let g = ProbeGeometry::from_attack(attack, basis)?;
            let (m, cp) = match kind {
                StrategyKind::CorrectBits => {
                    let m = ProbeMeasurement::correct_bits(&g)?;
                    let d = helstrom(g.correct(false), g.correct(true))?;
                    (m, d.collision_probability())
                }
                StrategyKind::TwoStage => {
                    // The first stage needs orthogonal correct and error spans.
                    g.check(TWO_STAGE_TOL)?;
                    let t = two_stage_strategy(&g)?;
                    (t.measurement, t.stats.cp)
                }
            };
            predicted += 0.5 * cp;
            ms.push(m);
        }
        let [m0, m1]: [ProbeMeasurement; 2] = ms.try_into().expect("two bases");
        Ok(Self {
            kind,
            measurements: [m0, m1],
            predicted_cp: predicted,
        })
    }

    fn uses(&self, r: &ExchangeRecord) -> bool {
        match self.kind {
            StrategyKind::CorrectBits => r.error == Some(false),
            StrategyKind::TwoStage => r.sifted,
        }
    }
}

/// Empirical collision probability from simulated outcomes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCollision {
    pub stats: CollisionStats,
    /// Bootstrap standard error of `stats.cp`.
    pub stderr: f64,
    /// Records the strategy applied to.
    pub samples: usize,
    pub predicted_cp: f64,
}

fn empirical_cp(counts: &[u64], per_cell_outcome: usize) -> f64 {
    let joint: Vec<[f64; 2]> = counts
        .chunks(2 * per_cell_outcome)
        .flat_map(|basis| basis.chunks(2).map(|c| [c[0] as f64, c[1] as f64]))
        .collect();
    CollisionStats::from_joint(&joint).cp
}

/// Multinomial draw of `n` items over cells weighted by `counts`.
fn resample<R: Rng + ?Sized>(counts: &[u64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; counts.len()];
    let mut left = n;
    let mut mass: u64 = counts.iter().sum();
    for (slot, &c) in out.iter_mut().zip(counts) {
        if left == 0 || mass == 0 {
            break;
        }
        let p = (c as f64 / mass as f64).min(1.0);
        let k = Binomial::new(left, p)
            .expect("valid probability")
            .sample(rng);
        *slot = k;
        left -= k;
        mass -= c;
    }
    out
}

/// Samples Eve's outcome for every record the strategy applies to, bins by
/// (basis, outcome, Alice's bit) and reports the empirical collision
/// probability with a bootstrap standard error.
pub fn simulate_eve(
    exchange: &Exchange,
    strategy: &EveStrategy,
    seed: u64,
) -> Result<EmpiricalCollision> {
    let width = strategy
        .measurements
        .iter()
        .map(|m| m.len())
        .max()
        .unwrap_or(1);
    // Cumulative outcome distribution per probe-record index.
    let cumulative: Vec<Vec<f64>> = exchange
        .probe_states
        .iter()
        .enumerate()
        .map(|(idx, probe)| {
            let basis = Basis::from_index((idx >> 3) & 1);
            let mut acc = 0.0;
            strategy.measurements[basis.index()]
                .probabilities(probe)
                .into_iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect()
        })
        .collect();

    let cells = 2 * width * 2;
    let counts = exchange
        .records
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(k, chunk)| {
            let mut rng = chunk_rng(seed, k as u64);
            let mut counts = vec![0u64; cells];
            for r in chunk.iter().filter(|r| strategy.uses(r)) {
                let cum = &cumulative[r.eve_record.0 as usize];
                let u: f64 = rng.random::<f64>() * cum.last().copied().unwrap_or(1.0);
                let m = cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1);
                counts[(r.alice_basis.index() * width + m) * 2 + r.alice_bit as usize] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; cells],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let samples: u64 = counts.iter().sum();
    if samples == 0 {
        return Err(Error::EmptyInput);
    }
    let joint: Vec<[f64; 2]> = counts
        .chunks(2)
        .map(|c| [c[0] as f64 / samples as f64, c[1] as f64 / samples as f64])
        .collect();
    let stats = CollisionStats::from_joint(&joint);

    let mut rng = chunk_rng(seed, u64::MAX);
    let boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| empirical_cp(&resample(&counts, samples, &mut rng), width))
        .collect();
    let mean = boot.iter().sum::<f64>() / boot.len() as f64;
    let var = boot.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (boot.len() - 1) as f64;

    Ok(EmpiricalCollision {
        stats,
        stderr: var.sqrt(),
        samples: samples as usize,
        predicted_cp: strategy.predicted_cp,
    })
}
