//! BB84 signal encoding, Bob's measurement, and the Monte Carlo exchange
//! harness that drives an attack.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`), a counter-based
//! stream cipher generator. Rounds are cut into fixed-size chunks; chunk `k`
//! draws from stream `k` of the generator keyed by the user seed, so the
//! output is bit-identical for any number of worker threads.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, Ket, Operator};

/// Angle between the signal states and the symmetric basis `{e₀, e₁}`.
pub const ALPHA: f64 = PI / 8.0;

/// Rounds per RNG stream.
pub const CHUNK: usize = 1 << 16;

/// Smallest branch probability `measure` will sample into.
const MIN_BRANCH_PROB: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Basis {
    U,
    V,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::U, Basis::V];

    pub fn index(self) -> usize {
        match self {
            Basis::U => 0,
            Basis::V => 1,
        }
    }

    pub fn from_index(i: usize) -> Basis {
        if i == 0 {
            Basis::U
        } else {
            Basis::V
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Basis::U => "U",
            Basis::V => "V",
        }
    }
}

/// A prepared BB84 signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalState {
    pub basis: Basis,
    pub bit: bool,
    pub ket: Ket,
}

impl SignalState {
    pub fn new(basis: Basis, bit: bool) -> Self {
        Self {
            basis,
            bit,
            ket: encode(basis, bit),
        }
    }
}

/// Signal ket for `bit` in `basis`, written in the symmetric basis:
///
/// ```text
/// |u⟩ =  cos α e₀ + sin α e₁     |ū⟩ = −sin α e₀ + cos α e₁
/// |v⟩ =  sin α e₀ + cos α e₁     |v̄⟩ =  cos α e₀ − sin α e₁
/// ```
pub fn encode(basis: Basis, bit: bool) -> Ket {
    let (c, s) = (ALPHA.cos(), ALPHA.sin());
    let amps = match (basis, bit) {
        (Basis::U, false) => [c, s],
        (Basis::U, true) => [-s, c],
        (Basis::V, false) => [s, c],
        (Basis::V, true) => [c, -s],
    };
    Ket::from_real(&amps).expect("finite amplitudes")
}

/// One outcome of Bob's measurement on a joint signal⊗probe state.
#[derive(Debug, Clone)]
pub struct Branch {
    pub bit: bool,
    pub probability: f64,
    /// Sub-normalised conditional probe state (trace = `probability`).
    pub probe: DensityMatrix,
}

/// Both outcomes of measuring the signal factor of `state` in `basis`.
pub fn measurement_branches(state: &DensityMatrix, basis: Basis) -> Result<[Branch; 2]> {
    let dim = state.dim();
    if !dim.is_multiple_of(2) {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: dim,
        });
    }
    let d = dim / 2;
    let op = state.as_operator();
    let branch = |bit: bool| -> Branch {
        let b = encode(basis, bit);
        // (⟨b| ⊗ I) ρ (|b⟩ ⊗ I)
        let cond = Operator::from_fn(d, |i, j| {
            let mut acc = num_complex::Complex64::default();
            for s in 0..2 {
                for t in 0..2 {
                    acc += b.get(s).conj() * op.get(s * d + i, t * d + j) * b.get(t);
                }
            }
            acc
        });
        let probability = cond.trace().re.max(0.0);
        Branch {
            bit,
            probability,
            probe: DensityMatrix::new(cond).unwrap_or_else(|_| {
                // Round-off on a vanishing branch; keep the raw operator.
                DensityMatrix::from_ket(&Ket::zeros(d))
            }),
        }
    };
    Ok([branch(false), branch(true)])
}

/// Bob measures the signal factor of `state` (signal ⊗ probe) in `basis`.
///
/// Returns the sampled bit and the renormalised conditional probe state.
pub fn measure<R: Rng + ?Sized>(
    state: &DensityMatrix,
    basis: Basis,
    rng: &mut R,
) -> Result<(bool, DensityMatrix)> {
    let [zero, one] = measurement_branches(state, basis)?;
    let total = zero.probability + one.probability;
    let draw: f64 = rng.random::<f64>() * total;
    let chosen = if draw < zero.probability { zero } else { one };
    if chosen.probability < MIN_BRANCH_PROB {
        return Err(Error::NegligibleBranch {
            probability: chosen.probability,
        });
    }
    let probe = chosen.probe.normalized()?;
    Ok((chosen.bit, probe))
}

/// Anything that entangles a signal with a probe.
pub trait AttackExecutor: Sync {
    fn probe_dim(&self) -> usize;

    /// Joint signal⊗probe state after the interaction, for a 2-dim signal.
    fn interact(&self, signal: &Ket) -> Ket;
}

/// The trivial channel: a one-dimensional probe that never changes.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityAttack;

impl AttackExecutor for IdentityAttack {
    fn probe_dim(&self) -> usize {
        1
    }

    fn interact(&self, signal: &Ket) -> Ket {
        signal.clone()
    }
}

/// Index into [`Exchange::probe_states`]; the opaque Eve payload of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProbeRecord(pub u8);

impl ProbeRecord {
    fn new(alice_basis: Basis, alice_bit: bool, bob_basis: Basis, bob_bit: bool) -> Self {
        ProbeRecord(
            (alice_basis.index() as u8) << 3
                | (alice_bit as u8) << 2
                | (bob_basis.index() as u8) << 1
                | bob_bit as u8,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExchangeRecord {
    pub round: u64,
    pub alice_basis: Basis,
    pub alice_bit: bool,
    pub bob_basis: Basis,
    pub bob_bit: bool,
    pub sifted: bool,
    /// `None` for unsifted rounds.
    pub error: Option<bool>,
    pub eve_record: ProbeRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExchangeSummary {
    pub n: usize,
    pub seed: u64,
    pub sifted: usize,
    pub errors: usize,
    pub qber: f64,
    pub qber_stderr: f64,
}

/// Outcome of a simulated exchange.
#[derive(Debug, Clone)]
pub struct Exchange {
    pub records: Vec<ExchangeRecord>,
    /// Normalised conditional probe state for every `(alice basis, alice bit,
    /// bob basis, bob bit)` combination, indexed by [`ProbeRecord`]. Entries
    /// for zero-probability branches are zero vectors.
    pub probe_states: Vec<Ket>,
    pub summary: ExchangeSummary,
}

impl Exchange {
    pub fn probe_state(&self, record: &ExchangeRecord) -> &Ket {
        &self.probe_states[record.eve_record.0 as usize]
    }
}

struct BranchTable {
    /// `p(bob_bit = 0)` per (alice basis, alice bit, bob basis).
    p_zero: [f64; 8],
    states: Vec<Ket>,
}

fn branch_table(attack: &dyn AttackExecutor) -> Result<BranchTable> {
    let mut p_zero = [0.0; 8];
    let mut states = vec![Ket::zeros(attack.probe_dim()); 16];
    for ab in Basis::ALL {
        for abit in [false, true] {
            let joint = attack.interact(&encode(ab, abit));
            if joint.dim() != 2 * attack.probe_dim() {
                return Err(Error::DimensionMismatch {
                    expected: 2 * attack.probe_dim(),
                    found: joint.dim(),
                });
            }
            for bb in Basis::ALL {
                let mut probs = [0.0; 2];
                for bbit in [false, true] {
                    let probe = joint.contract_first(&encode(bb, bbit))?;
                    let p = probe.norm_sqr();
                    probs[bbit as usize] = p;
                    if p > 0.0 {
                        states[ProbeRecord::new(ab, abit, bb, bbit).0 as usize] =
                            probe.normalized()?;
                    }
                }
                let slot = ab.index() * 4 + (abit as usize) * 2 + bb.index();
                p_zero[slot] = probs[0] / (probs[0] + probs[1]);
            }
        }
    }
    Ok(BranchTable { p_zero, states })
}

/// Stream for chunk `chunk` of a run keyed by `seed`.
pub(crate) fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Simulates `n` BB84 rounds through `attack`.
///
/// Alice's basis and bit and Bob's basis are independent fair coins; Bob's
/// outcome follows the Born rule on the attacked state. Unsifted rounds stay
/// in the record list with `sifted = false`.
pub fn run_exchange(attack: &dyn AttackExecutor, n: usize, seed: u64) -> Result<Exchange> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let table = branch_table(attack)?;
    let chunks = n.div_ceil(CHUNK);
    let records: Vec<ExchangeRecord> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = chunk_rng(seed, k as u64);
            let start = k * CHUNK;
            let end = (start + CHUNK).min(n);
            (start..end)
                .map(|round| {
                    let alice_basis = Basis::from_index(rng.random::<bool>() as usize);
                    let alice_bit: bool = rng.random();
                    let bob_basis = Basis::from_index(rng.random::<bool>() as usize);
                    let u: f64 = rng.random();
                    let slot =
                        alice_basis.index() * 4 + (alice_bit as usize) * 2 + bob_basis.index();
                    let bob_bit = u >= table.p_zero[slot];
                    let sifted = alice_basis == bob_basis;
                    ExchangeRecord {
                        round: round as u64,
                        alice_basis,
                        alice_bit,
                        bob_basis,
                        bob_bit,
                        sifted,
                        error: sifted.then_some(alice_bit != bob_bit),
                        eve_record: ProbeRecord::new(alice_basis, alice_bit, bob_basis, bob_bit),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let sifted = records.iter().filter(|r| r.sifted).count();
    let errors = records.iter().filter(|r| r.error == Some(true)).count();
    let (qber, qber_stderr) = if sifted > 0 {
        qber_from_counts(errors, sifted)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(Exchange {
        records,
        probe_states: table.states,
        summary: ExchangeSummary {
            n,
            seed,
            sifted,
            errors,
            qber,
            qber_stderr,
        },
    })
}

fn qber_from_counts(errors: usize, sifted: usize) -> (f64, f64) {
    let q = errors as f64 / sifted as f64;
    (q, (q * (1.0 - q) / sifted as f64).sqrt())
}

/// Empirical QBER over the sifted records and its binomial standard error.
pub fn estimate_qber(records: &[ExchangeRecord]) -> Result<(f64, f64)> {
    let sifted = records.iter().filter(|r| r.sifted).count();
    if sifted == 0 {
        return Err(Error::EmptySifted);
    }
    let errors = records.iter().filter(|r| r.error == Some(true)).count();
    Ok(qber_from_counts(errors, sifted))
}

/// Writes records as CSV with header
/// `round,alice_basis,alice_bit,bob_basis,bob_bit,sifted,error`.
pub fn write_records_csv<W: Write>(records: &[ExchangeRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "round",
        "alice_basis",
        "alice_bit",
        "bob_basis",
        "bob_bit",
        "sifted",
        "error",
    ])?;
    let bit = |b: bool| if b { "1" } else { "0" };
    for r in records {
        w.write_record([
            r.round.to_string().as_str(),
            r.alice_basis.label(),
            bit(r.alice_bit),
            r.bob_basis.label(),
            bit(r.bob_bit),
            bit(r.sifted),
            r.error.map(bit).unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pure_fidelity;

    #[test]
    fn encode_matches_signal_definitions() {
        let u = encode(Basis::U, false);
        assert!((u.get(0).re - (PI / 8.0).cos()).abs() < 1e-15);
        assert!((u.get(1).re - (PI / 8.0).sin()).abs() < 1e-15);
    }

    #[test]
    fn bases_are_orthonormal_and_unbiased() {
        for b in Basis::ALL {
            let k0 = encode(b, false);
            let k1 = encode(b, true);
            assert!(k0.inner(&k1).norm() < 1e-12);
            assert!((k0.norm() - 1.0).abs() < 1e-15);
        }
        for a in [false, true] {
            for b in [false, true] {
                let f = pure_fidelity(&encode(Basis::U, a), &encode(Basis::V, b)).unwrap();
                assert!((f - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unattacked_same_basis_measurement_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let state = DensityMatrix::from_ket(&encode(Basis::U, false));
        for _ in 0..100 {
            let (bit, probe) = measure(&state, Basis::U, &mut rng).unwrap();
            assert!(!bit);
            assert!((probe.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_basis_measurement_is_a_fair_coin() {
        let state = DensityMatrix::from_ket(&encode(Basis::U, false));
        let [zero, one] = measurement_branches(&state, Basis::V).unwrap();
        assert!((zero.probability - 0.5).abs() < 1e-12);
        assert!((one.probability - 0.5).abs() < 1e-12);
    }

    #[test]
    fn measure_rejects_odd_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let state = DensityMatrix::from_ket(&Ket::basis(3, 0));
        assert!(matches!(
            measure(&state, Basis::U, &mut rng),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn identity_channel_has_no_errors() {
        let ex = run_exchange(&IdentityAttack, 100_000, 5).unwrap();
        assert_eq!(ex.summary.errors, 0);
        assert_eq!(ex.summary.qber, 0.0);
        let (q, _) = estimate_qber(&ex.records).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn exchange_is_reproducible() {
        let a = run_exchange(&IdentityAttack, 200_000, 42).unwrap();
        let b = run_exchange(&IdentityAttack, 200_000, 42).unwrap();
        assert_eq!(a.records, b.records);
        let c = run_exchange(&IdentityAttack, 200_000, 43).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn sifted_flag_tracks_basis_agreement() {
        let ex = run_exchange(&IdentityAttack, 10_000, 9).unwrap();
        for r in &ex.records {
            assert_eq!(r.sifted, r.alice_basis == r.bob_basis);
            assert_eq!(r.error.is_some(), r.sifted);
        }
    }

    #[test]
    fn qber_arithmetic() {
        let mk = |error: bool| ExchangeRecord {
            round: 0,
            alice_basis: Basis::U,
            alice_bit: false,
            bob_basis: Basis::U,
            bob_bit: error,
            sifted: true,
            error: Some(error),
            eve_record: ProbeRecord(0),
        };
        let mut records: Vec<_> = (0..450).map(|_| mk(false)).collect();
        records.extend((0..50).map(|_| mk(true)));
        let (q, se) = estimate_qber(&records).unwrap();
        assert!((q - 0.1).abs() < 1e-15);
        assert!((se - (0.09f64 / 500.0).sqrt()).abs() < 1e-15);
        assert_eq!(estimate_qber(&[]), Err(Error::EmptySifted));
    }

    #[test]
    fn records_csv_header_and_rows() {
        let ex = run_exchange(&IdentityAttack, 3, 0).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&ex.records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "round,alice_basis,alice_bit,bob_basis,bob_bit,sifted,error"
        );
        assert_eq!(lines.count(), 3);
    }
}
