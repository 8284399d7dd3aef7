//! Numerical laboratory for individual entangling-probe attacks on BB84.
//!
//! * [`linalg`]: kets, operators, density matrices, partial traces and
//!   fidelities on small dense complex spaces.
//! * [`signals`]: the four BB84 signals, measurement and a seeded Monte
//!   Carlo of the quantum exchange.
//! * [`attacks`]: probe geometries parametrised by QBER and imbalance, the
//!   CNOT probe, the four-angle family and group symmetrization.
//! * [`eve`]: Helstrom discrimination, collision probabilities and Eve's
//!   two-stage measurement.
//! * [`bounds`]: discarded-fraction curves, the imbalance optimizer, key
//!   gains and the random bound verifier.
//!
//! Randomness comes from ChaCha8 streams keyed by an explicit `u64` seed,
//! so every stochastic result is reproducible and independent of the
//! number of worker threads.

pub mod attacks;
pub mod bounds;
pub mod error;
pub mod eve;
pub mod linalg;
pub mod signals;

pub use attacks::{AttackParams, EntanglingProbe, ProbeGeometry};
pub use bounds::{CurveKind, EGrid, GainModel, SecurityCurve};
pub use error::{Error, Result};
pub use eve::{CollisionStats, Discrimination, EveStrategy, StrategyKind};
pub use linalg::{DensityMatrix, Ket, Operator};
pub use signals::{AttackExecutor, Basis, Exchange, ExchangeRecord};

/// Crate version, embedded in generated artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
