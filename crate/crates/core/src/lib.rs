//! Auditing seller pricing transcripts for algorithmic (non-)collusion.
//!
//! The crate is split along the lines of the audit workflow:
//!
//! - [`transcript`]: price grids, per-round price distributions, transcripts and
//!   their line-oriented JSON persistence.
//! - [`market`]: ground-truth demand for the two duopoly environments used in the
//!   experiments (a discrete valuation table and uniform valuations on `[0,1]²`).
//! - [`sellers`]: pricing strategies (stateless Q-learning, multiplicative weights,
//!   fixed price, a two-phase manipulator) and a seeded two-seller simulator.
//! - [`audit`]: the pessimistic calibrated-regret audit (propensity estimates,
//!   pairwise regret terms affine in cost, exact convex minimization, error margin).
//! - [`aggregate`]: the same audit when only posted prices are recorded, using
//!   windowed empirical price distributions.
//! - [`oracles`]: quantities only available with the ground truth (true and
//!   pessimistic regret, best-in-hindsight regret, exact estimator expectations).
//!
//! The audit never sees a [`oracles::GroundTruth`]; only the simulator and the test
//! suites do.

pub mod aggregate;
pub mod audit;
pub mod market;
pub mod oracles;
pub mod rational;
pub mod sellers;
pub mod transcript;

pub use audit::{audit, AuditError, AuditReport, Verdict};
pub use transcript::{
    read_transcript, validate, write_transcript, AuditConfig, CostRange, PriceDistribution,
    PriceGrid, Transcript, TranscriptError, TranscriptRecord, Violation,
};
