//! Gains-from-trade analysis for bilateral trade under the random proposer
//! mechanism.
//!
//! The crate computes, for a buyer and a seller with independent priors,
//! the first-best gains from trade, the canonical best-response equilibrium
//! of the random proposer mechanism, and the fixed-value geometric
//! quantities (areas `S`, `B`, `A` and the deviation utilities) that
//! certify the mechanism earns at least a `1/4` and a `1/3.1462` fraction
//! of the first best.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `f64`
//! aliases below are what the command-line tool uses.

pub mod distributions;
pub mod error;
pub mod geometry;
pub mod mechanism;
pub mod montecarlo;
pub mod numeric;
pub mod ratio;
pub mod scalar;
pub mod search;

pub use error::{Error, Result, ValidationReport, Violation};
pub use scalar::Scalar;

pub type Distribution = distributions::Distribution<f64>;
pub type RawDistribution = distributions::RawDistribution<f64>;
pub type TradeInstance = mechanism::TradeInstance<f64>;
pub type RawInstance = mechanism::RawInstance<f64>;
pub type BestResponse = mechanism::BestResponse<f64>;
pub type EquilibriumReport = mechanism::EquilibriumReport<f64>;
pub type DecompositionReport = geometry::DecompositionReport<f64>;
pub type ExpectedDecomposition = geometry::ExpectedDecomposition<f64>;
pub type BoundReport = geometry::BoundReport<f64>;
pub type LambdaOptimum = ratio::LambdaOptimum<f64>;
pub type GuaranteeMargins = ratio::GuaranteeMargins<f64>;
pub type SimEstimate = montecarlo::SimEstimate<f64>;
pub type MechanismEstimate = montecarlo::MechanismEstimate<f64>;
pub type SearchConfig = search::SearchConfig<f64>;
pub type SearchResult = search::SearchResult<f64>;
