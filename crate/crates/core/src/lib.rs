//! Kloosterman sums, their aggregates over moduli, the modular-inverse
//! point set S(X), and discrepancy measurements against the analytic
//! envelopes that govern them.

pub mod aggregate;
pub mod arith;
pub mod config;
pub mod discrepancy;
pub mod error;
pub mod kloosterman;
pub mod pointset;
pub mod report;

pub use error::{Error, Result};

/// Canonical float formatting for CSV/JSON output: 17 significant
/// digits round-trip any f64 exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
