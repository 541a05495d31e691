//! Random threshold graphs under fitness scaling.
//!
//! Nodes carry i.i.d. fitness values and two nodes link when their fitness
//! values sum above a threshold. This crate generates such graphs, evaluates
//! the limiting degree laws numerically, and runs the replication
//! experiments that show the empirical degree fraction converging to a
//! random, not constant, limit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod fitness;
pub mod graph;
pub mod harness;
pub mod joint;
pub mod limits;
pub mod quadrature;
pub mod rng;

pub use error::{Result, RtgError};
pub use fitness::FitnessModel;

use serde::Serialize;

/// A numerical value with its error: an absolute error estimate for
/// quadrature, a standard error for Monte Carlo.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, error: 0.0 }
    }

    /// Mean and standard error of the mean.
    pub fn from_moments(sum: f64, sum_sq: f64, count: u64) -> Self {
        let n = count as f64;
        let mean = sum / n;
        if count < 2 {
            return Estimate { value: mean, error: f64::NAN };
        }
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        Estimate { value: mean, error: (var / n).sqrt() }
    }

    /// `|a − b| ≤ k·sqrt(err_a² + err_b²)`.
    pub fn agrees(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.error.hypot(other.error)
    }
}
