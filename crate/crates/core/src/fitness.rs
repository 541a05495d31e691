//! Fitness distributions, their intensity maps and threshold scalings.
//!
//! A fitness model bundles a continuous distribution `F` on `[0, ∞)`, the
//! threshold scaling `θ*_n` under which `n·(1 − F(θ*_n − x))` converges, and
//! the limit `λ(x)` of that quantity. The two built-in families are
//!
//! * exponential with rate `λ`: `θ*_n = log(n)/λ`, `λ(x) = e^{λx}`;
//! * Pareto with scale `a`, shape `ν`: `θ*_n = a·n^{1/ν}`, `λ(x) ≡ 1`.
//!
//! Anything else goes through [`CustomFitness`], which must supply every
//! evaluator explicitly.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Result, RtgError};

pub type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ScalingEvaluator = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

/// User-supplied fitness family.
#[derive(Clone)]
pub struct CustomFitness {
    pub name: String,
    pub cdf: Evaluator,
    pub tail: Evaluator,
    /// Inverse cdf on `(0, 1)`. Without it the model cannot be sampled or
    /// integrated against.
    pub quantile: Option<Evaluator>,
    pub intensity: Evaluator,
    pub scaling: ScalingEvaluator,
}

impl fmt::Debug for CustomFitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFitness")
            .field("name", &self.name)
            .field("has_quantile", &self.quantile.is_some())
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum FitnessModel {
    Exponential { rate: f64 },
    Pareto { scale: f64, shape: f64 },
    Custom(Arc<CustomFitness>),
}

impl FitnessModel {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(RtgError::invalid(format!("exponential rate must be > 0, got {rate}")));
        }
        Ok(FitnessModel::Exponential { rate })
    }

    pub fn pareto(scale: f64, shape: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(RtgError::invalid(format!("pareto scale must be > 0, got {scale}")));
        }
        if !(shape.is_finite() && shape > 0.0) {
            return Err(RtgError::invalid(format!("pareto shape must be > 0, got {shape}")));
        }
        Ok(FitnessModel::Pareto { scale, shape })
    }

    pub fn custom(custom: CustomFitness) -> Self {
        FitnessModel::Custom(Arc::new(custom))
    }

    pub fn name(&self) -> String {
        match self {
            FitnessModel::Exponential { .. } => "exponential".into(),
            FitnessModel::Pareto { .. } => "pareto".into(),
            FitnessModel::Custom(c) => c.name.clone(),
        }
    }

    /// `P(ξ ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            FitnessModel::Exponential { rate } => -(-rate * x).exp_m1(),
            FitnessModel::Pareto { .. } => 1.0 - self.tail(x),
            FitnessModel::Custom(c) => (c.cdf)(x).clamp(0.0, 1.0),
        }
    }

    /// `P(ξ > x)`, evaluated directly so that small tails keep full precision.
    pub fn tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self {
            FitnessModel::Exponential { rate } => (-rate * x).exp(),
            FitnessModel::Pareto { scale, shape } => (scale / (scale + x)).powf(*shape),
            FitnessModel::Custom(c) => (c.tail)(x).clamp(0.0, 1.0),
        }
    }

    /// Inverse cdf for `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(RtgError::invalid(format!("quantile level must lie in [0,1), got {u}")));
        }
        Ok(match self {
            FitnessModel::Exponential { rate } => -(-u).ln_1p() / rate,
            FitnessModel::Pareto { scale, shape } => {
                scale * ((-(-u).ln_1p() / shape).exp_m1())
            }
            FitnessModel::Custom(c) => match &c.quantile {
                Some(q) => q(u),
                None => return Err(self.no_quantile()),
            },
        })
    }

    /// The point `x` with `tail(x) = w`, for `w` in `(0, 1]`.
    ///
    /// Integrals over `dF` are computed in this coordinate: `E[g(ξ)] =
    /// ∫₀¹ g(tail⁻¹(w)) dw`. For the exponential family this is the map
    /// `w = e^{−λx}`.
    pub fn tail_quantile(&self, w: f64) -> Result<f64> {
        Ok(match self {
            FitnessModel::Exponential { rate } => -w.ln() / rate,
            FitnessModel::Pareto { scale, shape } => scale * ((-w.ln() / shape).exp_m1()),
            FitnessModel::Custom(c) => match &c.quantile {
                Some(q) => q(1.0 - w).max(0.0),
                None => return Err(self.no_quantile()),
            },
        })
    }

    /// Fails for custom models without a quantile evaluator.
    pub fn require_quantile(&self) -> Result<()> {
        match self {
            FitnessModel::Custom(c) if c.quantile.is_none() => Err(self.no_quantile()),
            _ => Ok(()),
        }
    }

    fn no_quantile(&self) -> RtgError {
        RtgError::Unsupported(format!("custom model '{}' has no quantile evaluator", self.name()))
    }

    /// Draws `count` i.i.d. fitness values by inverse-cdf transform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(RtgError::invalid("sample count must be at least 1"));
        }
        self.require_quantile()?;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let u: f64 = rng.random();
            out.push(self.quantile(u)?);
        }
        Ok(out)
    }

    /// The threshold `θ*_n`; real valued, no rounding.
    pub fn scaling_threshold(&self, n: u64) -> f64 {
        match self {
            FitnessModel::Exponential { rate } => (n as f64).ln() / rate,
            FitnessModel::Pareto { scale, shape } => scale * (n as f64).powf(1.0 / shape),
            FitnessModel::Custom(c) => (c.scaling)(n),
        }
    }

    /// The limit intensity `λ(x)`.
    pub fn intensity(&self, x: f64) -> f64 {
        match self {
            FitnessModel::Exponential { rate } => (rate * x.max(0.0)).exp(),
            FitnessModel::Pareto { .. } => 1.0,
            FitnessModel::Custom(c) => (c.intensity)(x),
        }
    }

    /// `ln λ(x)`, exact for the exponential family where `λ` overflows first.
    pub fn ln_intensity(&self, x: f64) -> f64 {
        match self {
            FitnessModel::Exponential { rate } => rate * x.max(0.0),
            _ => self.intensity(x).ln(),
        }
    }

    /// Whether `λ` is known to be constant (and its value).
    pub fn constant_intensity(&self) -> Option<f64> {
        match self {
            FitnessModel::Pareto { .. } => Some(1.0),
            _ => None,
        }
    }

    /// Parameters as JSON, for config echoes.
    pub fn describe(&self) -> serde_json::Value {
        match self {
            FitnessModel::Exponential { rate } => {
                serde_json::json!({ "family": "exponential", "rate": rate })
            }
            FitnessModel::Pareto { scale, shape } => {
                serde_json::json!({ "family": "pareto", "scale": scale, "shape": shape })
            }
            FitnessModel::Custom(c) => serde_json::json!({ "family": "custom", "name": c.name }),
        }
    }

    /// Evaluates `n·tail(θ*_n − x)` on the grids and compares it to `λ(x)`.
    pub fn check_scaling(&self, x_grid: &[f64], n_grid: &[u64]) -> Result<ScalingReport> {
        if x_grid.is_empty() || n_grid.is_empty() {
            return Err(RtgError::invalid("scaling check needs non-empty x and n grids"));
        }
        if let Some(x) = x_grid.iter().find(|x| !(**x >= 0.0)) {
            return Err(RtgError::invalid(format!("x grid values must be >= 0, got {x}")));
        }
        if let Some(n) = n_grid.iter().find(|n| **n < 2) {
            return Err(RtgError::invalid(format!("n grid values must be >= 2, got {n}")));
        }
        let limits: Vec<f64> = x_grid.iter().map(|&x| self.intensity(x)).collect();
        let rows: Vec<ScalingRow> = n_grid
            .iter()
            .map(|&n| {
                let theta = self.scaling_threshold(n);
                let values: Vec<f64> =
                    x_grid.iter().map(|&x| n as f64 * self.tail(theta - x)).collect();
                let residuals: Vec<f64> =
                    values.iter().zip(&limits).map(|(v, l)| (v - l).abs()).collect();
                let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
                ScalingRow { n, theta, values, residuals, max_residual }
            })
            .collect();

        // Earliest grid position from which the max residual never increases.
        let mut settled = rows.len() - 1;
        while settled > 0 && rows[settled - 1].max_residual >= rows[settled].max_residual {
            settled -= 1;
        }
        Ok(ScalingReport {
            model: self.name(),
            x_grid: x_grid.to_vec(),
            limits,
            settled_from_n: rows[settled].n,
            rows,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingRow {
    pub n: u64,
    pub theta: f64,
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Evidence for the scaling assumption; reported, never asserted.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub model: String,
    pub x_grid: Vec<f64>,
    pub limits: Vec<f64>,
    pub rows: Vec<ScalingRow>,
    /// Residuals are non-increasing from this grid value of `n` onward.
    pub settled_from_n: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cdf_support_and_closed_forms() {
        let e = FitnessModel::exponential(1.0).unwrap();
        assert_eq!(e.cdf(-1.0), 0.0);
        assert_eq!(e.cdf(0.0), 0.0);
        assert!((e.cdf(2f64.ln()) - 0.5).abs() < 1e-15);
        let p = FitnessModel::pareto(1.0, 2.0).unwrap();
        assert!((p.cdf(1.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FitnessModel::exponential(0.0).is_err());
        assert!(FitnessModel::exponential(f64::NAN).is_err());
        assert!(FitnessModel::pareto(1.0, -2.0).is_err());
        assert!(FitnessModel::pareto(0.0, 2.0).is_err());
    }

    #[test]
    fn quantile_examples() {
        let e = FitnessModel::exponential(1.0).unwrap();
        assert!((e.quantile(0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        let p = FitnessModel::pareto(1.0, 1.0).unwrap();
        assert!((p.quantile(0.5).unwrap() - 1.0).abs() < 1e-14);
        assert!(e.quantile(1.0).is_err());
    }

    #[test]
    fn cdf_tail_and_quantile_roundtrip() {
        let models = [
            FitnessModel::exponential(1.0).unwrap(),
            FitnessModel::exponential(3.5).unwrap(),
            FitnessModel::pareto(1.0, 2.0).unwrap(),
            FitnessModel::pareto(0.3, 0.7).unwrap(),
        ];
        for m in &models {
            for i in 0..=200 {
                let x = -1.0 + i as f64 * 0.1;
                assert!((m.cdf(x) + m.tail(x) - 1.0).abs() <= 1e-12);
            }
            for i in 1..1000 {
                let u = i as f64 / 1000.0;
                let x = m.quantile(u).unwrap();
                assert!((m.cdf(x) - u).abs() <= 1e-9, "{m:?} u={u}");
                let xw = m.tail_quantile(1.0 - u).unwrap();
                assert!((m.tail(xw) - (1.0 - u)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn scaling_examples() {
        let e = FitnessModel::exponential(1.0).unwrap();
        assert_eq!(e.scaling_threshold(1), 0.0);
        let n = std::f64::consts::E.powi(2).ceil() as u64;
        assert_eq!(n, 8);
        assert!((e.scaling_threshold(n) - 2.0).abs() < 0.08);
        let p = FitnessModel::pareto(1.0, 2.0).unwrap();
        assert!((p.scaling_threshold(100) - 10.0).abs() < 1e-12);
        let mut prev = f64::NEG_INFINITY;
        for n in 1..500 {
            let t = e.scaling_threshold(n);
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn intensity_examples() {
        let e2 = FitnessModel::exponential(2.0).unwrap();
        assert!((e2.intensity(1.0) - 2f64.exp()).abs() < 1e-12);
        assert_eq!(e2.intensity(0.0), 1.0);
        let p = FitnessModel::pareto(2.0, 3.0).unwrap();
        assert_eq!(p.intensity(7.5), 1.0);
        let grid: Vec<f64> = (0..100).map(|i| i as f64 * 0.05).collect();
        for w in grid.windows(2) {
            assert!(e2.intensity(w[1]) >= e2.intensity(w[0]));
        }
    }

    #[test]
    fn exponential_scaling_residual_is_exact() {
        let e = FitnessModel::exponential(1.5).unwrap();
        let xs = [0.0, 0.5, 1.0, 2.0];
        let ns = [10, 100, 1000, 100_000];
        let rep = e.check_scaling(&xs, &ns).unwrap();
        for row in rep.rows.iter().filter(|r| r.theta >= 2.0) {
            for (r, v) in row.residuals.iter().zip(&row.values) {
                assert!(*r <= 1e-12 * v.max(1.0), "n={} residual {r}", row.n);
            }
        }
    }

    #[test]
    fn pareto_scaling_approaches_one() {
        let p = FitnessModel::pareto(1.0, 2.0).unwrap();
        let rep = p.check_scaling(&[0.0], &[1_000_000]).unwrap();
        assert!((rep.rows[0].values[0] - 1.0).abs() < 0.01);
        let rep = p.check_scaling(&[0.0, 1.0], &[10, 100, 1000, 10_000]).unwrap();
        assert_eq!(rep.settled_from_n, 10);
    }

    #[test]
    fn scaling_report_shape_and_errors() {
        let e = FitnessModel::exponential(1.0).unwrap();
        let rep = e.check_scaling(&[0.0], &[10, 100, 1000]).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!(e.check_scaling(&[], &[10]).is_err());
        assert!(e.check_scaling(&[0.0], &[1]).is_err());
        assert!(e.check_scaling(&[-1.0], &[10]).is_err());
    }

    #[test]
    fn custom_without_quantile_cannot_sample() {
        let c = FitnessModel::custom(CustomFitness {
            name: "half-exp".into(),
            cdf: Arc::new(|x: f64| 1.0 - (-x).exp()),
            tail: Arc::new(|x: f64| (-x).exp()),
            quantile: None,
            intensity: Arc::new(|x: f64| x.exp()),
            scaling: Arc::new(|n: u64| (n as f64).ln()),
        });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(c.sample(&mut rng, 3), Err(RtgError::Unsupported(_))));
        assert!(c.tail_quantile(0.5).is_err());
    }

    #[test]
    fn exponential_sample_mean() {
        let e = FitnessModel::exponential(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let xs = e.sample(&mut rng, n).unwrap();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 4.0 / (n as f64).sqrt());
        assert!(xs.iter().all(|x| *x >= 0.0));
    }
}
