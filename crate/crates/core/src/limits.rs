//! Nodal degree laws.
//!
//! Given its own fitness `x`, a node of `T(n; θ)` has a
//! `Bin(n − 1, 1 − F(θ − x))` degree; mixing over `x` gives the finite-`n`
//! law. Under the threshold scaling the degree converges to a Poisson
//! variable mixed over `λ(ξ)`. For exponential fitness the limit is the
//! distribution `p_Fuj` with its `1/(d(d−1))` approximation.
//!
//! All integrals are over the tail coordinate `w = P(ξ > x)` on `(0, 1]`.

use statrs::function::factorial::ln_factorial;

use crate::error::{Result, RtgError};
use crate::fitness::FitnessModel;
use crate::quadrature::{
    geometric_breaks, integrate, integrate_with_breaks, DEFAULT_TOLERANCE, MAX_EVALUATIONS,
};
use crate::Estimate;

/// Breakpoints on `[lo, 1]` for an integrand in the tail coordinate whose
/// mass may sit just above `lo` (finite `n`, where `lo = P(ξ > θ)`) or
/// near zero (limit laws). Offsets from `lo` are geometric.
fn tail_breaks(lo: f64) -> Vec<f64> {
    let span = 1.0 - lo;
    let first = if lo > 0.0 { (lo * 1e-10).min(span * 1e-3) } else { 1e-300 };
    let mut pts = vec![lo];
    pts.extend(geometric_breaks(first, span, 3).into_iter().map(|o| lo + o));
    pts.pop();
    pts.push(1.0);
    pts.dedup();
    pts
}

fn check_n(n: u64) -> Result<()> {
    if n < 2 {
        return Err(RtgError::invalid(format!("graph size must be >= 2, got {n}")));
    }
    Ok(())
}

fn numerical(message: &str, err: RtgError) -> RtgError {
    match err {
        RtgError::Numerical { message: inner, estimate, error, evaluations } => {
            RtgError::Numerical {
                message: format!("{message}: {inner}"),
                estimate,
                error,
                evaluations,
            }
        }
        other => other,
    }
}

/// `ln C(m, d)` through log-factorials.
pub fn ln_binomial(m: u64, d: u64) -> f64 {
    ln_factorial(m) - ln_factorial(d) - ln_factorial(m - d)
}

/// `P(D_n(θ) = d)` by quadrature of the Binomial mixture.
pub fn finite_n_nodal_pmf(model: &FitnessModel, n: u64, theta: f64, d: u64) -> Result<Estimate> {
    check_n(n)?;
    if d > n - 1 {
        return Err(RtgError::invalid(format!("degree {d} outside 0..={}", n - 1)));
    }
    let m = n - 1;
    // Nodes with fitness above θ link to everyone.
    let w_theta = model.tail(theta);
    let atom = if d == m { w_theta } else { 0.0 };
    if w_theta >= 1.0 {
        return Ok(Estimate::exact(atom));
    }
    let ln_c = ln_binomial(m, d);
    let (df, mf) = (d as f64, (m - d) as f64);
    model.require_quantile()?;
    let integrand = |w: f64| -> f64 {
        let x = match model.tail_quantile(w) {
            Ok(x) => x,
            Err(_) => return f64::NAN,
        };
        let p = model.tail(theta - x);
        if p <= 0.0 {
            return if d == 0 { 1.0 } else { 0.0 };
        }
        if p >= 1.0 {
            return if d == m { 1.0 } else { 0.0 };
        }
        (ln_c + df * p.ln() + mf * (-p).ln_1p()).exp()
    };
    let r = integrate_with_breaks(integrand, &tail_breaks(w_theta), DEFAULT_TOLERANCE, MAX_EVALUATIONS)
        .map_err(|e| numerical("finite-n nodal pmf", e))?;
    Ok(Estimate { value: r.value + atom, error: r.error })
}

/// `E[z^{D_n(θ)}]`, including the `z^{n−1}·P(ξ > θ)` term from nodes above
/// the threshold.
pub fn finite_n_nodal_pgf(model: &FitnessModel, n: u64, theta: f64, z: f64) -> Result<Estimate> {
    check_n(n)?;
    if !(0.0..=1.0).contains(&z) {
        return Err(RtgError::invalid(format!("pgf argument must lie in [0,1], got {z}")));
    }
    let m = (n - 1) as f64;
    let w_theta = model.tail(theta);
    let atom = z.powf(m) * w_theta;
    if w_theta >= 1.0 {
        return Ok(Estimate::exact(atom));
    }
    model.require_quantile()?;
    let integrand = |w: f64| -> f64 {
        let x = match model.tail_quantile(w) {
            Ok(x) => x,
            Err(_) => return f64::NAN,
        };
        let p = model.tail(theta - x);
        let q = (1.0 - z) * p;
        if q >= 1.0 {
            return if m == 0.0 { 1.0 } else { 0.0 };
        }
        (m * (-q).ln_1p()).exp()
    };
    let r = integrate_with_breaks(integrand, &tail_breaks(w_theta), DEFAULT_TOLERANCE, MAX_EVALUATIONS)
        .map_err(|e| numerical("finite-n nodal pgf", e))?;
    Ok(Estimate { value: r.value + atom, error: r.error })
}

/// Poisson pmf `e^{−μ} μ^d / d!` from `ln μ`, stable for large `μ` and `d`.
pub fn poisson_pmf_ln(ln_mu: f64, d: u64) -> f64 {
    let mu = ln_mu.exp();
    if mu.is_infinite() {
        return 0.0;
    }
    if d == 0 {
        return (-mu).exp();
    }
    (d as f64 * ln_mu - ln_factorial(d) - mu).exp()
}

/// `P(D = d) = E[λ(ξ)^d e^{−λ(ξ)} / d!]`.
pub fn limit_nodal_pmf(model: &FitnessModel, d: u64) -> Result<Estimate> {
    if let Some(c) = model.constant_intensity() {
        return Ok(Estimate::exact(poisson_pmf_ln(c.ln(), d)));
    }
    model.require_quantile()?;
    let integrand = |w: f64| -> f64 {
        match model.tail_quantile(w) {
            Ok(x) => poisson_pmf_ln(model.ln_intensity(x), d),
            Err(_) => f64::NAN,
        }
    };
    let mut pts = vec![0.0];
    pts.extend(geometric_breaks(1e-12, 1.0, 2));
    let r = integrate_with_breaks(integrand, &pts, DEFAULT_TOLERANCE * 0.1, MAX_EVALUATIONS)
        .map_err(|e| numerical("limit nodal pmf", e))?;
    Ok(Estimate { value: r.value, error: r.error })
}

/// The exponential-fitness limit `p_Fuj(d)`, evaluated from its own
/// one-dimensional representation:
///
/// * `d = 0`: `∫₀¹ e^{−1/t} dt`;
/// * `d = 1`: `∫₁^∞ e^{−t}/t dt`, as `∫₀¹ e^{−1/u}/u du`;
/// * `d ≥ 2`: `1/(d(d−1)) − (1/d!) ∫₀¹ t^{d−2} e^{−t} dt`.
pub fn fujihara_pmf(d: u64) -> Result<Estimate> {
    let tol = DEFAULT_TOLERANCE * 0.01;
    let r = match d {
        0 => integrate(|t: f64| (-1.0 / t).exp(), 0.0, 1.0, tol),
        1 => integrate(|u: f64| (-1.0 / u).exp() / u, 0.0, 1.0, tol),
        _ => {
            let k = (d - 2) as i32;
            let ln_df = ln_factorial(d);
            let inner = integrate(|t: f64| t.powi(k) * (-t).exp(), 0.0, 1.0, tol)
                .map_err(|e| numerical("p_Fuj", e))?;
            let scale = (-ln_df).exp();
            let df = d as f64;
            return Ok(Estimate {
                value: 1.0 / (df * (df - 1.0)) - inner.value * scale,
                error: inner.error * scale,
            });
        }
    }
    .map_err(|e| numerical("p_Fuj", e))?;
    Ok(Estimate { value: r.value, error: r.error })
}

/// `(1/(d(d−1)), 1/d!)`: the power-law approximation of `p_Fuj(d)` and the
/// bound on its error. Defined for `d ≥ 2` only.
pub fn fujihara_approx(d: u64) -> Result<(f64, f64)> {
    if d < 2 {
        return Err(RtgError::invalid(format!("approximation needs d >= 2, got {d}")));
    }
    let df = d as f64;
    Ok((1.0 / (df * (df - 1.0)), (-ln_factorial(d)).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expo() -> FitnessModel {
        FitnessModel::exponential(1.0).unwrap()
    }

    #[test]
    fn two_nodes_match_erlang_tail() {
        let m = expo();
        for &t in &[0.3f64, 1.0, 2.5, 6.0] {
            let link = (1.0 + t) * (-t).exp();
            let p1 = finite_n_nodal_pmf(&m, 2, t, 1).unwrap();
            let p0 = finite_n_nodal_pmf(&m, 2, t, 0).unwrap();
            assert!((p1.value - link).abs() < 1e-8, "t={t}: {} vs {link}", p1.value);
            assert!((p0.value - (1.0 - link)).abs() < 1e-8);
            for &z in &[0.0, 0.3, 0.8, 1.0] {
                let g = finite_n_nodal_pgf(&m, 2, t, z).unwrap();
                assert!((g.value - (1.0 - link + z * link)).abs() < 1e-8);
            }
        }
        assert!((finite_n_nodal_pmf(&m, 2, 1.0, 1).unwrap().value - 2.0 / 1f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn pmf_sums_to_one() {
        for m in [expo(), FitnessModel::pareto(1.0, 2.0).unwrap()] {
            for &n in &[5u64, 40, 200] {
                let theta = m.scaling_threshold(n);
                let total: f64 =
                    (0..n).map(|d| finite_n_nodal_pmf(&m, n, theta, d).unwrap().value).sum();
                assert!((total - 1.0).abs() < 1e-6, "{} n={n}: {total}", m.name());
            }
        }
    }

    #[test]
    fn pgf_endpoints() {
        let m = expo();
        let n = 1000;
        let theta = m.scaling_threshold(n);
        assert!((finite_n_nodal_pgf(&m, n, theta, 1.0).unwrap().value - 1.0).abs() < 1e-8);
        let g0 = finite_n_nodal_pgf(&m, n, theta, 0.0).unwrap().value;
        let p0 = finite_n_nodal_pmf(&m, n, theta, 0).unwrap().value;
        assert!((g0 - p0).abs() < 1e-8);
    }

    #[test]
    fn nonpositive_threshold_gives_complete_graph() {
        let m = expo();
        assert_eq!(finite_n_nodal_pmf(&m, 10, -1.0, 9).unwrap().value, 1.0);
        assert_eq!(finite_n_nodal_pmf(&m, 10, 0.0, 3).unwrap().value, 0.0);
    }

    #[test]
    fn range_errors() {
        let m = expo();
        assert!(finite_n_nodal_pmf(&m, 10, 1.0, 10).is_err());
        assert!(finite_n_nodal_pmf(&m, 1, 1.0, 0).is_err());
        assert!(finite_n_nodal_pgf(&m, 10, 1.0, 1.5).is_err());
        assert!(fujihara_approx(1).is_err());
        assert!(fujihara_approx(0).is_err());
    }

    #[test]
    fn large_n_is_near_the_limit() {
        let m = expo();
        let n = 100_000;
        let p = finite_n_nodal_pmf(&m, n, m.scaling_threshold(n), 0).unwrap();
        assert!((p.value - 0.1485).abs() < 0.01);
    }

    #[test]
    fn unit_poisson_for_pareto() {
        let m = FitnessModel::pareto(2.0, 3.0).unwrap();
        let mut fact = 1.0;
        for d in 0..=10u64 {
            if d > 0 {
                fact *= d as f64;
            }
            let p = limit_nodal_pmf(&m, d).unwrap().value;
            assert!((p - (-1f64).exp() / fact).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_limit_is_rate_free() {
        for d in [0u64, 1, 4, 9] {
            let a = limit_nodal_pmf(&FitnessModel::exponential(1.0).unwrap(), d).unwrap();
            let b = limit_nodal_pmf(&FitnessModel::exponential(3.7).unwrap(), d).unwrap();
            assert!((a.value - b.value).abs() < 1e-10);
        }
    }

    #[test]
    fn fujihara_values() {
        // e^{-1} − E₁(1) and E₁(1)
        let e1 = 0.219_383_934_395_520_3;
        assert!((fujihara_pmf(0).unwrap().value - ((-1f64).exp() - e1)).abs() < 1e-10);
        assert!((fujihara_pmf(1).unwrap().value - e1).abs() < 1e-10);
        assert!((fujihara_pmf(0).unwrap().value - 0.1485).abs() < 5e-4);
        assert_eq!(fujihara_approx(2).unwrap(), (0.5, 0.5));
        let (a5, b5) = fujihara_approx(5).unwrap();
        assert!((a5 - 0.05).abs() < 1e-15 && (b5 - 1.0 / 120.0).abs() < 1e-15);
        assert!((fujihara_pmf(5).unwrap().value - 0.05).abs() <= 1.0 / 120.0);
        assert!((fujihara_pmf(10).unwrap().value - 1.0 / 90.0).abs() <= 1.0 / 3_628_800.0);
    }

    #[test]
    fn fujihara_agrees_with_generic_limit() {
        let m = expo();
        for d in 0..=20u64 {
            let a = fujihara_pmf(d).unwrap().value;
            let b = limit_nodal_pmf(&m, d).unwrap().value;
            assert!((a - b).abs() < 1e-8, "d={d}: {a} vs {b}");
        }
    }

    #[test]
    fn fujihara_power_tail() {
        let mut prev = f64::INFINITY;
        for d in [2u64, 4, 8, 16] {
            let df = d as f64;
            let ratio = fujihara_pmf(d).unwrap().value * df * (df - 1.0);
            let gap = (1.0 - ratio).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-12);
        let d = 60.0;
        assert!((fujihara_pmf(60).unwrap().value * d * (d - 1.0) - 1.0).abs() < 1e-9);
    }
}
