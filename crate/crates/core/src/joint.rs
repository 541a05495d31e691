//! Joint law of the degrees of `r` tagged nodes.
//!
//! For finite `n` the joint pgf of the degrees towards the `n − r` untagged
//! nodes is `E[F_r(θ; z; ξ_1..ξ_r)^{n−r}]`, where `F_r` has the closed form
//! implemented by [`f_r_factor`]. In the limit it becomes
//!
//! ```text
//! G_r(z) = E[exp(−Σ_t (1 − z_{α(t)}) (Π_{s>t} z_{α(s)}) λ(ξ_{r|t}))]
//! ```
//!
//! with `ξ_{r|1} ≤ … ≤ ξ_{r|r}` the sorted fitness values and `α` the
//! sorting permutation.
//!
//! # Cumulative Poisson representation
//!
//! Draw the fitness values, sort them, and let `N_1, …, N_r` be independent
//! Poisson counts with means `ΔΛ_u = λ(ξ_{r|u}) − λ(ξ_{r|u−1})`
//! (`λ(ξ_{r|0}) = 0`). Setting `D_{α(t)} = N_1 + … + N_t` reproduces `G_r`:
//! writing `P_u = Π_{t≥u} z_{α(t)}` (`P_{r+1} = 1`),
//!
//! ```text
//! E[Π_t z_{α(t)}^{D_{α(t)}} | ξ] = Π_u E[P_u^{N_u}] = exp(−Σ_u ΔΛ_u (1 − P_u))
//! ```
//!
//! and summing by parts, `Σ_u ΔΛ_u (1 − P_u) = Σ_t λ(ξ_{r|t}) (P_{t+1} − P_t)
//! = Σ_t λ(ξ_{r|t}) (1 − z_{α(t)}) P_{t+1}`, which is the exponent of `G_r`.
//! [`sample_joint_limit`] implements this construction; the test suites
//! check it against [`g_r_direct`] on a grid of `z`.
//!
//! All degrees equal `d` exactly when `N_1 = d` and `N_u = 0` for `u ≥ 2`,
//! so `m_r(d) = P(D_1 = … = D_r = d) = E[λ(min)^d/d! · e^{−λ(max)}]`, a
//! two-dimensional integral over the joint law of the sample minimum and
//! maximum.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;
use statrs::function::factorial::ln_factorial;

use crate::error::{Result, RtgError};
use crate::fitness::FitnessModel;
use crate::limits::{limit_nodal_pmf, poisson_pmf_ln};
use crate::quadrature::{integrate_triangle, DEFAULT_TOLERANCE};
use crate::rng::{chunked, domain, merge_all, Moments, Stream};
use crate::Estimate;

/// Truncation cap for the characteristic-function series.
pub const MAX_SERIES_ORDER: usize = 40;

/// Indices of `xs` in increasing order, ties broken by index.
pub fn ordering(xs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
    idx
}

/// `F_r = prefactor · (1 − lambda)`, kept apart so that `F_r^{n−r}` can be
/// formed without cancellation when `lambda` is of order `1/n`.
#[derive(Clone, Copy, Debug)]
struct FrParts {
    prefactor: f64,
    lambda: f64,
}

fn check_z(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(RtgError::invalid("need at least one pgf argument"));
    }
    if let Some(v) = z.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(RtgError::invalid(format!("pgf arguments must lie in [0,1], got {v}")));
    }
    Ok(())
}

fn f_r_parts(model: &FitnessModel, theta: f64, z: &[f64], x: &[f64]) -> Result<FrParts> {
    if z.len() != x.len() || z.is_empty() {
        return Err(RtgError::invalid(format!(
            "dimension mismatch: {} pgf arguments, {} fitness values",
            z.len(),
            x.len()
        )));
    }
    // Nodes above θ link to every other node.
    let mut prefactor = 1.0;
    let mut below: Vec<(f64, f64)> = Vec::with_capacity(x.len());
    for (&zs, &xs) in z.iter().zip(x) {
        if xs > theta {
            prefactor *= zs;
        } else {
            below.push((xs, zs));
        }
    }
    // Stable sort keeps the index tiebreak.
    below.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = below.len();
    // suffix[j] = Π_{s ≥ j} z_(s), suffix[m] = 1.
    let mut suffix = vec![1.0; m + 1];
    for j in (0..m).rev() {
        suffix[j] = suffix[j + 1] * below[j].1;
    }
    // Telescoping sum over the events {x_(t) + ξ ≤ θ < x_(t+1) + ξ}.
    let mut lambda = 0.0;
    let mut prev_tail = 0.0;
    for j in 0..m {
        let tail = model.tail(theta - below[j].0);
        lambda += (1.0 - suffix[j]) * (tail - prev_tail);
        prev_tail = tail;
    }
    Ok(FrParts { prefactor, lambda })
}

/// `F_r(θ; z; x) = E[Π_s (1 − (1 − z_s) 1{x_s + ξ > θ})]` in closed form.
pub fn f_r_factor(model: &FitnessModel, theta: f64, z: &[f64], x: &[f64]) -> Result<f64> {
    let p = f_r_parts(model, theta, z, x)?;
    Ok(p.prefactor * (1.0 - p.lambda))
}

/// Monte Carlo estimate of the joint pgf of the degrees of nodes `1..=r`
/// towards nodes `r+1..=n`, `E[F_r(θ; z; ξ)^{n−r}]`.
pub fn finite_n_joint_pgf(
    model: &FitnessModel,
    n: u64,
    theta: f64,
    z: &[f64],
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    check_z(z)?;
    let r = z.len();
    if r as u64 >= n {
        return Err(RtgError::invalid(format!("need r < n, got r={r}, n={n}")));
    }
    if samples == 0 {
        return Err(RtgError::invalid("Monte Carlo budget must be positive"));
    }
    model.require_quantile()?;
    let power = (n - r as u64) as f64;
    let m = chunked(
        seed,
        domain::FINITE_JOINT,
        samples,
        |rng, count| {
            let mut acc = Moments::default();
            for _ in 0..count {
                let x = model.sample(rng, r).expect("quantile checked");
                let p = f_r_parts(model, theta, z, &x).expect("dimensions checked");
                let v = if p.prefactor == 0.0 {
                    0.0
                } else {
                    (power * (p.prefactor.ln() + (-p.lambda).ln_1p())).exp()
                };
                acc.push(v);
            }
            acc
        },
        Moments::merge,
    )
    .expect("positive sample count");
    Ok(m.estimate())
}

/// The integrand of `G_r` at fitness values `x`.
pub fn g_r_integrand(model: &FitnessModel, z: &[f64], x: &[f64]) -> f64 {
    let order = ordering(x);
    let mut exponent = 0.0;
    let mut suffix = 1.0;
    for &i in order.iter().rev() {
        let coeff = (1.0 - z[i]) * suffix;
        if coeff != 0.0 {
            exponent += coeff * model.intensity(x[i]);
        }
        suffix *= z[i];
    }
    (-exponent).exp()
}

/// Monte Carlo estimate of `G_r(z)` straight from its defining expectation.
pub fn g_r_direct(model: &FitnessModel, z: &[f64], samples: u64, seed: u64) -> Result<Estimate> {
    Ok(g_r_direct_grid(model, &[z.to_vec()], samples, seed)?[0])
}

/// [`g_r_direct`] at several `z` (all of one length) from the same draws.
pub fn g_r_direct_grid(
    model: &FitnessModel,
    zs: &[Vec<f64>],
    samples: u64,
    seed: u64,
) -> Result<Vec<Estimate>> {
    let r = grid_dimension(zs)?;
    if samples == 0 {
        return Err(RtgError::invalid("Monte Carlo budget must be positive"));
    }
    model.require_quantile()?;
    let acc = chunked(
        seed,
        domain::G_DIRECT,
        samples,
        |rng, count| {
            let mut acc = vec![Moments::default(); zs.len()];
            for _ in 0..count {
                let x = model.sample(rng, r).expect("quantile checked");
                for (a, z) in acc.iter_mut().zip(zs) {
                    a.push(g_r_integrand(model, z, &x));
                }
            }
            acc
        },
        merge_all,
    )
    .expect("positive sample count");
    Ok(acc.iter().map(Moments::estimate).collect())
}

fn grid_dimension(zs: &[Vec<f64>]) -> Result<usize> {
    let first = zs.first().ok_or_else(|| RtgError::invalid("empty z grid"))?;
    for z in zs {
        check_z(z)?;
        if z.len() != first.len() {
            return Err(RtgError::invalid("all z vectors must have the same length"));
        }
    }
    Ok(first.len())
}

/// One draw of the limiting degrees of `r` tagged nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointLimitSample {
    pub fitness: Vec<f64>,
    /// `order[t]` is the node holding the `t`-th smallest fitness.
    pub order: Vec<usize>,
    pub sorted: Vec<f64>,
    /// `λ(ξ_{r|u}) − λ(ξ_{r|u−1})`.
    pub increments: Vec<f64>,
    pub degrees: Vec<u64>,
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean >= Poisson::<f64>::MAX_LAMBDA {
        return u64::MAX;
    }
    let draw: f64 = Poisson::new(mean).expect("finite positive mean").sample(rng);
    draw as u64
}

/// Draws `(D_1, …, D_r)` through the cumulative Poisson construction.
pub fn sample_joint_limit<R: Rng + ?Sized>(
    model: &FitnessModel,
    r: usize,
    rng: &mut R,
) -> Result<JointLimitSample> {
    if r == 0 {
        return Err(RtgError::invalid("r must be at least 1"));
    }
    let fitness = model.sample(rng, r)?;
    let order = ordering(&fitness);
    let sorted: Vec<f64> = order.iter().map(|&i| fitness[i]).collect();
    let mut increments = Vec::with_capacity(r);
    let mut prev = 0.0;
    for &x in &sorted {
        let lam = model.intensity(x);
        increments.push((lam - prev).max(0.0));
        prev = lam;
    }
    let mut degrees = vec![0u64; r];
    let mut cumulative = 0u64;
    for (t, &inc) in increments.iter().enumerate() {
        cumulative = cumulative.saturating_add(poisson_count(inc, rng));
        degrees[order[t]] = cumulative;
    }
    Ok(JointLimitSample { fitness, order, sorted, increments, degrees })
}

/// Averages of `stat` (writing `k` values per draw) over sampler draws.
pub fn sampler_statistics<F>(
    model: &FitnessModel,
    r: usize,
    k: usize,
    samples: u64,
    seed: u64,
    stat: F,
) -> Result<Vec<Estimate>>
where
    F: Fn(&JointLimitSample, &mut [f64]) + Sync,
{
    if r == 0 || samples == 0 {
        return Err(RtgError::invalid("need r >= 1 and a positive Monte Carlo budget"));
    }
    model.require_quantile()?;
    let acc = chunked(
        seed,
        domain::SAMPLER,
        samples,
        |rng, count| {
            let mut acc = vec![Moments::default(); k];
            let mut buf = vec![0.0; k];
            for _ in 0..count {
                let s = sample_joint_limit(model, r, rng).expect("quantile checked");
                stat(&s, &mut buf);
                for (a, &v) in acc.iter_mut().zip(&buf) {
                    a.push(v);
                }
            }
            acc
        },
        merge_all,
    )
    .expect("positive sample count");
    Ok(acc.iter().map(Moments::estimate).collect())
}

/// `Π_s z_s^{D_s}` with `0^0 = 1`.
pub fn pgf_term(z: &[f64], degrees: &[u64]) -> f64 {
    z.iter()
        .zip(degrees)
        .map(|(&zs, &d)| match d {
            0 => 1.0,
            _ if zs == 0.0 => 0.0,
            d if d <= i32::MAX as u64 => zs.powi(d as i32),
            d => zs.powf(d as f64),
        })
        .product()
}

/// Empirical joint pgf of sampler draws at every `z` in the grid.
pub fn sampler_pgf(
    model: &FitnessModel,
    zs: &[Vec<f64>],
    samples: u64,
    seed: u64,
) -> Result<Vec<Estimate>> {
    let r = grid_dimension(zs)?;
    sampler_statistics(model, r, zs.len(), samples, seed, |s, out| {
        for (o, z) in out.iter_mut().zip(zs) {
            *o = pgf_term(z, &s.degrees);
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    Quadrature,
    MonteCarlo,
}

impl MethodTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::Quadrature => "quadrature",
            MethodTag::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MomentMethod {
    Quadrature { tolerance: f64 },
    MonteCarlo { samples: u64, seed: u64 },
}

impl MomentMethod {
    pub fn quadrature() -> Self {
        MomentMethod::Quadrature { tolerance: DEFAULT_TOLERANCE }
    }

    pub fn tag(&self) -> MethodTag {
        match self {
            MomentMethod::Quadrature { .. } => MethodTag::Quadrature,
            MomentMethod::MonteCarlo { .. } => MethodTag::MonteCarlo,
        }
    }
}

/// `m_r(d) = P(D_1 = … = D_r = d)`.
pub fn joint_moment(model: &FitnessModel, r: usize, d: u64, method: MomentMethod) -> Result<Estimate> {
    if r == 0 {
        return Err(RtgError::invalid("r must be at least 1"));
    }
    match method {
        MomentMethod::Quadrature { tolerance } => {
            if let Some(c) = model.constant_intensity() {
                return Ok(Estimate::exact(poisson_pmf_ln(c.ln(), d)));
            }
            if r == 1 {
                return limit_nodal_pmf(model, d);
            }
            model.require_quantile()?;
            let rf = r as f64;
            let ln_dfact = ln_factorial(d);
            let df = d as f64;
            // u, v: tail coordinates of the minimum and maximum fitness.
            let g = |u: f64, v: f64| -> f64 {
                let (Ok(x_min), Ok(x_max)) = (model.tail_quantile(u), model.tail_quantile(v))
                else {
                    return f64::NAN;
                };
                let lam_max = model.intensity(x_max);
                if lam_max.is_infinite() {
                    return 0.0;
                }
                let ln_min_term = if d == 0 {
                    0.0
                } else {
                    df * model.ln_intensity(x_min) - ln_dfact
                };
                let density = rf * (rf - 1.0) * (u - v).powi(r as i32 - 2);
                density * (ln_min_term - lam_max).exp()
            };
            integrate_triangle(g, tolerance).map(|q| Estimate { value: q.value, error: q.error })
        }
        MomentMethod::MonteCarlo { samples, seed } => {
            let est = sampler_statistics(model, r, 1, samples, seed, |s, out| {
                out[0] = if s.degrees.iter().all(|&x| x == d) { 1.0 } else { 0.0 };
            })?;
            Ok(est[0])
        }
    }
}

/// `m_1(d), …, m_R(d)` with per-entry errors.
#[derive(Clone, Debug, Serialize)]
pub struct MomentSequence {
    pub d: u64,
    pub entries: Vec<Estimate>,
    pub method: MethodTag,
}

pub fn moment_sequence(
    model: &FitnessModel,
    d: u64,
    r_max: usize,
    method: MomentMethod,
) -> Result<MomentSequence> {
    let entries = (1..=r_max)
        .map(|r| joint_moment(model, r, d, method))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentSequence { d, entries, method: method.tag() })
}

/// Smallest `R ≤ MAX_SERIES_ORDER` with `Σ_{r>R} |t|^r/r! ≤ eps`, and that
/// tail sum.
pub fn truncation_order(t: f64, eps: f64) -> Result<(usize, f64)> {
    if !(eps > 0.0) {
        return Err(RtgError::invalid(format!("tolerance must be positive, got {eps}")));
    }
    let a = t.abs();
    if a == 0.0 {
        return Ok((0, 0.0));
    }
    // Terms are summed far past the cap so the tail is accurate.
    let horizon = MAX_SERIES_ORDER + 60 + (4.0 * a) as usize;
    let mut terms = Vec::with_capacity(horizon + 1);
    let mut term = 1.0;
    terms.push(term);
    for r in 1..=horizon {
        term *= a / r as f64;
        terms.push(term);
    }
    let mut tail = 0.0;
    let mut tails = vec![0.0; horizon + 1];
    for r in (0..horizon).rev() {
        tail += terms[r + 1];
        tails[r] = tail;
    }
    (0..=MAX_SERIES_ORDER)
        .find(|&r| tails[r] <= eps)
        .map(|r| (r, tails[r]))
        .ok_or_else(|| {
            RtgError::Numerical {
                message: format!(
                    "series for |t|={a} needs more than {MAX_SERIES_ORDER} terms to reach {eps:e}"
                ),
                estimate: f64::NAN,
                error: tails[MAX_SERIES_ORDER],
                evaluations: 0,
            }
        })
}

/// The truncated series `1 + Σ_{r≤R} (it)^r/r! · m_r(d)`.
#[derive(Clone, Debug, Serialize)]
pub struct CharFnEval {
    pub d: u64,
    pub t: f64,
    pub re: f64,
    pub im: f64,
    pub order: usize,
    /// Bound on the dropped terms.
    pub tail_bound: f64,
    /// Propagated error of the moments used.
    pub moment_error: f64,
}

impl CharFnEval {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

pub fn char_fn(model: &FitnessModel, d: u64, t: f64, eps: f64) -> Result<CharFnEval> {
    let (order, tail_bound) = truncation_order(t, eps)?;
    let seq = moment_sequence(model, d, order, MomentMethod::quadrature())?;
    Ok(char_fn_from_moments(&seq, t, order, tail_bound))
}

/// Evaluates the truncated series from precomputed moments.
pub fn char_fn_from_moments(seq: &MomentSequence, t: f64, order: usize, tail_bound: f64) -> CharFnEval {
    let it = Complex64::new(0.0, t);
    let mut value = Complex64::new(1.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    let mut moment_error = 0.0;
    let mut weight = 1.0;
    for (r, m) in seq.entries.iter().take(order).enumerate() {
        let k = (r + 1) as f64;
        power = power * it / k;
        weight *= t.abs() / k;
        value += power * m.value;
        moment_error += weight * m.error;
    }
    CharFnEval { d: seq.d, t, re: value.re, im: value.im, order, tail_bound, moment_error }
}

/// Mean and variance of the limit fraction `Π(d)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PiMoments {
    pub mean: Estimate,
    pub variance: Estimate,
}

pub fn pi_mean_var(model: &FitnessModel, d: u64) -> Result<PiMoments> {
    let m1 = joint_moment(model, 1, d, MomentMethod::quadrature())?;
    let m2 = joint_moment(model, 2, d, MomentMethod::quadrature())?;
    Ok(PiMoments {
        mean: m1,
        variance: Estimate {
            value: m2.value - m1.value * m1.value,
            error: m2.error + 2.0 * m1.value * m1.error,
        },
    })
}

/// Independent Monte Carlo of the defining expectation of `F_r`, for
/// checking the closed form.
pub fn f_r_monte_carlo(
    model: &FitnessModel,
    theta: f64,
    z: &[f64],
    x: &[f64],
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    if z.len() != x.len() {
        return Err(RtgError::invalid("dimension mismatch"));
    }
    model.require_quantile()?;
    let m = chunked(
        seed,
        domain::F_R_CHECK,
        samples,
        |rng: &mut Stream, count| {
            let mut acc = Moments::default();
            for _ in 0..count {
                let xi = model.quantile(rng.random()).expect("quantile checked");
                let v: f64 = z
                    .iter()
                    .zip(x)
                    .map(|(&zs, &xs)| if xs + xi > theta { zs } else { 1.0 })
                    .product();
                acc.push(v);
            }
            acc
        },
        Moments::merge,
    )
    .ok_or_else(|| RtgError::invalid("Monte Carlo budget must be positive"))?;
    Ok(m.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn expo() -> FitnessModel {
        FitnessModel::exponential(1.0).unwrap()
    }

    #[test]
    fn f1_matches_one_factor_expansion() {
        let m = expo();
        for &(theta, z, x) in &[(2.0, 0.3, 0.5), (1.0, 0.0, 0.9), (3.0, 0.7, 5.0), (0.5, 0.2, 0.0)] {
            let f = f_r_factor(&m, theta, &[z], &[x]).unwrap();
            let expected = 1.0 - (1.0 - z) * (1.0 - m.cdf(theta - x));
            assert!((f - expected).abs() < 1e-15, "θ={theta} z={z} x={x}");
        }
    }

    #[test]
    fn all_ones_and_dimension_errors() {
        let m = expo();
        assert_eq!(f_r_factor(&m, 2.0, &[1.0; 4], &[0.1, 3.0, 1.0, 2.5]).unwrap(), 1.0);
        assert!(f_r_factor(&m, 2.0, &[1.0; 2], &[0.1]).is_err());
    }

    #[test]
    fn f3_closed_form_matches_monte_carlo() {
        let m = expo();
        let cases: [(&[f64], &[f64]); 3] = [
            (&[0.2, 0.5, 0.9], &[0.3, 1.2, 2.0]),
            (&[0.0, 0.6, 0.4], &[2.6, 0.1, 1.9]),
            (&[0.7, 0.1, 0.3], &[0.0, 0.0, 0.8]),
        ];
        for (i, (z, x)) in cases.iter().enumerate() {
            let exact = f_r_factor(&m, 2.5, z, x).unwrap();
            let mc = f_r_monte_carlo(&m, 2.5, z, x, 1_000_000, 40 + i as u64).unwrap();
            assert!((exact - mc.value).abs() <= 3.0 * mc.error, "{exact} vs {mc:?}");
        }
    }

    #[test]
    fn joint_pgf_all_ones_is_one() {
        let m = expo();
        let e = finite_n_joint_pgf(&m, 100, m.scaling_threshold(100), &[1.0, 1.0], 1000, 1).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.error, 0.0);
        assert!(finite_n_joint_pgf(&m, 2, 1.0, &[0.5, 0.5], 10, 1).is_err());
    }

    #[test]
    fn sampler_increments_and_order() {
        let m = expo();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let s = sample_joint_limit(&m, 4, &mut rng).unwrap();
            assert!(s.increments.iter().all(|&v| v >= 0.0));
            for w in s.order.windows(2) {
                assert!(s.degrees[w[0]] <= s.degrees[w[1]]);
            }
            for w in s.sorted.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn constant_intensity_sampler_degenerates() {
        let m = FitnessModel::pareto(1.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let s = sample_joint_limit(&m, 3, &mut rng).unwrap();
            assert!(s.degrees.iter().all(|&d| d == s.degrees[0]));
        }
    }

    #[test]
    fn g1_at_zero_matches_limit_pmf() {
        let m = expo();
        let g = g_r_direct(&m, &[0.0], 400_000, 9).unwrap();
        let p = limit_nodal_pmf(&m, 0).unwrap();
        assert!((g.value - p.value).abs() <= 3.0 * g.error);
    }

    #[test]
    fn g2_at_origin_matches_max_quadrature() {
        // Only the maximum survives: E[exp(−λ(max))] with density 2F f.
        let m = expo();
        let oracle = crate::quadrature::integrate(
            |w: f64| 2.0 * (1.0 - w) * (-1.0 / w).exp(),
            0.0,
            1.0,
            1e-12,
        )
        .unwrap()
        .value;
        let g = g_r_direct(&m, &[0.0, 0.0], 400_000, 10).unwrap();
        assert!((g.value - oracle).abs() <= 3.0 * g.error, "{g:?} vs {oracle}");
        let m2 = joint_moment(&m, 2, 0, MomentMethod::quadrature()).unwrap();
        assert!((m2.value - oracle).abs() < 1e-8);
    }

    #[test]
    fn constant_intensity_g2_closed_form() {
        let m = FitnessModel::pareto(1.0, 3.0).unwrap();
        for &(z1, z2) in &[(0.0, 0.0), (0.3, 0.8), (1.0, 0.5)] {
            let g = g_r_direct(&m, &[z1, z2], 1000, 4).unwrap();
            let exact = (z1 * z2 - 1.0).exp();
            assert!((g.value - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn moments_for_constant_intensity() {
        let m = FitnessModel::pareto(1.0, 2.0).unwrap();
        for r in 1..5 {
            let v = joint_moment(&m, r, 2, MomentMethod::quadrature()).unwrap().value;
            assert!((v - 0.5 * (-1f64).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn exponential_moment_ordering() {
        let m = expo();
        let m1 = joint_moment(&m, 1, 0, MomentMethod::quadrature()).unwrap();
        let m2 = joint_moment(&m, 2, 0, MomentMethod::quadrature()).unwrap();
        assert!((m1.value - 0.1485).abs() < 5e-4);
        assert!(m1.value * m1.value < m2.value && m2.value < m1.value);
        let seq = moment_sequence(&m, 0, 6, MomentMethod::quadrature()).unwrap();
        for w in seq.entries.windows(2) {
            assert!(w[1].value <= w[0].value + w[0].error + w[1].error);
        }
    }

    #[test]
    fn pi_moments() {
        let m = expo();
        let pm = pi_mean_var(&m, 0).unwrap();
        assert!((pm.mean.value - 0.1485).abs() < 5e-4);
        assert!(pm.variance.value > 10.0 * pm.variance.error);
        let c = FitnessModel::pareto(1.0, 2.0).unwrap();
        let p = (-1f64).exp();
        let pc = pi_mean_var(&c, 0).unwrap();
        assert!((pc.variance.value - p * (1.0 - p)).abs() < 1e-15);
    }

    #[test]
    fn truncation_orders() {
        assert_eq!(truncation_order(0.0, 1e-8).unwrap(), (0, 0.0));
        let (r, tail) = truncation_order(1.0, 1e-8).unwrap();
        assert!(tail <= 1e-8);
        // e − Σ_{k≤r} 1/k!
        let partial: f64 = (0..=r).map(|k| 1.0 / (1..=k).map(|j| j as f64).product::<f64>()).sum();
        assert!((tail - (1f64.exp() - partial)).abs() < 1e-15);
        let (r10, _) = truncation_order(10.0, 1e-8).unwrap();
        assert!(r10 <= MAX_SERIES_ORDER);
        assert!(truncation_order(30.0, 1e-8).is_err());
        assert!(truncation_order(1.0, 0.0).is_err());
    }

    #[test]
    fn charfn_at_zero_and_modulus() {
        let m = expo();
        let c0 = char_fn(&m, 0, 0.0, 1e-8).unwrap();
        assert_eq!((c0.re, c0.im), (1.0, 0.0));
        let c1 = char_fn(&m, 0, 1.0, 1e-8).unwrap();
        assert!(c1.value().norm() <= 1.0 + 1e-8);
    }

    #[test]
    fn pgf_term_zero_conventions() {
        assert_eq!(pgf_term(&[0.0, 0.5], &[0, 2]), 0.25);
        assert_eq!(pgf_term(&[0.0], &[3]), 0.0);
        assert_eq!(pgf_term(&[1.0], &[u64::MAX]), 1.0);
    }
}
