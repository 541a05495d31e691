//! Replication experiments: many independent graphs at one size, the
//! per-run degree fractions, their histograms and summary statistics.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, RtgError};
use crate::fitness::FitnessModel;
use crate::graph::{degree_sequence_fast, DegreeCensus};
use crate::rng::{chunked, domain, stream, Moments};
use crate::Estimate;

/// Histograms at consecutive sizes may differ by at most this KS distance.
pub const KS_STABILITY_GATE: f64 = 0.25;
/// Non-degenerate spread: interquartile range over binomial sampling width.
pub const IQR_WIDTH_FACTOR: f64 = 5.0;
/// Per-run deviations are compared to this multiple of the run average's SE.
pub const RUN_SPREAD_SE_FACTOR: f64 = 10.0;
/// Std at the largest size must keep at least this share of the std at the
/// smallest size.
pub const STD_RETENTION: f64 = 0.5;
/// Artifact-level gates for the qualitative stability claims.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Gates {
    pub ks: f64,
    pub iqr_width_factor: f64,
    pub run_spread_se_factor: f64,
    pub std_retention: f64,
}

impl Default for Gates {
    fn default() -> Self {
        Gates {
            ks: KS_STABILITY_GATE,
            iqr_width_factor: IQR_WIDTH_FACTOR,
            run_spread_se_factor: RUN_SPREAD_SE_FACTOR,
            std_retention: STD_RETENTION,
        }
    }
}

/// Default refusal threshold for `n·R` (total nodes simulated).
pub const DEFAULT_MAX_TOTAL_NODES: u64 = 2_000_000_000;
/// Default bin count for histogram export.
pub const DEFAULT_BINS: usize = 50;

/// `values[run][j]` is the fraction of nodes with degree `d_set[j]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationMatrix {
    pub model: serde_json::Value,
    pub n: u64,
    pub runs: usize,
    pub theta: f64,
    pub d_set: Vec<u64>,
    pub seed: u64,
    pub values: Vec<Vec<f64>>,
    /// Largest `|Σ_d P_n(d) − 1|` seen over all runs.
    pub census_deviation: f64,
}

impl ReplicationMatrix {
    pub fn column(&self, d: u64) -> Result<Vec<f64>> {
        let j = self
            .d_set
            .iter()
            .position(|&x| x == d)
            .ok_or_else(|| RtgError::invalid(format!("degree {d} was not recorded")))?;
        Ok(self.values.iter().map(|row| row[j]).collect())
    }

    /// Sample mean of `P_n(d)` and of `P_n(d)²`, with standard errors.
    pub fn column_moments(&self, d: u64) -> Result<(Estimate, Estimate)> {
        let col = self.column(d)?;
        let mut m1 = Moments::default();
        let mut m2 = Moments::default();
        for v in col {
            m1.push(v);
            m2.push(v * v);
        }
        Ok((m1.estimate(), m2.estimate()))
    }
}

/// Simulates `runs` independent graphs `T(n; θ*_n)`.
///
/// Run `k` draws from its own stream of `seed`, so the matrix does not
/// depend on the number of worker threads.
pub fn run_replications(
    model: &FitnessModel,
    n: u64,
    runs: usize,
    d_set: &[u64],
    seed: u64,
    max_total_nodes: u64,
) -> Result<ReplicationMatrix> {
    if n < 2 {
        return Err(RtgError::invalid(format!("graph size must be >= 2, got {n}")));
    }
    if runs == 0 {
        return Err(RtgError::invalid("need at least one run"));
    }
    if d_set.is_empty() {
        return Err(RtgError::invalid("need at least one degree of interest"));
    }
    let total = n.saturating_mul(runs as u64);
    if total > max_total_nodes {
        return Err(RtgError::Resource(format!(
            "n·R = {total} exceeds the limit of {max_total_nodes} simulated nodes; \
             lower run.n or run.replications, or raise limits.max_total_nodes"
        )));
    }
    model.require_quantile()?;
    let theta = model.scaling_threshold(n);
    let per_run: Vec<(Vec<f64>, f64)> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, domain::REPLICATION, k as u64);
            let fitness = model.sample(&mut rng, n as usize)?;
            let degrees = degree_sequence_fast(&fitness, theta)?;
            drop(fitness);
            let census = DegreeCensus::from_degrees(&degrees, theta);
            let dev = (census.fractions().iter().sum::<f64>() - 1.0).abs();
            Ok((d_set.iter().map(|&d| census.fraction(d as usize)).collect(), dev))
        })
        .collect::<Result<_>>()?;
    let census_deviation = per_run.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    Ok(ReplicationMatrix {
        model: model.describe(),
        n,
        runs,
        theta,
        d_set: d_set.to_vec(),
        seed,
        values: per_run.into_iter().map(|(v, _)| v).collect(),
        census_deviation,
    })
}

/// Run-averaged empirical pmf: column means with standard errors.
pub fn run_averaged_pmf(matrix: &ReplicationMatrix) -> Vec<(u64, Estimate)> {
    matrix
        .d_set
        .iter()
        .map(|&d| (d, matrix.column_moments(d).expect("recorded degree").0))
        .collect()
}

/// Step cdf `H(x) = (1/R) #{runs with value ≤ x}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub d: u64,
    pub n: u64,
    pub runs: usize,
    pub sorted: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

impl Histogram {
    pub fn from_values(d: u64, n: u64, mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Histogram { d, n, runs: values.len(), sorted: values }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v <= x);
        below as f64 / self.sorted.len() as f64
    }

    /// Type-7 sample quantile.
    pub fn quantile(&self, p: f64) -> f64 {
        let m = self.sorted.len();
        if m == 1 {
            return self.sorted[0];
        }
        let h = (m - 1) as f64 * p.clamp(0.0, 1.0);
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(m - 1);
        self.sorted[lo] + (h - lo as f64) * (self.sorted[hi] - self.sorted[lo])
    }

    pub fn iqr(&self) -> f64 {
        self.quantile(0.75) - self.quantile(0.25)
    }

    /// Equal-width bins on `[0, 1.1·max]` (upper edge inclusive on the last
    /// bin).
    pub fn binned(&self, bins: usize) -> Vec<Bin> {
        let bins = bins.max(1);
        let max = self.sorted.last().copied().unwrap_or(0.0);
        let upper = if max > 0.0 { 1.1 * max } else { 1.0 };
        let width = upper / bins as f64;
        let mut counts = vec![0usize; bins];
        for &v in &self.sorted {
            let k = ((v / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let total = self.sorted.len() as f64;
        counts
            .iter()
            .enumerate()
            .map(|(k, &c)| Bin {
                lo: k as f64 * width,
                hi: if k + 1 == bins { upper } else { (k + 1) as f64 * width },
                mass: c as f64 / total,
            })
            .collect()
    }
}

pub fn empirical_histogram(matrix: &ReplicationMatrix, d: u64) -> Result<Histogram> {
    Ok(Histogram::from_values(d, matrix.n, matrix.column(d)?))
}

/// `sup_x |H₁(x) − H₂(x)|`, attained at one of the jump points.
pub fn ks_distance(h1: &Histogram, h2: &Histogram) -> Result<f64> {
    if h1.d != h2.d {
        return Err(RtgError::invalid(format!(
            "histograms are for different degrees ({} vs {})",
            h1.d, h2.d
        )));
    }
    let (a, b) = (&h1.sorted, &h2.sorted);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0.0f64;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(best)
}

/// Both sides of the falling-factorial moment identity
/// `E[Π_{s<r} (P_n(d) − s/n)] = (n)_r/n^r · P(D_{n,1} = … = D_{n,r} = d)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FactorialCheck {
    pub n: u64,
    pub r: usize,
    pub d: u64,
    pub theta: f64,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub combined_se: f64,
}

impl FactorialCheck {
    pub fn within(&self, k: f64) -> bool {
        (self.lhs.value - self.rhs.value).abs() <= k * self.combined_se
    }
}

/// Simulates the two sides on independent graph streams. The right side
/// records only the degrees of nodes `0..r`, each computed directly.
pub fn factorial_moment_check(
    model: &FitnessModel,
    n: u64,
    r: usize,
    d: u64,
    graphs: u64,
    seed: u64,
) -> Result<FactorialCheck> {
    if !(1..=5).contains(&r) {
        return Err(RtgError::invalid(format!("r must be in 1..=5, got {r}")));
    }
    if n < 2 || (r as u64) > n {
        return Err(RtgError::invalid(format!("need 2 <= n and r <= n, got n={n}, r={r}")));
    }
    if graphs == 0 {
        return Err(RtgError::invalid("need a positive number of graphs"));
    }
    if n.saturating_mul(graphs) > DEFAULT_MAX_TOTAL_NODES {
        return Err(RtgError::Resource(format!(
            "n·graphs = {} exceeds {DEFAULT_MAX_TOTAL_NODES}",
            n.saturating_mul(graphs)
        )));
    }
    model.require_quantile()?;
    let theta = model.scaling_threshold(n);
    let nu = n as usize;
    let nf = n as f64;

    let lhs = chunked(
        seed,
        domain::FACTORIAL_LHS,
        graphs,
        |rng, count| {
            let mut acc = Moments::default();
            for _ in 0..count {
                let fitness = model.sample(rng, nu).expect("quantile checked");
                let degrees = degree_sequence_fast(&fitness, theta).expect("valid fitness");
                let count_d = degrees.iter().filter(|&&k| k as u64 == d).count() as f64;
                let p = count_d / nf;
                acc.push((0..r).map(|s| p - s as f64 / nf).product());
            }
            acc
        },
        Moments::merge,
    )
    .expect("positive graph count")
    .estimate();

    let joint = chunked(
        seed,
        domain::FACTORIAL_RHS,
        graphs,
        |rng, count| {
            let mut acc = Moments::default();
            for _ in 0..count {
                let fitness = model.sample(rng, nu).expect("quantile checked");
                let hit = (0..r).all(|k| tagged_degree(&fitness, k, theta) == d);
                acc.push(if hit { 1.0 } else { 0.0 });
            }
            acc
        },
        Moments::merge,
    )
    .expect("positive graph count")
    .estimate();

    let falling: f64 = (0..r).map(|s| (nf - s as f64) / nf).product();
    let rhs = Estimate { value: falling * joint.value, error: falling * joint.error };
    Ok(FactorialCheck { n, r, d, theta, lhs, rhs, combined_se: lhs.error.hypot(rhs.error) })
}

fn tagged_degree(fitness: &[f64], k: usize, theta: f64) -> u64 {
    let x = fitness[k];
    fitness
        .iter()
        .enumerate()
        .filter(|&(l, &y)| l != k && x + y > theta)
        .count() as u64
}

#[derive(Clone, Debug, Serialize)]
pub struct SpreadRow {
    pub n: u64,
    pub d: u64,
    pub mean: f64,
    /// `None` when fewer than two runs make the std undefined.
    pub std: Option<f64>,
    pub iqr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KsRow {
    pub d: u64,
    pub n_from: u64,
    pub n_to: u64,
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub d: u64,
    pub std_smallest_n: Option<f64>,
    pub std_largest_n: Option<f64>,
    pub max_consecutive_ks: f64,
    /// `Some(true)` when the spread does not vanish as `n` grows; `None` if
    /// undefined (single run).
    pub nondegenerate: Option<bool>,
    pub histograms_stable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NondegeneracyReport {
    pub n_grid: Vec<u64>,
    pub runs: usize,
    pub seed: u64,
    pub spreads: Vec<SpreadRow>,
    pub ks: Vec<KsRow>,
    pub verdicts: Vec<Verdict>,
}

/// Master seed used for size `n` inside multi-size studies.
pub fn seed_for_size(seed: u64, n: u64) -> u64 {
    seed.wrapping_add(n.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn nondegeneracy_report(
    model: &FitnessModel,
    n_grid: &[u64],
    runs: usize,
    d_set: &[u64],
    seed: u64,
) -> Result<NondegeneracyReport> {
    if n_grid.is_empty() || d_set.is_empty() {
        return Err(RtgError::invalid("need non-empty n and d grids"));
    }
    let matrices = n_grid
        .iter()
        .map(|&n| run_replications(model, n, runs, d_set, seed_for_size(seed, n), DEFAULT_MAX_TOTAL_NODES))
        .collect::<Result<Vec<_>>>()?;
    nondegeneracy_from(&matrices, seed, &Gates::default())
}

/// Builds the report from matrices already simulated, one per size in
/// increasing order of `n`.
pub fn nondegeneracy_from(
    matrices: &[ReplicationMatrix],
    seed: u64,
    gates: &Gates,
) -> Result<NondegeneracyReport> {
    let first = matrices.first().ok_or_else(|| RtgError::invalid("no matrices"))?;
    let d_set = first.d_set.clone();
    let mut spreads = Vec::new();
    let mut ks = Vec::new();
    let mut verdicts = Vec::new();
    for &d in &d_set {
        let hists = matrices
            .iter()
            .map(|m| empirical_histogram(m, d))
            .collect::<Result<Vec<_>>>()?;
        let mut stds = Vec::new();
        for (m, h) in matrices.iter().zip(&hists) {
            let (mean, _) = m.column_moments(d)?;
            let std = if m.runs >= 2 { Some(sample_std(&h.sorted)) } else { None };
            stds.push(std);
            spreads.push(SpreadRow { n: m.n, d, mean: mean.value, std, iqr: h.iqr() });
        }
        let mut max_ks = 0.0f64;
        for (w, m) in hists.windows(2).zip(matrices.windows(2)) {
            let dist = ks_distance(&w[0], &w[1])?;
            max_ks = max_ks.max(dist);
            ks.push(KsRow { d, n_from: m[0].n, n_to: m[1].n, distance: dist });
        }
        let (lo, hi) = (stds[0], *stds.last().expect("non-empty"));
        let nondegenerate = match (lo, hi) {
            (Some(a), Some(b)) => Some(b > gates.std_retention * a),
            _ => None,
        };
        verdicts.push(Verdict {
            d,
            std_smallest_n: lo,
            std_largest_n: hi,
            max_consecutive_ks: max_ks,
            nondegenerate,
            histograms_stable: max_ks <= gates.ks,
        });
    }
    Ok(NondegeneracyReport {
        n_grid: matrices.iter().map(|m| m.n).collect(),
        runs: first.runs,
        seed,
        spreads,
        ks,
        verdicts,
    })
}

/// Binomial sampling width `sqrt(p(1−p)/n)` of one empirical fraction.
pub fn binomial_width(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Share of runs whose `P_n(d)` lies farther than `factor` standard errors
/// of the run average from `reference`.
pub fn spread_share(matrix: &ReplicationMatrix, d: u64, reference: f64, factor: f64) -> Result<f64> {
    let (mean, _) = matrix.column_moments(d)?;
    let col = matrix.column(d)?;
    let far = col.iter().filter(|&&v| (v - reference).abs() > factor * mean.error).count();
    Ok(far as f64 / col.len() as f64)
}

pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Draws a fresh graph and returns its full census; used by exporters.
pub fn single_census<R: Rng + ?Sized>(model: &FitnessModel, n: u64, rng: &mut R) -> Result<DegreeCensus> {
    let theta = model.scaling_threshold(n);
    let fitness = model.sample(rng, n as usize)?;
    Ok(DegreeCensus::from_degrees(&degree_sequence_fast(&fitness, theta)?, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn expo() -> FitnessModel {
        FitnessModel::exponential(1.0).unwrap()
    }

    #[test]
    fn two_node_runs_are_all_or_nothing() {
        let m = run_replications(&expo(), 2, 1, &[0, 1], 17, DEFAULT_MAX_TOTAL_NODES).unwrap();
        let row = &m.values[0];
        assert!(row == &vec![1.0, 0.0] || row == &vec![0.0, 1.0]);
        let again = run_replications(&expo(), 2, 1, &[0, 1], 17, DEFAULT_MAX_TOTAL_NODES).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn replications_are_thread_independent() {
        let run = || run_replications(&expo(), 500, 40, &[0, 1, 5], 99, DEFAULT_MAX_TOTAL_NODES).unwrap();
        let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(run);
        assert_eq!(a, b);
        assert!(a.census_deviation < 1e-12);
    }

    #[test]
    fn resource_refusal() {
        let r = run_replications(&expo(), 1000, 1000, &[0], 1, 10_000);
        assert!(matches!(r, Err(RtgError::Resource(_))));
    }

    #[test]
    fn histogram_basics() {
        let h = Histogram::from_values(0, 10, vec![0.3]);
        assert_eq!(h.cdf(0.29), 0.0);
        assert_eq!(h.cdf(0.3), 1.0);
        assert_eq!(h.cdf(-0.1), 0.0);
        assert_eq!(h.cdf(1.0), 1.0);
        let bins = h.binned(DEFAULT_BINS);
        assert_eq!(bins.len(), 50);
        assert!((bins.iter().map(|b| b.mass).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_examples() {
        let a = Histogram::from_values(0, 10, vec![0.0; 5]);
        let b = Histogram::from_values(0, 10, vec![1.0; 7]);
        assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_distance(&a, &b).unwrap(), 1.0);
        let c = Histogram::from_values(1, 10, vec![1.0]);
        assert!(ks_distance(&a, &c).is_err());
    }

    #[test]
    fn run_average_of_single_run() {
        let m = run_replications(&expo(), 300, 1, &[0, 1, 2], 5, DEFAULT_MAX_TOTAL_NODES).unwrap();
        let avg = run_averaged_pmf(&m);
        for ((_, e), v) in avg.iter().zip(&m.values[0]) {
            assert_eq!(e.value, *v);
        }
    }

    #[test]
    fn single_run_report_is_flagged() {
        let rep = nondegeneracy_report(&expo(), &[100, 200], 1, &[0], 3).unwrap();
        assert!(rep.verdicts[0].nondegenerate.is_none());
        assert!(rep.spreads.iter().all(|s| s.std.is_none()));
    }

    #[test]
    fn factorial_identity_r1_small() {
        let c = factorial_moment_check(&expo(), 6, 1, 1, 200_000, 8).unwrap();
        assert!(c.within(3.0), "{c:?}");
        assert!(factorial_moment_check(&expo(), 6, 6, 1, 10, 8).is_err());
    }

    proptest! {
        #[test]
        fn ks_is_symmetric_and_bounded(a in prop::collection::vec(0.0f64..1.0, 1..40),
                                       b in prop::collection::vec(0.0f64..1.0, 1..40)) {
            let ha = Histogram::from_values(0, 1, a);
            let hb = Histogram::from_values(0, 1, b);
            let d1 = ks_distance(&ha, &hb).unwrap();
            let d2 = ks_distance(&hb, &ha).unwrap();
            prop_assert_eq!(d1, d2);
            prop_assert!((0.0..=1.0).contains(&d1));
            // brute force over all jump points
            let mut brute = 0.0f64;
            for x in ha.sorted.iter().chain(&hb.sorted) {
                brute = brute.max((ha.cdf(*x) - hb.cdf(*x)).abs());
            }
            prop_assert!((brute - d1).abs() < 1e-15);
        }

        #[test]
        fn binned_mass_sums_to_one(v in prop::collection::vec(0.0f64..1.0, 1..200), bins in 1usize..80) {
            let h = Histogram::from_values(0, 1, v);
            let b = h.binned(bins);
            prop_assert!((b.iter().map(|x| x.mass).sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(h.cdf(1.0) == 1.0 && h.cdf(-1e-9) == 0.0);
        }
    }
}
