//! Threshold graph realizations, degree sequences and degree censuses.
//!
//! Nodes `k ≠ ℓ` are adjacent iff `fitness[k] + fitness[ℓ] > theta`. No
//! adjacency structure is ever stored: degrees and edges are read off a
//! sorted copy of the fitness vector. Floating-point ties at the threshold
//! are non-edges.

use rand::Rng;
use serde::Serialize;

use crate::error::{Result, RtgError};
use crate::fitness::FitnessModel;

fn check_len(fitness: &[f64]) -> Result<()> {
    if fitness.len() < 2 {
        return Err(RtgError::invalid(format!(
            "a threshold graph needs at least 2 nodes, got {}",
            fitness.len()
        )));
    }
    Ok(())
}

fn sorted_copy(fitness: &[f64]) -> Vec<f64> {
    let mut sorted = fitness.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    sorted
}

/// First position in `sorted` whose value `v` satisfies `v + x > theta`.
///
/// `v ↦ v + x` is monotone in floating point, so this partition agrees
/// bit-for-bit with the pairwise test.
#[inline]
fn first_linked(sorted: &[f64], x: f64, theta: f64) -> usize {
    sorted.partition_point(|&v| !(v + x > theta))
}

/// Degrees in `O(n log n)` via binary search on the sorted fitness values.
pub fn degree_sequence_fast(fitness: &[f64], theta: f64) -> Result<Vec<usize>> {
    check_len(fitness)?;
    let sorted = sorted_copy(fitness);
    let n = sorted.len();
    Ok(fitness
        .iter()
        .map(|&x| {
            let above = n - first_linked(&sorted, x, theta);
            above - usize::from(x + x > theta)
        })
        .collect())
}

/// Reference `O(n²)` degree computation.
pub fn degree_sequence_naive(fitness: &[f64], theta: f64) -> Result<Vec<usize>> {
    check_len(fitness)?;
    Ok((0..fitness.len())
        .map(|k| {
            (0..fitness.len())
                .filter(|&l| l != k && fitness[k] + fitness[l] > theta)
                .count()
        })
        .collect())
}

/// Iterator over the edges `(k, ℓ)`, `k < ℓ`, grouped by `k`.
///
/// Within a group the neighbours come in increasing fitness order.
pub struct EdgeStream<'a> {
    fitness: &'a [f64],
    theta: f64,
    order: Vec<usize>,
    sorted: Vec<f64>,
    k: usize,
    pos: usize,
}

impl<'a> EdgeStream<'a> {
    fn advance_node(&mut self) {
        while self.k < self.fitness.len() {
            self.pos = first_linked(&self.sorted, self.fitness[self.k], self.theta);
            if self.pos < self.sorted.len() {
                return;
            }
            self.k += 1;
        }
    }
}

impl Iterator for EdgeStream<'_> {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        while self.k < self.fitness.len() {
            while self.pos < self.order.len() {
                let l = self.order[self.pos];
                self.pos += 1;
                if l > self.k {
                    return Some((self.k, l));
                }
            }
            self.k += 1;
            self.advance_node();
        }
        None
    }
}

pub fn edge_stream(fitness: &[f64], theta: f64) -> Result<EdgeStream<'_>> {
    check_len(fitness)?;
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
    let sorted = order.iter().map(|&i| fitness[i]).collect();
    let mut stream = EdgeStream { fitness, theta, order, sorted, k: 0, pos: 0 };
    stream.advance_node();
    Ok(stream)
}

/// Counts `N_n(d; θ)` and fractions `P_n(d; θ)` of one realization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeCensus {
    pub n: usize,
    pub theta: f64,
    /// `counts[d]` for `d = 0..=max degree`.
    pub counts: Vec<u64>,
}

impl DegreeCensus {
    pub fn from_degrees(degrees: &[usize], theta: f64) -> Self {
        let max = degrees.iter().copied().max().unwrap_or(0);
        let mut counts = vec![0u64; max + 1];
        for &d in degrees {
            counts[d] += 1;
        }
        DegreeCensus { n: degrees.len(), theta, counts }
    }

    pub fn count(&self, d: usize) -> u64 {
        self.counts.get(d).copied().unwrap_or(0)
    }

    pub fn fraction(&self, d: usize) -> f64 {
        self.count(d) as f64 / self.n as f64
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.counts.len() - 1
    }
}

pub fn degree_census(degrees: &[usize]) -> DegreeCensus {
    DegreeCensus::from_degrees(degrees, f64::NAN)
}

/// One realization of `T(n; θ)`.
#[derive(Clone, Debug)]
pub struct GraphRun {
    pub n: usize,
    pub theta: f64,
    pub fitness: Vec<f64>,
    pub degrees: Vec<usize>,
}

impl GraphRun {
    pub fn generate<R: Rng + ?Sized>(
        model: &FitnessModel,
        n: usize,
        theta: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if n < 2 {
            return Err(RtgError::invalid(format!("graph size must be >= 2, got {n}")));
        }
        let fitness = model.sample(rng, n)?;
        let degrees = degree_sequence_fast(&fitness, theta)?;
        Ok(GraphRun { n, theta, fitness, degrees })
    }

    pub fn census(&self) -> DegreeCensus {
        DegreeCensus::from_degrees(&self.degrees, self.theta)
    }

    pub fn edges(&self) -> EdgeStream<'_> {
        edge_stream(&self.fitness, self.theta).expect("run has at least two nodes")
    }
}
