//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! Semi-infinite integrals are mapped onto `(0, 1]` by the callers (see
//! [`crate::fitness::FitnessModel::tail_quantile`]), so only finite
//! intervals are handled here.

#![allow(clippy::excessive_precision)]

use std::cell::Cell;
use std::collections::BinaryHeap;

use crate::error::{Result, RtgError};

/// Default absolute tolerance for every quadrature in the crate.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Hard cap on integrand evaluations per integral.
pub const MAX_EVALUATIONS: usize = 1_000_000;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over the sorted breakpoints `points` (at least two) to
/// absolute tolerance `tol`.
///
/// The integrand must be finite at interior nodes; GK15 never evaluates the
/// interval end points, so integrable end-point singularities are fine.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    tol: f64,
    max_evaluations: usize,
) -> Result<QuadResult> {
    if points.len() < 2 || points.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(RtgError::invalid("quadrature breakpoints must be sorted, at least two"));
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0usize;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let (value, error) = gk15(&mut f, w[0], w[1]);
        evaluations += 15;
        total += value;
        total_err += error;
        heap.push(Segment { a: w[0], b: w[1], value, error });
    }
    if heap.is_empty() {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations });
    }

    while total_err > tol {
        if evaluations + 30 > max_evaluations {
            return Err(RtgError::Numerical {
                message: "adaptive quadrature hit the evaluation cap".into(),
                estimate: total,
                error: total_err,
                evaluations,
            });
        }
        let seg = heap.pop().expect("non-empty segment heap");
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            // Interval cannot be split further in floating point.
            return Err(RtgError::Numerical {
                message: "adaptive quadrature exhausted floating-point resolution".into(),
                estimate: total,
                error: total_err,
                evaluations,
            });
        }
        let (v1, e1) = gk15(&mut f, seg.a, mid);
        let (v2, e2) = gk15(&mut f, mid, seg.b);
        evaluations += 30;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
        if !total.is_finite() {
            return Err(RtgError::Numerical {
                message: "integrand produced a non-finite value".into(),
                estimate: total,
                error: total_err,
                evaluations,
            });
        }
    }
    // Recompute from segments to shed accumulated rounding in the running sums.
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(QuadResult { value, error, evaluations })
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    integrate_with_breaks(f, &[a, b], tol, MAX_EVALUATIONS)
}

/// Geometric breakpoints `lo, lo·q, …, hi` for integrands whose mass sits
/// at a scale far below the interval length.
pub fn geometric_breaks(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let mut pts = vec![lo];
    if lo > 0.0 && hi > lo {
        let decades = (hi / lo).log10();
        let steps = ((decades * per_decade as f64).ceil() as usize).max(1);
        let ratio = (hi / lo).powf(1.0 / steps as f64);
        let mut x = lo;
        for _ in 1..steps {
            x *= ratio;
            pts.push(x);
        }
    }
    pts.push(hi);
    pts
}

/// Integral over the triangle `{0 < v < u < 1}` of `g(u, v)`, as an outer
/// integral in `u` of inner integrals in `v`.
///
/// The reported error adds the outer estimate to the integrated inner
/// estimates.
pub fn integrate_triangle<G>(g: G, tol: f64) -> Result<QuadResult>
where
    G: Fn(f64, f64) -> f64,
{
    let inner_err = Cell::new(0.0);
    let inner_evals = Cell::new(0usize);
    let failure: Cell<Option<RtgError>> = Cell::new(None);
    let outer_breaks = geometric_breaks(1e-6, 1.0, 2);
    let mut pts = vec![0.0];
    pts.extend(outer_breaks);
    let outer = integrate_with_breaks(
        |u| {
            let mut breaks = vec![0.0];
            if u > 1e-300 {
                breaks.extend(geometric_breaks((u * 1e-6).max(1e-300), u, 1));
            } else {
                breaks.push(u);
            }
            match integrate_with_breaks(|v| g(u, v), &breaks, tol * 0.1, MAX_EVALUATIONS) {
                Ok(r) => {
                    inner_err.set(inner_err.get() + r.error);
                    inner_evals.set(inner_evals.get() + r.evaluations);
                    r.value
                }
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            }
        },
        &pts,
        tol * 0.5,
        MAX_EVALUATIONS,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let outer = outer?;
    // Inner errors were accumulated at every outer node; scale by the mean
    // node weight to get an integrated bound.
    let nodes = (outer.evaluations.max(1)) as f64;
    Ok(QuadResult {
        value: outer.value,
        error: outer.error + inner_err.get() / nodes,
        evaluations: outer.evaluations + inner_evals.get(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((r.value - 0.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-9).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn sharp_peak_with_breaks() {
        let peak = |x: f64| (-((x - 1e-5) / 1e-6).powi(2)).exp();
        let pts = {
            let mut p = vec![0.0];
            p.extend(geometric_breaks(1e-8, 1.0, 4));
            p
        };
        let r = integrate_with_breaks(peak, &pts, 1e-14, MAX_EVALUATIONS).unwrap();
        let exact = 1e-6 * std::f64::consts::PI.sqrt();
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn reports_cap() {
        let r = integrate_with_breaks(|x: f64| (1.0 / x).sin() / x, &[0.0, 1.0], 1e-14, 3000);
        assert!(matches!(r, Err(RtgError::Numerical { .. })));
    }

    #[test]
    fn triangle_area_and_moment() {
        let r = integrate_triangle(|_, _| 1.0, 1e-10).unwrap();
        assert!((r.value - 0.5).abs() < 1e-10);
        // ∫∫_{v<u} 2(u-v) dv du = 1/3
        let r = integrate_triangle(|u, v| 2.0 * (u - v), 1e-10).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_unsorted_breaks() {
        assert!(integrate_with_breaks(|x| x, &[1.0, 0.0], 1e-8, 100).is_err());
    }
}
