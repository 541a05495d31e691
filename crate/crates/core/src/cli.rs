//! Command dispatch and artifact writers for the `rtg` binary.
//!
//! Every CSV starts with a header row; floats are written in scientific
//! notation with 17 significant digits, so they read back bit-exactly.
//! Each command also writes `summary.json` with the resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{Result, RtgError};
use crate::fitness::FitnessModel;
use crate::graph::{degree_sequence_fast, degree_sequence_naive};
use crate::harness::{
    binomial_width, empirical_histogram, factorial_moment_check, nondegeneracy_from,
    run_replications, sample_std, seed_for_size, spread_share, ReplicationMatrix,
};
use crate::joint::{
    g_r_direct_grid, joint_moment, moment_sequence, sampler_pgf, truncation_order, char_fn_from_moments,
    MomentMethod,
};
use crate::limits::{finite_n_nodal_pmf, fujihara_approx, fujihara_pmf, limit_nodal_pmf, poisson_pmf_ln};
use crate::rng::stream;

pub const COMMANDS: &[&str] =
    &["simulate", "histogram", "limits", "joint-moments", "charfn", "verify", "check-scaling"];

/// Formats a float for CSV output.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(csv_error)?;
        w.write_record(header).map_err(csv_error)?;
        for row in rows {
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn summary(&mut self, command: &str, config: &RunConfig, body: Value) -> Result<()> {
        let mut doc = json!({ "command": command, "config": config });
        if let (Value::Object(doc), Value::Object(body)) = (&mut doc, body) {
            doc.extend(body);
        }
        let path = self.dir.join("summary.json");
        let text = serde_json::to_string_pretty(&doc).map_err(|e| RtgError::invalid(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        self.files.push(path);
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> RtgError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => RtgError::Io(io),
        other => RtgError::invalid(format!("csv: {other:?}")),
    }
}

fn stage(msg: &str) {
    eprintln!("rtg: {msg}");
}

/// Runs one command, writing its artifacts under `config.output.dir`.
/// Returns the paths written.
pub fn dispatch(command: &str, config: &RunConfig) -> Result<Vec<PathBuf>> {
    let model = config.model()?;
    let mut out = Artifacts::new(Path::new(&config.output.dir))?;
    match command {
        "simulate" => simulate(config, &model, &mut out)?,
        "histogram" => histogram(config, &model, &mut out)?,
        "limits" => limits(config, &model, &mut out)?,
        "joint-moments" => joint_moments(config, &model, &mut out)?,
        "charfn" => charfn(config, &model, &mut out)?,
        "check-scaling" => check_scaling(config, &model, &mut out)?,
        "verify" => verify(config, &model, &mut out)?,
        other => {
            return Err(RtgError::invalid(format!(
                "unknown command `{other}`; expected one of {}",
                COMMANDS.join(", ")
            )))
        }
    }
    Ok(out.files)
}

fn replication_rows(m: &ReplicationMatrix) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(m.runs * m.d_set.len());
    for (run, values) in m.values.iter().enumerate() {
        for (d, v) in m.d_set.iter().zip(values) {
            rows.push(vec![run.to_string(), d.to_string(), num(*v)]);
        }
    }
    rows
}

fn replicate(config: &RunConfig, model: &FitnessModel, n: u64, seed: u64) -> Result<ReplicationMatrix> {
    stage(&format!("simulating {} graphs of size {n}", config.run.replications));
    run_replications(
        model,
        n,
        config.run.replications as usize,
        &config.run.d_set,
        seed,
        config.run.max_total_nodes,
    )
}

fn simulate(config: &RunConfig, model: &FitnessModel, out: &mut Artifacts) -> Result<()> {
    let n = config.run.n;
    let m = replicate(config, model, n, config.run.seed)?;
    out.csv("replications.csv", &["run", "d", "fraction"], replication_rows(&m))?;
    stage("comparing run averages with the finite-n pmf");
    let mut degrees = Vec::new();
    for &d in &m.d_set {
        let (mean, mean_sq) = m.column_moments(d)?;
        let col = m.column(d)?;
        let exact = finite_n_nodal_pmf(model, n, m.theta, d)?;
        degrees.push(json!({
            "d": d,
            "mean": mean.value,
            "mean_se": mean.error,
            "std": (col.len() > 1).then(|| sample_std(&col)),
            "mean_square": mean_sq.value,
            "mean_square_se": mean_sq.error,
            "finite_n_pmf": exact.value,
        }));
    }
    out.summary(
        "simulate",
        config,
        json!({
            "model": m.model,
            "n": n,
            "theta": m.theta,
            "runs": m.runs,
            "seed": m.seed,
            "census_deviation": m.census_deviation,
            "degrees": degrees,
        }),
    )
}

fn histogram(config: &RunConfig, model: &FitnessModel, out: &mut Artifacts) -> Result<()> {
    let mut matrices = Vec::new();
    let mut seeds = Vec::new();
    for &n in &config.run.n_grid {
        let seed = seed_for_size(config.run.seed, n);
        let m = replicate(config, model, n, seed)?;
        out.csv(&format!("replications_n{n}.csv"), &["run", "d", "fraction"], replication_rows(&m))?;
        let mut rows = Vec::new();
        for &d in &m.d_set {
            for b in empirical_histogram(&m, d)?.binned(config.histogram.bins) {
                rows.push(vec![d.to_string(), num(b.lo), num(b.hi), num(b.mass)]);
            }
        }
        out.csv(&format!("histogram_n{n}.csv"), &["d", "bin_lo", "bin_hi", "mass"], rows)?;
        seeds.push(json!({ "n": n, "seed": seed }));
        matrices.push(m);
    }
    let gates = &config.gates;
    let report = nondegeneracy_from(&matrices, config.run.seed, gates)?;
    let mut iqr_gates = Vec::new();
    for m in &matrices {
        for &d in &m.d_set {
            let h = empirical_histogram(m, d)?;
            let (mean, _) = m.column_moments(d)?;
            let width = binomial_width(mean.value, m.n);
            iqr_gates.push(json!({
                "n": m.n,
                "d": d,
                "iqr": h.iqr(),
                "binomial_width": width,
                "passed": h.iqr() > gates.iqr_width_factor * width,
            }));
        }
    }
    let largest = matrices.last().expect("non-empty grid");
    let mut spread_gates = Vec::new();
    if largest.runs >= 2 {
        for &d in &largest.d_set {
            let limit = limit_nodal_pmf(model, d)?;
            let share = spread_share(largest, d, limit.value, gates.run_spread_se_factor)?;
            spread_gates.push(json!({
                "n": largest.n,
                "d": d,
                "limit_pmf": limit.value,
                "share_far_from_limit": share,
                "passed": share >= 0.5,
            }));
        }
    }
    out.summary(
        "histogram",
        config,
        json!({
            "model": model.describe(),
            "seeds": seeds,
            "spreads": report.spreads,
            "ks": report.ks,
            "verdicts": report.verdicts,
            "iqr_gates": iqr_gates,
            "spread_gates": spread_gates,
        }),
    )
}

fn limits(config: &RunConfig, model: &FitnessModel, out: &mut Artifacts) -> Result<()> {
    let n = config.run.n;
    let theta = model.scaling_threshold(n);
    let exponential = matches!(model, FitnessModel::Exponential { .. });
    stage(&format!("evaluating degree laws for d <= {}", config.limits.d_max));
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for d in 0..=config.limits.d_max {
        let finite = (d < n).then(|| finite_n_nodal_pmf(model, n, theta, d)).transpose()?;
        let limit = limit_nodal_pmf(model, d)?;
        let approx = if exponential && d >= 2 { Some(fujihara_approx(d)?) } else { None };
        rows.push(vec![
            d.to_string(),
            opt(finite.map(|e| e.value)),
            num(limit.value),
            opt(approx.map(|a| a.0)),
            opt(approx.map(|a| a.1)),
        ]);
        table.push(json!({
            "d": d,
            "finite_n_error": finite.map(|e| e.error),
            "limit_error": limit.error,
        }));
    }
    out.csv("limits.csv", &["d", "finite_n_pmf", "limit_pmf", "fujihara_approx", "error_bound"], rows)?;
    out.summary(
        "limits",
        config,
        json!({ "model": model.describe(), "n": n, "theta": theta, "quadrature_errors": table }),
    )
}

fn moment_method(config: &RunConfig) -> MomentMethod {
    if config.joint.method == "monte-carlo" {
        MomentMethod::MonteCarlo { samples: config.mc.samples, seed: config.run.seed }
    } else {
        MomentMethod::Quadrature { tolerance: config.numerics.tolerance }
    }
}

fn joint_moments(config: &RunConfig, model: &FitnessModel, out: &mut Artifacts) -> Result<()> {
    let method = moment_method(config);
    let mut rows = Vec::new();
    for &d in &config.run.d_set {
        stage(&format!("joint moments for d = {d}"));
        let seq = moment_sequence(model, d, config.joint.r_max, method)?;
        for (i, m) in seq.entries.iter().enumerate() {
            rows.push(vec![
                d.to_string(),
                (i + 1).to_string(),
                num(m.value),
                seq.method.as_str().to_string(),
                num(m.error),
            ]);
        }
    }
    out.csv("joint_moments.csv", &["d", "r", "m_r", "method", "error"], rows)?;
    out.summary("joint-moments", config, json!({ "model": model.describe() }))
}

fn charfn(config: &RunConfig, model: &FitnessModel, out: &mut Artifacts) -> Result<()> {
    let eps = config.charfn.epsilon;
    let orders = config
        .charfn
        .t_grid
        .iter()
        .map(|&t| truncation_order(t, eps))
        .collect::<Result<Vec<_>>>()?;
    let r_needed = orders.iter().map(|o| o.0).max().unwrap_or(0);
    let method = MomentMethod::Quadrature { tolerance: config.numerics.tolerance };
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for &d in &config.run.d_set {
        stage(&format!("characteristic function for d = {d}"));
        let seq = if r_needed == 0 {
            crate::joint::MomentSequence { d, entries: Vec::new(), method: method.tag() }
        } else {
            moment_sequence(model, d, r_needed, method)?
        };
        for (&t, &(order, tail)) in config.charfn.t_grid.iter().zip(&orders) {
            let e = char_fn_from_moments(&seq, t, order, tail);
            rows.push(vec![d.to_string(), num(t), num(e.re), num(e.im), order.to_string(), num(tail)]);
            errors.push(json!({ "d": d, "t": t, "moment_error": e.moment_error }));
        }
    }
    out.csv("charfn.csv", &["d", "t", "re", "im", "R_used", "tail_bound"], rows)?;
    out.summary("charfn", config, json!({ "model": model.describe(), "moment_errors": errors }))
}

fn check_scaling(config: &RunConfig, model: &FitnessModel, out: &mut Artifacts) -> Result<()> {
    let report = model.check_scaling(&config.scaling.x_grid, &config.scaling.n_grid)?;
    let mut rows = Vec::new();
    for row in &report.rows {
        for (j, &x) in report.x_grid.iter().enumerate() {
            rows.push(vec![
                row.n.to_string(),
                num(row.theta),
                num(x),
                num(row.values[j]),
                num(report.limits[j]),
                num(row.residuals[j]),
            ]);
        }
    }
    out.csv("scaling.csv", &["n", "theta", "x", "value", "limit", "residual"], rows)?;
    out.summary("check-scaling", config, json!({ "report": report }))
}

struct Gate {
    name: &'static str,
    value: f64,
    threshold: f64,
    passed: bool,
}

fn gate(name: &'static str, value: f64, threshold: f64) -> Gate {
    Gate { name, value, threshold, passed: value <= threshold }
}

fn verify(config: &RunConfig, model: &FitnessModel, out: &mut Artifacts) -> Result<()> {
    let seed = config.run.seed;
    let mut gates = Vec::new();

    stage("verify: kernel equivalence");
    let mut mismatches = 0u64;
    for n in [8u64, 64, 512] {
        let theta = model.scaling_threshold(n);
        for k in 0..20 {
            let x = model.sample(&mut stream(seed, 100 + n, k), n as usize)?;
            if degree_sequence_fast(&x, theta)? != degree_sequence_naive(&x, theta)? {
                mismatches += 1;
            }
        }
    }
    gates.push(gate("kernel_equivalence", mismatches as f64, 0.0));

    stage("verify: finite-n pmf normalisation");
    let n = 200;
    let theta = model.scaling_threshold(n);
    let mut total = 0.0;
    for d in 0..n {
        total += finite_n_nodal_pmf(model, n, theta, d)?.value;
    }
    gates.push(gate("finite_n_pmf_sums_to_one", (total - 1.0).abs(), 1e-6));

    stage("verify: limit laws");
    if matches!(model, FitnessModel::Exponential { .. }) {
        let mut worst_ratio = 0.0f64;
        let mut worst_gap = 0.0f64;
        for d in 2..=15 {
            let p = fujihara_pmf(d)?.value;
            let (approx, bound) = fujihara_approx(d)?;
            worst_ratio = worst_ratio.max((p - approx).abs() / bound);
        }
        for d in 0..=10 {
            worst_gap = worst_gap.max((limit_nodal_pmf(model, d)?.value - fujihara_pmf(d)?.value).abs());
        }
        gates.push(gate("approximation_within_bound", worst_ratio, 1.0));
        gates.push(gate("limit_matches_closed_form", worst_gap, 1e-8));
    }
    if let Some(c) = model.constant_intensity() {
        let mut worst = 0.0f64;
        for d in 0..=10 {
            worst = worst.max((limit_nodal_pmf(model, d)?.value - poisson_pmf_ln(c.ln(), d)).abs());
        }
        gates.push(gate("poisson_limit", worst, 1e-6));
    }

    stage("verify: moment ordering");
    let mut violations = 0u64;
    let q = MomentMethod::Quadrature { tolerance: config.numerics.tolerance };
    for &d in &config.run.d_set {
        let m1 = joint_moment(model, 1, d, q)?.value;
        let m2 = joint_moment(model, 2, d, q)?.value;
        if !(m1 * m1 < m2 && m2 <= m1 * (1.0 + 1e-9)) {
            violations += 1;
        }
    }
    gates.push(gate("moment_ordering", violations as f64, 0.0));

    stage("verify: sampler against direct expectation");
    let zs: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![0.5, 0.5], vec![0.25, 0.75], vec![1.0, 0.5]];
    let direct = g_r_direct_grid(model, &zs, config.mc.samples, seed)?;
    let sampled = sampler_pgf(model, &zs, config.mc.samples, seed)?;
    let worst_z = direct
        .iter()
        .zip(&sampled)
        .map(|(a, b)| standardized(a.value - b.value, a.error.hypot(b.error)))
        .fold(0.0, f64::max);
    gates.push(gate("sampler_pgf_concordance", worst_z, 4.0));

    stage("verify: factorial moment identity");
    let fc = factorial_moment_check(model, 6, 2, 0, config.mc.graphs, seed)?;
    gates.push(gate("factorial_identity", standardized(fc.lhs.value - fc.rhs.value, fc.combined_se), 3.0));

    stage("verify: replication mean and determinism");
    let rep = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| RtgError::Resource(e.to_string()))?
            .install(|| run_replications(model, 1000, 200, &[0], seed, config.run.max_total_nodes))
    };
    let a = rep(1)?;
    let b = rep(3)?;
    gates.push(gate("replications_thread_independent", if a == b { 0.0 } else { 1.0 }, 0.0));
    gates.push(gate("census_normalised", a.census_deviation, 1e-12));
    let (mean, _) = a.column_moments(0)?;
    let exact = finite_n_nodal_pmf(model, 1000, a.theta, 0)?;
    gates.push(gate("replication_mean_unbiased", standardized(mean.value - exact.value, mean.error), 3.0));

    let rows = gates
        .iter()
        .map(|g| vec![g.name.to_string(), g.passed.to_string(), num(g.value), num(g.threshold)])
        .collect();
    out.csv("verify.csv", &["gate", "passed", "value", "threshold"], rows)?;
    let failed: Vec<String> = gates.iter().filter(|g| !g.passed).map(|g| g.name.to_string()).collect();
    out.summary(
        "verify",
        config,
        json!({
            "model": model.describe(),
            "gates": gates.iter().map(|g| json!({
                "gate": g.name, "passed": g.passed, "value": g.value, "threshold": g.threshold,
            })).collect::<Vec<_>>(),
            "all_passed": failed.is_empty(),
        }),
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(RtgError::GateFailure(failed))
    }
}

fn standardized(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff.abs() / se
    }
}
