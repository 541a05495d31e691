//! Run configuration in a flat `section.key = value` format.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated. Every violation is collected and reported with its source
//! (a line number, or the command-line flag that set it).

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Result, RtgError};
use crate::fitness::FitnessModel;
use crate::harness::Gates;

/// A recognised key, its default (`None` = required) and a short help text.
pub struct KeySpec {
    pub key: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

pub const KEYS: &[KeySpec] = &[
    KeySpec { key: "fitness.family", default: None, help: "exponential | pareto" },
    KeySpec { key: "fitness.rate", default: Some("1"), help: "exponential rate λ > 0" },
    KeySpec { key: "fitness.scale", default: Some("1"), help: "Pareto scale a > 0" },
    KeySpec { key: "fitness.shape", default: Some("1"), help: "Pareto shape ν > 0" },
    KeySpec { key: "run.n", default: Some("30000"), help: "graph size, >= 2" },
    KeySpec { key: "run.n_grid", default: Some("1000,10000,30000"), help: "graph sizes for histogram studies" },
    KeySpec { key: "run.replications", default: Some("100"), help: "independent graphs per size, >= 1" },
    KeySpec { key: "run.d_set", default: Some("0,5,10"), help: "degrees of interest" },
    KeySpec { key: "run.seed", default: Some("1"), help: "master seed" },
    KeySpec { key: "run.max_total_nodes", default: Some("2000000000"), help: "refuse when n·R exceeds this" },
    KeySpec { key: "limits.d_max", default: Some("20"), help: "largest degree in the limits table" },
    KeySpec { key: "joint.r_max", default: Some("4"), help: "largest moment order, 1..=40" },
    KeySpec { key: "joint.method", default: Some("quadrature"), help: "quadrature | monte-carlo" },
    KeySpec { key: "mc.samples", default: Some("1000000"), help: "Monte Carlo draws for limit-law estimators" },
    KeySpec { key: "mc.graphs", default: Some("100000"), help: "Monte Carlo graphs for the factorial identity" },
    KeySpec { key: "numerics.tolerance", default: Some("1e-8"), help: "quadrature tolerance" },
    KeySpec { key: "charfn.t_grid", default: Some("0.5,1,2"), help: "characteristic function arguments" },
    KeySpec { key: "charfn.epsilon", default: Some("1e-8"), help: "series truncation tolerance" },
    KeySpec { key: "histogram.bins", default: Some("50"), help: "bins in histogram exports" },
    KeySpec { key: "scaling.x_grid", default: Some("0,0.5,1,2"), help: "fitness points for check-scaling" },
    KeySpec { key: "scaling.n_grid", default: Some("10,100,1000,10000,100000,1000000"), help: "sizes for check-scaling" },
    KeySpec { key: "gates.ks", default: Some("0.25"), help: "max KS distance between consecutive sizes" },
    KeySpec { key: "gates.iqr_width_factor", default: Some("5"), help: "IQR over binomial sampling width" },
    KeySpec { key: "gates.run_spread_se_factor", default: Some("10"), help: "per-run deviation in run-average SEs" },
    KeySpec { key: "gates.std_retention", default: Some("0.5"), help: "std share kept at the largest size" },
    KeySpec { key: "output.dir", default: Some("out"), help: "directory for artifacts" },
];

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Source {
    Line(usize),
    Flag(String),
    Default,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Line(n) => write!(f, "line {n}"),
            Source::Flag(k) => write!(f, "flag --{k}"),
            Source::Default => write!(f, "default"),
        }
    }
}

/// Raw key/value assignments before validation; later assignments win.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Source)>,
    errors: Vec<String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Self {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                raw.errors.push(format!("line {line_no}: expected `section.key = value`"));
                continue;
            };
            raw.set(key.trim(), value.trim(), Source::Line(line_no));
        }
        raw
    }

    pub fn set(&mut self, key: &str, value: &str, source: Source) {
        if KEYS.iter().any(|k| k.key == key) {
            self.entries.insert(key.to_string(), (value.to_string(), source));
        } else {
            self.errors.push(format!("{source}: unknown key `{key}`"));
        }
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let mut p = Parser { raw: self, errors: self.errors.clone() };
        let family = p.choice("fitness.family", &["exponential", "pareto"]);
        let config = RunConfig {
            fitness: FitnessConfig {
                family,
                rate: p.positive("fitness.rate"),
                scale: p.positive("fitness.scale"),
                shape: p.positive("fitness.shape"),
            },
            run: RunSection {
                n: p.integer("run.n", 2, u64::MAX),
                n_grid: p.integers("run.n_grid", 2),
                replications: p.integer("run.replications", 1, u64::MAX),
                d_set: p.integers("run.d_set", 0),
                seed: p.integer("run.seed", 0, u64::MAX),
                max_total_nodes: p.integer("run.max_total_nodes", 1, u64::MAX),
            },
            limits: LimitsSection { d_max: p.integer("limits.d_max", 0, 100_000) },
            joint: JointSection {
                r_max: p.integer("joint.r_max", 1, 40) as usize,
                method: p.choice("joint.method", &["quadrature", "monte-carlo"]),
            },
            mc: McSection {
                samples: p.integer("mc.samples", 1, u64::MAX),
                graphs: p.integer("mc.graphs", 1, u64::MAX),
            },
            numerics: NumericsSection { tolerance: p.positive("numerics.tolerance") },
            charfn: CharFnSection {
                t_grid: p.reals("charfn.t_grid"),
                epsilon: p.positive("charfn.epsilon"),
            },
            histogram: HistogramSection { bins: p.integer("histogram.bins", 1, 100_000) as usize },
            scaling: ScalingSection {
                x_grid: p.reals("scaling.x_grid"),
                n_grid: p.integers("scaling.n_grid", 1),
            },
            gates: Gates {
                ks: p.unit("gates.ks"),
                iqr_width_factor: p.positive("gates.iqr_width_factor"),
                run_spread_se_factor: p.positive("gates.run_spread_se_factor"),
                std_retention: p.unit("gates.std_retention"),
            },
            output: OutputSection { dir: p.string("output.dir") },
        };
        if p.errors.is_empty() {
            config.model()?;
            Ok(config)
        } else {
            Err(RtgError::Config(p.errors))
        }
    }
}

/// Parses and validates a configuration file's text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    RawConfig::parse(text).resolve()
}

struct Parser<'a> {
    raw: &'a RawConfig,
    errors: Vec<String>,
}

impl Parser<'_> {
    fn lookup(&mut self, key: &str) -> Option<(String, Source)> {
        if let Some((v, s)) = self.raw.entries.get(key) {
            return Some((v.clone(), s.clone()));
        }
        let spec = KEYS.iter().find(|k| k.key == key).expect("key in table");
        match spec.default {
            Some(d) => Some((d.to_string(), Source::Default)),
            None => {
                self.errors.push(format!("missing required key `{key}`"));
                None
            }
        }
    }

    fn fail(&mut self, source: &Source, key: &str, msg: String) {
        self.errors.push(format!("{source}: {key}: {msg}"));
    }

    fn string(&mut self, key: &str) -> String {
        self.lookup(key).map(|(v, _)| v).unwrap_or_default()
    }

    fn choice(&mut self, key: &str, allowed: &[&str]) -> String {
        let Some((v, src)) = self.lookup(key) else { return String::new() };
        if !allowed.contains(&v.as_str()) {
            self.fail(&src, key, format!("expected one of {}, got `{v}`", allowed.join(" | ")));
        }
        v
    }

    fn real(&mut self, key: &str, ok: fn(f64) -> bool, what: &str) -> f64 {
        let Some((v, src)) = self.lookup(key) else { return f64::NAN };
        match v.parse::<f64>() {
            Ok(x) if ok(x) => x,
            Ok(x) => {
                self.fail(&src, key, format!("out of range: expected {what}, got {x}"));
                f64::NAN
            }
            Err(_) => {
                self.fail(&src, key, format!("type mismatch: expected a number, got `{v}`"));
                f64::NAN
            }
        }
    }

    fn positive(&mut self, key: &str) -> f64 {
        self.real(key, |x| x > 0.0 && x.is_finite(), "a finite number > 0")
    }

    fn unit(&mut self, key: &str) -> f64 {
        self.real(key, |x| x > 0.0 && x <= 1.0, "a number in (0, 1]")
    }

    fn integer(&mut self, key: &str, min: u64, max: u64) -> u64 {
        let Some((v, src)) = self.lookup(key) else { return 0 };
        match v.parse::<i128>() {
            Ok(x) if x >= min as i128 && x <= max as i128 => x as u64,
            Ok(x) => {
                let bound = if max == u64::MAX { format!(">= {min}") } else { format!("in {min}..={max}") };
                self.fail(&src, key, format!("out of range: expected an integer {bound}, got {x}"));
                0
            }
            Err(_) => {
                self.fail(&src, key, format!("type mismatch: expected an integer, got `{v}`"));
                0
            }
        }
    }

    fn list(&mut self, key: &str) -> Option<(Vec<String>, Source)> {
        let (v, src) = self.lookup(key)?;
        let items: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
        if items.iter().any(String::is_empty) {
            self.fail(&src, key, format!("expected a non-empty comma-separated list, got `{v}`"));
            return None;
        }
        Some((items, src))
    }

    fn integers(&mut self, key: &str, min: u64) -> Vec<u64> {
        let Some((items, src)) = self.list(key) else { return Vec::new() };
        let mut out = Vec::new();
        for item in items {
            match item.parse::<i128>() {
                Ok(x) if x >= min as i128 && x <= u64::MAX as i128 => out.push(x as u64),
                Ok(x) => self.fail(&src, key, format!("out of range: expected integers >= {min}, got {x}")),
                Err(_) => self.fail(&src, key, format!("type mismatch: expected integers, got `{item}`")),
            }
        }
        out
    }

    fn reals(&mut self, key: &str) -> Vec<f64> {
        let Some((items, src)) = self.list(key) else { return Vec::new() };
        let mut out = Vec::new();
        for item in items {
            match item.parse::<f64>() {
                Ok(x) if x.is_finite() => out.push(x),
                _ => self.fail(&src, key, format!("type mismatch: expected finite numbers, got `{item}`")),
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitnessConfig {
    pub family: String,
    pub rate: f64,
    pub scale: f64,
    pub shape: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSection {
    pub n: u64,
    pub n_grid: Vec<u64>,
    pub replications: u64,
    pub d_set: Vec<u64>,
    pub seed: u64,
    pub max_total_nodes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitsSection {
    pub d_max: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointSection {
    pub r_max: usize,
    pub method: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McSection {
    pub samples: u64,
    pub graphs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NumericsSection {
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharFnSection {
    pub t_grid: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramSection {
    pub bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingSection {
    pub x_grid: Vec<f64>,
    pub n_grid: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputSection {
    pub dir: String,
}

/// Fully resolved configuration, defaults included.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub fitness: FitnessConfig,
    pub run: RunSection,
    pub limits: LimitsSection,
    pub joint: JointSection,
    pub mc: McSection,
    pub numerics: NumericsSection,
    pub charfn: CharFnSection,
    pub histogram: HistogramSection,
    pub scaling: ScalingSection,
    pub gates: Gates,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn model(&self) -> Result<FitnessModel> {
        let f = &self.fitness;
        match f.family.as_str() {
            "exponential" => FitnessModel::exponential(f.rate),
            "pareto" => FitnessModel::pareto(f.scale, f.shape),
            other => Err(RtgError::Config(vec![format!("unknown fitness family `{other}`")])),
        }
    }
}

impl Default for RunConfig {
    /// Defaults with an exponential fitness of unit rate.
    fn default() -> Self {
        let mut raw = RawConfig::default();
        raw.set("fitness.family", "exponential", Source::Default);
        raw.resolve().expect("defaults are valid")
    }
}
