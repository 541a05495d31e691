use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};
use rtg_core::cli::{dispatch, COMMANDS};
use rtg_core::config::{RawConfig, Source, KEYS};
use rtg_core::RtgError;
use serde_json::json;

fn command() -> Command {
    let mut cmd = Command::new("rtg")
        .about("Random threshold graphs: simulation, limiting degree laws and moment checks")
        .arg(Arg::new("command").required(true).value_parser(COMMANDS.to_vec()))
        .arg(Arg::new("config").long("config").value_name("FILE").help("flat `section.key = value` file"))
        .arg(Arg::new("seed").long("seed").value_name("SEED").help("same as --run.seed"))
        .arg(Arg::new("out").long("out").value_name("DIR").help("same as --output.dir"))
        .arg(
            Arg::new("threads")
                .long("threads")
                .value_name("N")
                .value_parser(clap::value_parser!(usize))
                .help("worker threads; results do not depend on it"),
        );
    for spec in KEYS {
        cmd = cmd.arg(
            Arg::new(spec.key)
                .long(spec.key)
                .value_name("VALUE")
                .allow_hyphen_values(true)
                .help(spec.help),
        );
    }
    cmd
}

fn resolve(m: &ArgMatches) -> Result<rtg_core::config::RunConfig, RtgError> {
    let mut raw = match m.get_one::<String>("config") {
        Some(path) => RawConfig::parse(&std::fs::read_to_string(path)?),
        None => RawConfig::default(),
    };
    for spec in KEYS {
        if let Some(v) = m.get_one::<String>(spec.key) {
            raw.set(spec.key, v, Source::Flag(spec.key.to_string()));
        }
    }
    if let Some(v) = m.get_one::<String>("seed") {
        raw.set("run.seed", v, Source::Flag("seed".into()));
    }
    if let Some(v) = m.get_one::<String>("out") {
        raw.set("output.dir", v, Source::Flag("out".into()));
    }
    raw.resolve()
}

fn run(m: &ArgMatches) -> Result<(), RtgError> {
    let config = resolve(m)?;
    if let Some(&n) = m.get_one::<usize>("threads") {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RtgError::Resource(e.to_string()))?;
    }
    let command = m.get_one::<String>("command").expect("required");
    for path in dispatch(command, &config)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn report(code: &str, message: String, details: serde_json::Value, status: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": code, "message": message, "details": details }));
    ExitCode::from(status)
}

fn main() -> ExitCode {
    let m = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report("usage_error", e.to_string(), json!(null), 2),
    };
    match run(&m) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let details = match &e {
                RtgError::Config(v) | RtgError::GateFailure(v) => json!(v),
                _ => json!(null),
            };
            report(e.code(), e.to_string(), details, e.exit_status() as u8)
        }
    }
}
