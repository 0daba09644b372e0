//! `qlink`: runs named scenarios of the two-node simulator and writes the
//! results as CSV/JSON next to a manifest that reproduces the run.

mod config;
mod scenarios;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qlink_core::device::DeviceParams;
use qlink_core::protocols::TomographyMode;
use qlink_core::Error;

use config::{RunConfig, Scenario, SweepParam, SweepPlan};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "QLINK_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "qlink-out";

#[derive(Parser)]
#[command(name = "qlink", version, about = "Photon-mediated state transfer and entanglement between two circuit-QED nodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run(RunArgs),
    /// Entanglement metrics over a list of values of one parameter.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run config or manifest of an earlier run; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// Device parameter file (JSON).
    #[arg(long)]
    device: Option<PathBuf>,
    /// Output directory [default: $QLINK_OUT_DIR or ./qlink-out].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Finite-shot tomography with this many shots per setting; also the
    /// shots per state of readout-sim.
    #[arg(long, conflicts_with = "exact")]
    shots: Option<usize>,
    /// Tomography from exact Born probabilities (default).
    #[arg(long)]
    exact: bool,
    /// Channel power transmission.
    #[arg(long)]
    eta_c: Option<f64>,
    /// Factor on every T1/T2.
    #[arg(long)]
    coherence_scale: Option<f64>,
    /// Photon bandwidth in MHz.
    #[arg(long)]
    kappa_eff: Option<f64>,
    /// Delay of the absorption drive in ns.
    #[arg(long, allow_hyphen_values = true)]
    time_offset: Option<f64>,
    /// Fit the absorption delay (within ±5 ns) before running.
    #[arg(long)]
    fit_offset: bool,
    /// Resonator Fock truncation.
    #[arg(long)]
    fock: Option<usize>,
    /// Integration step in ns.
    #[arg(long)]
    dt: Option<f64>,
    /// Half-width of the simulated window in units of 1/kappa_eff.
    #[arg(long)]
    window: Option<f64>,
    /// Also sweep the truncation time of the emission drive.
    #[arg(long)]
    truncate_sweep: bool,
    /// Parameter varied by a sweep.
    #[arg(long, value_enum)]
    param: Option<SweepParam>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn resolve(args: &RunArgs, sweep_command: bool) -> Result<RunConfig, Error> {
    let mut rc = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let scenario = if sweep_command {
                Scenario::Sweep
            } else {
                args.scenario.ok_or_else(|| config_error("--scenario is required"))?
            };
            RunConfig::new(scenario)
        }
    };
    if let Some(s) = args.scenario {
        rc.scenario = s;
    }
    if sweep_command && rc.scenario != Scenario::Sweep {
        return Err(config_error("the sweep command only runs the sweep scenario"));
    }
    if let Some(path) = &args.device {
        rc.device = DeviceParams::load(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    }
    if let Some(seed) = args.seed {
        rc.seed = seed;
    }
    if let Some(n) = args.shots {
        rc.shots = n;
        rc.tomography = TomographyMode::Sampled { shots: n };
    }
    if args.exact {
        rc.tomography = TomographyMode::Exact;
    }
    let o = &mut rc.overrides;
    o.eta_c = args.eta_c.or(o.eta_c);
    o.coherence_scale = args.coherence_scale.or(o.coherence_scale);
    o.kappa_eff = args.kappa_eff.or(o.kappa_eff);
    o.time_offset = args.time_offset.or(o.time_offset);
    o.fit_offset |= args.fit_offset;
    o.fock = args.fock.or(o.fock);
    o.dt = args.dt.or(o.dt);
    o.window = args.window.or(o.window);
    rc.truncate_sweep |= args.truncate_sweep;
    match (args.param, &args.values) {
        (Some(parameter), Some(values)) => {
            rc.sweep = Some(SweepPlan {
                parameter,
                values: values.clone(),
            })
        }
        (None, None) => {}
        _ => return Err(config_error("--param and --values go together")),
    }
    rc.validate()?;
    Ok(rc)
}

fn out_dir(args: &RunArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn summary_lines(summary: &serde_json::Map<String, serde_json::Value>) -> String {
    summary.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

fn write_all(dir: &Path, rc: &RunConfig, art: &scenarios::Artifacts) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = json!({
        "tool": "qlink",
        "version": env!("CARGO_PKG_VERSION"),
        "config": rc,
    });
    let pretty = |v: &serde_json::Value| serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(std::io::Error::other);
    std::fs::write(dir.join("manifest.json"), pretty(&manifest)?)?;
    for (name, body) in &art.files {
        std::fs::write(dir.join(name), body)?;
    }
    std::fs::write(dir.join("summary.json"), pretty(&serde_json::Value::Object(art.summary.clone()))?)?;
    std::fs::write(dir.join("run.log"), summary_lines(&art.summary))?;
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_numerical() => 3,
        Error::Dynamics(_) | Error::Tomography(_) | Error::Metrics(_) => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn execute(args: &RunArgs, sweep_command: bool) -> ExitCode {
    let rc = match resolve(args, sweep_command) {
        Ok(rc) => rc,
        Err(e) => {
            eprintln!("qlink: {e}");
            return ExitCode::from(2);
        }
    };
    let art = match scenarios::run(&rc) {
        Ok(a) => a,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("qlink: {} failed: {e}", rc.scenario.name());
            if code == 3 {
                eprintln!("qlink: numerical failure; try a smaller --dt or a larger --fock");
            }
            return ExitCode::from(code);
        }
    };
    let dir = out_dir(args);
    if let Err(e) = write_all(&dir, &rc, &art) {
        eprintln!("qlink: cannot write {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    print!("{}", summary_lines(&art.summary));
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => execute(args, false),
        Command::Sweep(args) => execute(args, true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qlink_core::error::DynamicsError;

    #[test]
    fn exit_codes() {
        let drift = Error::Dynamics(DynamicsError::TraceDrift { time: 1.0, trace: 1.001 });
        assert_eq!(exit_code(&drift), 3);
        assert_eq!(exit_code(&config_error("x")), 2);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 1);
    }
}
