//! `wpsn`: run scenarios, sweeps, one-shot optimisations and calibration fits.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use wpsn_core::calibration;
use wpsn_core::device_models::SensorMode;
use wpsn_core::energy_management::{
    max_efficiency_point, optimal_strategy, ControllerConfig, Scheme, StrategyOutcome,
};
use wpsn_core::energy_evolution::avg_amplifier_power;
use wpsn_core::reference;
use wpsn_core::sim::{
    run_scenario_detailed, sweep_attenuation, trace_to_string, sweep_to_string, ControlMode,
    Integrator, Scenario,
};
use wpsn_core::units::{attenuation_db_to_ratio, ratio_to_attenuation_db};
use wpsn_core::Error;

#[derive(Parser)]
#[command(name = "wpsn", version, about = "Wireless-powered sensor node simulator")]
struct Cli {
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the scenario's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use the frozen-energy frame map instead of the ODE integrator.
    #[arg(long, global = true)]
    discrete: bool,
    /// Suppress the summary on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and emit the per-frame trace as CSV.
    Simulate { scenario: PathBuf },
    /// Settled operating points of both schemes at fixed attenuations.
    Sweep {
        scenario: PathBuf,
        /// Comma-separated attenuations in dB.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        attenuations: Vec<f64>,
    },
    /// Solve the open-loop optimum at one attenuation and print it as JSON.
    Optimize {
        scenario: PathBuf,
        /// Attenuation in dB.
        #[arg(long)]
        attenuation: f64,
    },
    /// Fit model parameters from a measurement trace and print them as JSON.
    Calibrate {
        kind: TraceKind,
        trace: PathBuf,
        /// Storage capacitance for leakage fits, farads.
        #[arg(long, default_value_t = 0.1)]
        capacitance: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceKind {
    PathLoss,
    Leakage,
    Loads,
    Iv,
    Pae,
}

/// Non-finite values have no JSON form; they become null.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn load_scenario(cli: &Cli, path: &Path) -> Result<Scenario, Error> {
    let mut sc = Scenario::load(path)?;
    if cli.seed.is_some() {
        sc.seed = cli.seed;
    }
    if cli.discrete {
        sc.integrator = Integrator::Discrete;
    }
    Ok(sc)
}

fn emit(cli: &Cli, text: &str) -> Result<(), Error> {
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })
        }
    }
}

fn note(cli: &Cli, msg: String) {
    if !cli.quiet {
        eprintln!("{msg}");
    }
}

fn simulate(cli: &Cli, path: &Path) -> Result<(), Error> {
    let sc = load_scenario(cli, path)?;
    let out = run_scenario_detailed(&sc)?;
    emit(cli, &trace_to_string(&out.records))?;
    let (lo, hi) = out
        .records
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.energy), hi.max(r.energy))
        });
    note(
        cli,
        format!(
            "{} frames, {} epochs, energy {:.4}..{:.4} J, {} brownout frames",
            out.records.len(),
            out.epochs.len(),
            lo,
            hi,
            out.brownout_frames()
        ),
    );
    Ok(())
}

fn sweep(cli: &Cli, path: &Path, dbs: &[f64]) -> Result<(), Error> {
    let sc = load_scenario(cli, path)?;
    let hs: Vec<f64> = dbs.iter().map(|&d| attenuation_db_to_ratio(d)).collect();
    let rows = sweep_attenuation(&sc, &hs)?;
    emit(cli, &sweep_to_string(&rows))?;
    let unsettled = rows.iter().filter(|r| !r.converged).count();
    note(cli, format!("{} rows, {unsettled} not settled", rows.len()));
    Ok(())
}

fn optimize(cli: &Cli, path: &Path, db: f64) -> Result<(), Error> {
    let sc = load_scenario(cli, path)?;
    let cfg = match &sc.control {
        ControlMode::Adaptive(c) => c.clone(),
        ControlMode::Fixed(_) => ControllerConfig::reference(Scheme::Proposed),
    };
    let h = attenuation_db_to_ratio(db);
    let p = &sc.device;
    let mep = max_efficiency_point(p, cfg.e_tgt, h)?;
    let out = optimal_strategy(p, cfg.e_tgt, 1.0 / cfg.tau_tgt, h, cfg.alpha_min)?;
    let mut v = json!({
        "attenuation_db": db,
        "h": h,
        "e_tgt": cfg.e_tgt,
        "r_tgt": 1.0 / cfg.tau_tgt,
        "upsilon_hat": num(mep.upsilon_hat),
        "mu_hat": num(mep.mu_hat),
        "s_hat": num(mep.s_hat),
    });
    match out {
        StrategyOutcome::Feasible {
            tuple,
            case,
            monotonicity_violation,
        } => {
            v["feasible"] = json!(true);
            v["case"] = json!(case.as_str());
            v["alpha"] = num(tuple.alpha);
            v["upsilon"] = num(tuple.upsilon);
            v["tau"] = num(tuple.tau);
            v["p_cons"] = num(avg_amplifier_power(&p.amplifier, tuple.alpha, tuple.upsilon));
            v["monotonicity_violation"] = json!(monotonicity_violation);
        }
        StrategyOutcome::Infeasible {
            harvested,
            sleep_consumption,
        } => {
            v["feasible"] = json!(false);
            v["harvested"] = num(harvested);
            v["sleep_consumption"] = num(sleep_consumption);
        }
    }
    emit(cli, &format!("{v}\n"))
}

fn calibrate(cli: &Cli, kind: TraceKind, path: &Path, capacitance: f64) -> Result<(), Error> {
    let v = match kind {
        TraceKind::PathLoss => {
            let f = calibration::fit_path_loss(&calibration::load_path_loss_trace(path)?)?;
            json!({
                "g_ref": num(f.g_ref),
                "g_ref_db": num(ratio_to_attenuation_db(f.g_ref)),
                "exponent": num(f.exponent),
                "residual": num(f.residual),
            })
        }
        TraceKind::Leakage => {
            let f = calibration::fit_leakage(&calibration::load_leakage_trace(path)?, capacitance)?;
            json!({ "r_leak": num(f.r_leak), "residual": num(f.residual) })
        }
        TraceKind::Loads => {
            let t = calibration::fit_loads(&calibration::load_load_traces(path)?, reference::durations())?;
            let mut m = serde_json::Map::new();
            for mode in [
                SensorMode::Idle,
                SensorMode::Active,
                SensorMode::Receive,
                SensorMode::Transmit,
            ] {
                let l = t.load(mode);
                m.insert(
                    mode.name().to_string(),
                    json!({ "resistance": num(l.resistance), "current": num(l.current) }),
                );
            }
            Value::Object(m)
        }
        TraceKind::Iv => {
            let s = calibration::load_iv_surface(path)?;
            json!({
                "voltages": s.v_axis().len(),
                "powers": s.p_axis().len(),
                "v_range": [num(s.v_axis()[0]), num(*s.v_axis().last().unwrap())],
                "p_range_dbm": [num(s.p_axis_dbm()[0]), num(*s.p_axis_dbm().last().unwrap())],
            })
        }
        TraceKind::Pae => {
            let c = calibration::load_pae_curve(path)?;
            let pts = c.points();
            json!({
                "points": pts.len(),
                "p_range": [num(pts[0].0), num(pts[pts.len() - 1].0)],
                "pae_range": [num(pts[0].1), num(pts[pts.len() - 1].1)],
            })
        }
    };
    emit(cli, &format!("{v}\n"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::Simulate { scenario } => simulate(&cli, scenario),
        Command::Sweep {
            scenario,
            attenuations,
        } => sweep(&cli, scenario, attenuations),
        Command::Optimize {
            scenario,
            attenuation,
        } => optimize(&cli, scenario, *attenuation),
        Command::Calibrate {
            kind,
            trace,
            capacitance,
        } => calibrate(&cli, *kind, trace, *capacitance),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
