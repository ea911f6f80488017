//! Command-line front end.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::{Result, SnakeError};
use crate::export::{to_json, trajectory_csv, SwimSummary};
use crate::gait::{check_window, evaluate_gait, sweep_phase, SwimSetup};
use crate::plot::emit_plots;
use crate::sim::{
    centroid_path, floated_start, horizontal_displacement, run_drop_test, run_swim,
    SETTLED_FORCE, SETTLED_SPEED,
};
use crate::validate;

#[derive(Debug, Parser)]
#[command(name = "soft-snake", version, about = "Soft snake robot swimming on water")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drop the unactuated robot onto the water and report the float.
    Drop(Common),
    /// Swim from the floating equilibrium with one phase offset.
    Swim {
        /// Phase between adjacent modules (rad), e.g. 0.3927 or pi/8.
        #[arg(long, value_parser = parse_phase, allow_hyphen_values = true)]
        dphi: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Forward speed over a list of phase offsets.
    Sweep {
        /// Comma-separated phase offsets (rad); `pi` forms such as 3pi/16
        /// are accepted.
        #[arg(long, value_delimiter = ',', value_parser = parse_phase, allow_hyphen_values = true)]
        grid: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the seeded invariant suite.
    Validate(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Simulated time (s). Drop: drop length. Swim and sweep: swim length.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Seed of the random states in `validate`. Simulations are
    /// deterministic and do not use it.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    pub dump_config: bool,
}

/// Accepts a plain number or `[k][*]pi[/n]`.
pub fn parse_phase(text: &str) -> std::result::Result<f64, String> {
    let t = text.trim().to_ascii_lowercase().replace(' ', "");
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let bad = || format!("`{text}` is not a number or a multiple of pi");
    let (head, tail) = t.split_once("pi").ok_or_else(bad)?;
    let head = head.strip_suffix('*').unwrap_or(head);
    let k = match head {
        "" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let n = match tail {
        "" => 1.0,
        t => t
            .strip_prefix('/')
            .and_then(|d| d.parse::<f64>().ok())
            .ok_or_else(bad)?,
    };
    Ok(k * PI / n)
}

/// Offsets used when `sweep` gets no `--grid`.
pub fn default_grid() -> Vec<f64> {
    vec![0.0, PI / 16.0, PI / 8.0, 3.0 * PI / 16.0, PI / 4.0, PI / 3.0]
}

enum Outcome {
    Done,
    ChecksFailed,
}

pub fn run(cli: Cli) -> ExitCode {
    match dispatch(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load(common: &Common) -> Result<Config> {
    let config = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(d) = common.duration {
        if !(d.is_finite() && d > 0.0) {
            return Err(SnakeError::InvalidParameter {
                name: "duration".into(),
                reason: format!("must be positive, got {d}"),
            });
        }
    }
    Ok(config)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    let common = match &cli.command {
        Command::Drop(c) | Command::Validate(c) => c,
        Command::Swim { common, .. } | Command::Sweep { common, .. } => common,
    };
    let mut config = load(common)?;
    if let Command::Swim { dphi, .. } = &cli.command {
        config.gait.inter_phase = *dphi;
    }
    if common.dump_config {
        print!("{}", config.to_toml());
        return Ok(Outcome::Done);
    }
    match &cli.command {
        Command::Drop(c) => drop_cmd(&config, c),
        Command::Swim { common, .. } => swim_cmd(&config, common),
        Command::Sweep { grid, common } => sweep_cmd(&config, grid, common),
        Command::Validate(c) => validate_cmd(c),
    }
}

fn drop_cmd(config: &Config, common: &Common) -> Result<Outcome> {
    let mut sim = config.sim.clone();
    if let Some(d) = common.duration {
        sim.drop_duration = d;
    }
    let (trajectory, report) = run_drop_test(&config.robot, &config.water, &sim)?;
    let csv = write(&common.out, "drop.csv", &trajectory_csv(&trajectory))?;
    let json = write(&common.out, "float_report.json", &to_json(&report))?;
    let plots = emit_plots(&trajectory, &config.robot, &config.water, &common.out, "drop", None)?;

    println!("base z {:.5} m, deepest skin point {:.5} m", report.base_z, report.min_skin_z);
    println!(
        "support {:.4} N for weight {:.4} N, {} of {} skin points wet",
        report.contact_force_z,
        report.weight,
        report.active_points.len(),
        config.water.grid().len()
    );
    match report.settle_time {
        Some(t) => println!("settled at t = {t:.3} s"),
        None => println!(
            "not settled: needs |zdot| < {SETTLED_SPEED} m/s and support within {:.0} % of weight",
            SETTLED_FORCE * 100.0
        ),
    }
    for w in &trajectory.warnings {
        println!("warning: {w}");
    }
    println!("wrote {}", csv.display());
    println!("wrote {}", json.display());
    for p in plots {
        println!("wrote {}", p.display());
    }
    Ok(Outcome::Done)
}

fn swim_cmd(config: &Config, common: &Common) -> Result<Outcome> {
    let gait = config.gait;
    let duration = common
        .duration
        .unwrap_or(config.sim.swim_periods * gait.period());
    let settle = config.sim.settle_periods * gait.period();
    let start = floated_start(&config.robot, &config.water, &config.sim)?;
    let setup = SwimSetup {
        start: &start,
        params: &config.robot,
        water: &config.water,
        settings: &config.sim,
    };

    // Short swims get no speed window.
    let (trajectory, summary) = if settle >= gait.period() - 1e-9 && duration > settle {
        let r = evaluate_gait(&gait, duration, settle, setup)?;
        let summary = SwimSummary {
            dphi_rad: gait.inter_phase,
            duration_s: duration,
            displacement_m: r.total_displacement,
            settle_s: Some(settle),
            window_displacement_m: Some(r.displacement),
            speed_mps: Some(r.speed),
            warnings: r.trajectory.warnings.clone(),
        };
        (r.trajectory, summary)
    } else {
        let t = run_swim(&gait, duration, start, &config.robot, &config.water, &config.sim)?;
        let path = centroid_path(&t, &config.robot)?;
        let summary = SwimSummary {
            dphi_rad: gait.inter_phase,
            duration_s: duration,
            displacement_m: horizontal_displacement(&path, 0, path.len() - 1),
            settle_s: None,
            window_displacement_m: None,
            speed_mps: None,
            warnings: t.warnings.clone(),
        };
        (t, summary)
    };

    let csv = write(&common.out, "swim.csv", &trajectory_csv(&trajectory))?;
    let json = write(&common.out, "swim_summary.json", &to_json(&summary))?;
    let plots = emit_plots(&trajectory, &config.robot, &config.water, &common.out, "swim", None)?;
    println!(
        "dphi {:.6} rad, {:.2} s: displacement {:.5} m",
        summary.dphi_rad, duration, summary.displacement_m
    );
    if let Some(v) = summary.speed_mps {
        println!("speed {v:.6} m/s after {settle:.2} s");
    }
    for w in &summary.warnings {
        println!("warning: {w}");
    }
    println!("wrote {}", csv.display());
    println!("wrote {}", json.display());
    for p in plots {
        println!("wrote {}", p.display());
    }
    Ok(Outcome::Done)
}

fn sweep_cmd(config: &Config, grid: &[f64], common: &Common) -> Result<Outcome> {
    let grid = if grid.is_empty() { default_grid() } else { grid.to_vec() };
    let period = config.gait.period();
    let duration = common.duration.unwrap_or(config.sim.swim_periods * period);
    let settle = config.sim.settle_periods * period;
    check_window(&config.gait, duration, settle)?;
    let start = floated_start(&config.robot, &config.water, &config.sim)?;
    let setup = SwimSetup {
        start: &start,
        params: &config.robot,
        water: &config.water,
        settings: &config.sim,
    };
    let table = sweep_phase(&config.gait, &grid, duration, settle, setup)?;
    let csv = write(&common.out, "sweep.csv", &table.to_csv())?;

    println!("{:>12} {:>14} {:>14}  status", "dphi_rad", "speed_mps", "displacement_m");
    for cell in &table.cells {
        match &cell.outcome {
            Ok(v) => println!(
                "{:>12.6} {:>14.6e} {:>14.6e}  ok",
                cell.inter_phase, v.speed, v.displacement
            ),
            Err(e) => println!("{:>12.6} {:>14} {:>14}  failed: {e}", cell.inter_phase, "", ""),
        }
    }
    match table.best_cell() {
        Some(best) => println!("fastest dphi {:.6} rad", best.inter_phase),
        None => println!("no cell completed"),
    }
    println!("wrote {}", csv.display());
    Ok(Outcome::Done)
}

fn validate_cmd(common: &Common) -> Result<Outcome> {
    let checks = validate::run_all(common.seed)?;
    let mut failed = 0;
    for c in &checks {
        println!("{c}");
        failed += usize::from(!c.passed);
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    Ok(if failed == 0 {
        Outcome::Done
    } else {
        Outcome::ChecksFailed
    })
}
