use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rabi_stark::exec::{self, ExecMode};
use rabi_stark::model::{branch_critical_point, Branch};
use rabi_stark::oracle::{analytic_observables, level_observables, oracle_level_data};
use rabi_stark::runner::{self, load_config, read_series, SweepConfig};
use rabi_stark::scaling::fit_points;
use rabi_stark::Result;

#[derive(Parser)]
#[command(
    name = "rabi-stark",
    version,
    about = "Rabi-Stark criticality: sweeps, fits, collapses and exponents"
)]
struct Cli {
    /// Override a config leaf, e.g. `--set model.delta=0.25` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Run every grid point on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate observables on a grid and write CSV files.
    Sweep { config: PathBuf },
    /// Power-law fit of a series CSV.
    Fit {
        input: PathBuf,
        /// Fit window `lo:hi` in the fitted abscissa.
        #[arg(long, value_parser = parse_window)]
        window: (f64, f64),
        /// Fit against `t = |1 - g/g_c|` instead of the raw abscissa.
        #[arg(long)]
        g_c: Option<f64>,
    },
    /// Data collapse of a multi-size sweep.
    Collapse { config: PathBuf },
    /// Fidelity-susceptibility peak per size.
    Peak { config: PathBuf },
    /// Ground-energy derivatives along the coupling grid.
    Derivatives { config: PathBuf },
    /// Closed-form low-lying levels at U = 1.
    Oracle {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        g: f64,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Critical-exponent table.
    Table1 { config: PathBuf },
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok((lo, hi))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load(path: &Path, cli: &Cli) -> Result<(SweepConfig, ExecMode)> {
    let cfg = load_config(path, &cli.overrides)?;
    exec::configure_workers(cfg.workers);
    let mode = if cli.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::default()
    };
    Ok((cfg, mode))
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Sweep { config } => {
            let (cfg, mode) = load(config, cli)?;
            let out = runner::run_sweep(&cfg, mode)?;
            for f in &out.files {
                println!("{}", f.display());
            }
            println!("manifest: {}", out.manifest.display());
            println!("computed {} points, {} from cache", out.cache_misses, out.cache_hits);
            let failed = out.failure_count();
            if failed > 0 {
                eprintln!("{failed} points failed; see the manifest");
            }
            Ok(failed == 0)
        }
        Command::Fit { input, window, g_c } => {
            let rows = read_series(input)?;
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| match g_c {
                    Some(gc) => ((1.0 - r.abscissa / gc).abs(), r.value.abs()),
                    None => (r.abscissa, r.value),
                })
                .collect();
            print_json(&fit_points(&pts, *window)?)?;
            Ok(true)
        }
        Command::Collapse { config } => {
            let (cfg, mode) = load(config, cli)?;
            let report = runner::run_collapse(&cfg, mode)?;
            print_json(&report)?;
            Ok(true)
        }
        Command::Peak { config } => {
            let (cfg, mode) = load(config, cli)?;
            let peaks = runner::run_peaks(&cfg, &runner::cached_evaluator(&cfg), mode)?;
            runner::write_atomic(
                &cfg.output_dir.join("peaks.json"),
                &serde_json::to_string_pretty(&peaks)?,
            )?;
            print_json(&peaks)?;
            Ok(true)
        }
        Command::Derivatives { config } => {
            let (cfg, mode) = load(config, cli)?;
            for (size, curve) in runner::run_derivatives(&cfg, mode)? {
                let label = size.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
                match curve.d2_minimum() {
                    Some((g, d2)) => println!(
                        "size {label}: n_tr {} min d2E0/dg2 = {d2:.6e} at g = {g:.6}",
                        curve.n_tr
                    ),
                    None => println!("size {label}: grid too short for a second derivative"),
                }
            }
            Ok(true)
        }
        Command::Oracle { delta, g, levels } => {
            let rows = (0..*levels)
                .map(|n| Ok((oracle_level_data(*delta, *g, n)?, level_observables(*delta, *g, n)?)))
                .collect::<Result<Vec<_>>>()?;
            println!(
                "{:>3} {:>20} {:>14} {:>14} {:>12} {:>12} {:>12} {:>12} {:>14} {:>12}",
                "n", "energy", "depth", "chi", "r", "c_n", "d_n", "norm", "mean_photon", "delta_x"
            );
            for (l, o) in rows {
                println!(
                    "{:>3} {:>20.14} {:>14.6e} {:>14.6e} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>14.6} {:>12.6}",
                    l.n, l.energy, l.depth, l.chi, l.r, l.c_n, l.d_n, l.norm, o.mean_photon, o.delta_x
                );
            }
            let lambda = g / branch_critical_point(*delta, 1.0, Branch::Plus, 0.0)?.g_c;
            if lambda > 0.0 && lambda < 1.0 {
                let a = analytic_observables(*delta, lambda, 0)?;
                println!("lambda = {lambda:.6}: {}", serde_json::to_string(&a)?);
            }
            Ok(true)
        }
        Command::Table1 { config } => {
            let (cfg, mode) = load(config, cli)?;
            let table = runner::run_table(&cfg, mode)?;
            print!("{}", table.render());
            Ok(!table.has_errors())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
