//! `clogsim`: build tortuosity tables, run scenarios and render snapshots.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O error.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use clogsim::error::ConfigError;
use clogsim::render::{write_heatmap, Palette};
use clogsim::scenario::MonitorPolicy;
use clogsim::snapshot::read_snapshot;
use clogsim::table::{load_table_checked, DEFAULT_DELTA_R, DEFAULT_N_RHO, DEFAULT_N_THETA, DEFAULT_R_MIN};
use clogsim::{build_table, load_table, preset, run_scenario, save_table, FailureKind, MeshMeta, RunError, ScenarioConfig, Scheme, TortuosityTable};

#[derive(Parser)]
#[command(name = "clogsim", version, about = "Two-scale porous-media clogging simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problem over a radius partition and save the table.
    BuildTable {
        #[arg(long, default_value_t = DEFAULT_R_MIN)]
        r_min: f64,
        #[arg(long, default_value_t = DEFAULT_DELTA_R)]
        dr: f64,
        #[arg(long, default_value_t = DEFAULT_N_THETA)]
        ntheta: usize,
        #[arg(long, default_value_t = DEFAULT_N_RHO)]
        nrho: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario configuration and write snapshots and diagnostics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Precomputed table; built from the config settings when absent.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long, value_enum)]
        monitor: Option<MonitorArg>,
    },
    /// Print or dump a built-in scenario.
    Preset {
        #[arg(long)]
        name: String,
        /// Write the configuration as JSON, to FILE or to stdout.
        #[arg(long, value_name = "FILE", num_args = 0..=1)]
        dump: Option<Option<PathBuf>>,
    },
    /// Check a saved table against its invariants.
    Validate {
        #[arg(long)]
        table: PathBuf,
    },
    /// Render a snapshot CSV as an SVG heatmap.
    Render {
        #[arg(long)]
        field_csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = PaletteArg::Viridis)]
        palette: PaletteArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Explicit,
    Picard,
}

#[derive(Clone, Copy, ValueEnum)]
enum MonitorArg {
    Warn,
    Abort,
}

#[derive(Clone, Copy, ValueEnum)]
enum PaletteArg {
    Viridis,
    Grayscale,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(err.kind()))
        }
    }
}

fn exit_code(kind: FailureKind) -> u8 {
    match kind {
        FailureKind::Config => 2,
        FailureKind::Numerical => 3,
        FailureKind::Io => 4,
    }
}

fn dispatch(command: Command) -> Result<(), RunError> {
    match command {
        Command::BuildTable { r_min, dr, ntheta, nrho, out } => {
            let table = build_table(r_min, dr, MeshMeta { n_theta: ntheta, n_rho: nrho })?;
            save_table(&table, &out)?;
            println!("wrote {} entries to {}", table.len(), out.display());
            Ok(())
        }
        Command::Run { config, table, out_dir, scheme, monitor } => run(&config, table.as_deref(), &out_dir, scheme, monitor),
        Command::Preset { name, dump } => {
            let cfg = preset(&name)
                .ok_or_else(|| ConfigError::Invalid(format!("unknown preset {name:?} (expected uniform or bumps)")))?;
            match dump {
                Some(Some(path)) => cfg.save(&path)?,
                Some(None) => println!("{}", cfg.to_json()),
                None => describe(&cfg)?,
            }
            Ok(())
        }
        Command::Validate { table } => {
            let t = load_table(&table)?;
            t.validate()?;
            println!(
                "ok: {} entries on [{}, {}], mesh {}x{}, Lipschitz constant {:.4}",
                t.len(),
                t.radii[0],
                t.radii[t.len() - 1],
                t.mesh_meta.n_theta,
                t.mesh_meta.n_rho,
                t.lipschitz_constant()
            );
            Ok(())
        }
        Command::Render { field_csv, out, palette } => {
            let snap = read_snapshot(&field_csv)?;
            let palette = match palette {
                PaletteArg::Viridis => Palette::Viridis,
                PaletteArg::Grayscale => Palette::Grayscale,
            };
            let title = format!("{} t={}", snap.field, snap.t);
            write_heatmap(&out, &snap.values, snap.points, palette, &title)?;
            Ok(())
        }
    }
}

fn describe(cfg: &ScenarioConfig) -> Result<(), RunError> {
    let grid = cfg.grid_spec()?;
    println!("{}: {} species, {}x{} grid, dx={}, dt={:e}, T={}", cfg.name, cfg.model.n_species(), grid.points, grid.points, grid.dx, grid.dt, grid.t_final);
    println!("scheme {:?}, alpha_r {}, t0 {}", cfg.scheme, cfg.model.alpha_r, cfg.model.t0);
    Ok(())
}

fn run(
    config: &Path,
    table_path: Option<&Path>,
    out_dir: &Path,
    scheme: Option<SchemeArg>,
    monitor: Option<MonitorArg>,
) -> Result<(), RunError> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(s) = scheme {
        cfg.scheme = match s {
            SchemeArg::Explicit => Scheme::Explicit,
            SchemeArg::Picard => Scheme::Picard,
        };
    }
    if let Some(m) = monitor {
        cfg.monitor.policy = match m {
            MonitorArg::Warn => MonitorPolicy::Warn,
            MonitorArg::Abort => MonitorPolicy::Abort,
        };
    }
    cfg.validate()?;
    let table = load_or_build(&cfg, table_path)?;
    let summary = run_scenario(&cfg, &table, Some(out_dir))?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "scenario {}: {} steps in {:.2?}", cfg.name, summary.steps, summary.wall_time);
    let _ = writeln!(out, "clogged fraction {:.4}, max radius {:.4}", summary.clogged_fraction, summary.max_r);
    let _ = writeln!(out, "feasible horizon {:.4e}", summary.feasible_horizon);
    match &summary.first_warning {
        Some((t, reason)) => {
            let _ = writeln!(out, "monitor: {} flagged steps, first at t={t}: {reason}", summary.warnings);
        }
        None => {
            let _ = writeln!(out, "monitor: no violations");
        }
    }
    let _ = writeln!(out, "wrote {} files to {}", summary.files.len(), out_dir.display());
    Ok(())
}

fn load_or_build(cfg: &ScenarioConfig, path: Option<&Path>) -> Result<TortuosityTable, RunError> {
    let expected = cfg.table.mesh_meta();
    match path {
        Some(p) => {
            let (table, mismatch) = load_table_checked(p, expected)?;
            if mismatch {
                eprintln!(
                    "warning: table mesh {}x{} differs from the configured {}x{}",
                    table.mesh_meta.n_theta, table.mesh_meta.n_rho, expected.n_theta, expected.n_rho
                );
            }
            Ok(table)
        }
        None => Ok(build_table(cfg.table.r_min, cfg.table.delta_r, expected)?),
    }
}
