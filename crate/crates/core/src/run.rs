//! Orchestration of a scenario run: time loop, monitor, snapshots and
//! diagnostics.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::error::{ConfigError, RunError};
use crate::grid::{BoundaryConfig, GridSpec, MacroState};
use crate::model::ModelParams;
use crate::monitor::{monitor_step, DiagnosticsRecord};
use crate::oracles::AnalysisBox;
use crate::render::{write_heatmap, Palette};
use crate::scenario::{MonitorPolicy, ScenarioConfig, Scheme};
use crate::snapshot::format_snapshot;
use crate::stepping::{stability_guard, step_explicit, step_picard, Conductivity};
use crate::table::TortuosityTable;

/// Stepper over a configured scenario.
pub struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    table: &'a TortuosityTable,
    grid: GridSpec,
    state: MacroState,
    steps_done: usize,
    n_steps: usize,
    analysis: AnalysisBox,
    u_ceiling: f64,
}

impl<'a> Simulation<'a> {
    pub fn new(cfg: &'a ScenarioConfig, table: &'a TortuosityTable) -> Result<Self, RunError> {
        cfg.validate()?;
        let grid = cfg.grid_spec()?;
        if cfg.scheme == Scheme::Explicit {
            let limit = stability_guard(&grid, &cfg.model, table);
            if grid.dt > limit * (1.0 + 1e-12) {
                return Err(crate::error::StepError::Stability { dt: grid.dt, limit }.into());
            }
        }
        let state = cfg.initial_state()?;
        let (analysis, u_ceiling) = analysis_box(cfg, &grid, &state)?;
        Ok(Simulation { cfg, table, grid, state, steps_done: 0, n_steps: grid.step_count(), analysis, u_ceiling })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn state(&self) -> &MacroState {
        &self.state
    }

    pub fn analysis_box(&self) -> &AnalysisBox {
        &self.analysis
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    pub fn total_steps(&self) -> usize {
        self.n_steps
    }

    pub fn is_finished(&self) -> bool {
        self.steps_done >= self.n_steps
    }

    pub fn conductivity(&self) -> Conductivity {
        Conductivity::from_radii(&self.state.r, self.table, self.cfg.model.domain_area)
    }

    /// Diagnostics of the current state.
    pub fn diagnose(&self) -> DiagnosticsRecord {
        monitor_step(&self.state, &self.cfg.model, &self.analysis, &self.grid, &self.conductivity(), self.u_ceiling)
    }

    /// Advances one step; the last step is shortened to land on `t_final`.
    pub fn step(&mut self) -> Result<DiagnosticsRecord, RunError> {
        let k = self.steps_done;
        let last = k + 1 == self.n_steps;
        let mut grid = self.grid;
        if last {
            grid.dt = self.grid.t_final - k as f64 * self.grid.dt;
        }
        let params: &ModelParams = &self.cfg.model;
        let bc: &BoundaryConfig = &self.cfg.boundary;
        let (mut next, iterations) = match self.cfg.scheme {
            Scheme::Explicit => (step_explicit(&self.state, params, &grid, self.table, bc)?, None),
            Scheme::Picard => {
                let out = step_picard(
                    &self.state,
                    params,
                    &grid,
                    self.table,
                    bc,
                    self.cfg.picard.tol,
                    self.cfg.picard.max_iter,
                )?;
                (out.state, Some(out.iterations))
            }
        };
        next.t = if last { self.grid.t_final } else { (k + 1) as f64 * self.grid.dt };
        self.state = next;
        self.steps_done += 1;
        let mut record = self.diagnose();
        record.picard_iterations = iterations;
        if record.any_violation() && self.cfg.monitor.policy == MonitorPolicy::Abort {
            return Err(RunError::MonitorAbort { t: record.t, reason: record.violation_summary() });
        }
        Ok(record)
    }
}

/// Analysis box of a scenario and the maximum-principle ceiling for `U`.
fn analysis_box(cfg: &ScenarioConfig, grid: &GridSpec, state: &MacroState) -> Result<(AnalysisBox, f64), RunError> {
    let sup_u0 = state.u.iter().flatten().copied().fold(0.0, f64::max);
    let mut sup_g: f64 = 0.0;
    for s in 0..cfg.model.n_species() {
        for i in 0..grid.points {
            sup_g = sup_g.max(cfg.boundary.data(s, i as f64 * grid.dx, 0.0, cfg.model.t0));
        }
    }
    let boundary_level = if cfg.model.b_r > 0.0 { sup_g / cfg.model.b_r } else if sup_g > 0.0 { f64::INFINITY } else { 0.0 };
    let u_ceiling = sup_u0.max(boundary_level);
    let sup_r0 = state.r.iter().copied().fold(0.0, f64::max);
    let inf_r0 = state.r.iter().copied().fold(f64::INFINITY, f64::min);
    let m = cfg.monitor.m_budget.unwrap_or(u_ceiling);
    let eps1 = cfg.monitor.eps1.unwrap_or(0.5 * (1.0 - 2.0 * sup_r0));
    let eps2 = cfg.monitor.eps2.unwrap_or(0.5 * inf_r0);
    let bx = AnalysisBox::new(m, eps1, eps2, &state.r, &state.v, &cfg.model);
    let bx = bx
        .with_horizon(cfg.model.alpha_r)
        .map_err(|e| ConfigError::Invalid(format!("analysis box: {e}")))?;
    Ok((bx, u_ceiling))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub final_state: MacroState,
    pub clogged_fraction: f64,
    pub max_r: f64,
    pub wall_time: Duration,
    pub warnings: usize,
    pub first_warning: Option<(f64, String)>,
    pub feasible_horizon: f64,
    pub files: Vec<PathBuf>,
}

/// Field names written at every snapshot time.
pub fn snapshot_fields(n_species: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..=n_species).map(|i| format!("u{i}")).collect();
    names.extend(["v".to_string(), "r".to_string(), "d11".to_string()]);
    names
}

fn field_values(sim: &Simulation, name: &str) -> Vec<f64> {
    let state = sim.state();
    match name {
        "v" => state.v.clone(),
        "r" => state.r.clone(),
        "d11" => {
            let d = sim.cfg.model.d[0];
            sim.conductivity().k1.iter().map(|k| d * k).collect()
        }
        _ => {
            let i: usize = name[1..].parse().expect("species field name");
            state.u[i - 1].clone()
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Runs `cfg` to its final time. With `out_dir`, writes the effective
/// configuration, snapshots (CSV and optionally SVG) and per-step diagnostics.
pub fn run_scenario(cfg: &ScenarioConfig, table: &TortuosityTable, out_dir: Option<&Path>) -> Result<RunSummary, RunError> {
    let started = Instant::now();
    let mut sim = Simulation::new(cfg, table)?;
    let grid = *sim.grid();
    let mut files = Vec::new();
    let mut diagnostics = None;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let cfg_path = dir.join("config.json");
        fs::write(&cfg_path, cfg.to_json() + "\n").map_err(io_err(&cfg_path))?;
        files.push(cfg_path);
        let diag_path = dir.join("diagnostics.csv");
        let mut w = BufWriter::new(File::create(&diag_path).map_err(io_err(&diag_path))?);
        writeln!(w, "{}", DiagnosticsRecord::csv_header(cfg.model.n_species())).map_err(io_err(&diag_path))?;
        diagnostics = Some((w, diag_path));
    }

    let mut pending: Vec<(usize, f64)> = cfg
        .output
        .snapshot_times
        .iter()
        .map(|&t| (((t / grid.dt).round() as usize).min(sim.total_steps()), t))
        .collect();
    pending.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pending.dedup_by_key(|p| p.0);
    let mut next_snapshot = 0;

    let mut warnings = 0;
    let mut first_warning = None;
    loop {
        while next_snapshot < pending.len() && pending[next_snapshot].0 == sim.steps_done() {
            if let Some(dir) = out_dir {
                write_snapshot_set(&sim, cfg, dir, &mut files)?;
            }
            next_snapshot += 1;
        }
        if sim.is_finished() {
            break;
        }
        let record = sim.step()?;
        if record.any_violation() {
            warnings += 1;
            if first_warning.is_none() {
                first_warning = Some((record.t, record.violation_summary()));
            }
        }
        if let Some((w, path)) = diagnostics.as_mut() {
            writeln!(w, "{}", record.csv_row()).map_err(io_err(path))?;
        }
    }
    if let Some((mut w, path)) = diagnostics {
        w.flush().map_err(io_err(&path))?;
        files.push(path);
    }
    let state = sim.state().clone();
    Ok(RunSummary {
        steps: sim.steps_done(),
        clogged_fraction: state.clogged_fraction(),
        max_r: state.r.iter().copied().fold(0.0, f64::max),
        final_state: state,
        wall_time: started.elapsed(),
        warnings,
        first_warning,
        feasible_horizon: sim.analysis_box().s_max,
        files,
    })
}

fn write_snapshot_set(sim: &Simulation, cfg: &ScenarioConfig, dir: &Path, files: &mut Vec<PathBuf>) -> Result<(), RunError> {
    let t = sim.state().t;
    let points = sim.grid().points;
    for name in snapshot_fields(cfg.model.n_species()) {
        let values = field_values(sim, &name);
        let stem = format!("{name}_t{t:.4}");
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&csv, format_snapshot(t, &name, points, &values)).map_err(io_err(&csv))?;
        files.push(csv);
        if cfg.output.svg {
            let svg = dir.join(format!("{stem}.svg"));
            write_heatmap(&svg, &values, points, Palette::Viridis, &format!("{name} t={t}"))?;
            files.push(svg);
        }
    }
    Ok(())
}
