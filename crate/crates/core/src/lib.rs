//! Two-scale simulation of colloid deposition and clogging in a porous medium.
//!
//! The microscale is a periodic unit cell with a circular deposit of radius
//! `r`; [`cell`] solves its corrector problems and [`table`] tabulates the
//! resulting tortuosity over `r`. The macroscale couples Smoluchowski
//! aggregation, diffusion and exchange with the deposits on a square grid
//! ([`stepping`]), driven by [`run`] from a [`scenario::ScenarioConfig`].

// Index loops mirror the stencil formulas; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cell;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod model;
pub mod monitor;
pub mod oracles;
pub mod render;
pub mod run;
pub mod scenario;
pub mod snapshot;
pub mod sparse;
pub mod stepping;
pub mod table;

pub use cell::{cell_tortuosity, solve_cell_problem, tortuosity, TortuosityTensor};
pub use error::{FailureKind, RunError};
pub use geometry::{build_cell_mesh, CellMesh};
pub use grid::{BoundaryConfig, GridSpec, InflowProfile, MacroState};
pub use model::{smoluchowski_rates, ModelParams};
pub use run::{run_scenario, RunSummary, Simulation};
pub use scenario::{preset, preset_bumps, preset_uniform, ScenarioConfig, Scheme};
pub use stepping::{stability_guard, step_explicit, step_picard};
pub use table::{build_table, load_table, save_table, MeshMeta, TortuosityTable};
