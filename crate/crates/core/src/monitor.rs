//! Per-step diagnostics and checks against the a-priori bounds.

use std::fmt::Write as _;

use crate::grid::{GridSpec, MacroState};
use crate::model::ModelParams;
use crate::oracles::AnalysisBox;
use crate::stepping::Conductivity;

/// Absolute slack on every bound check.
pub const MONITOR_TOL: f64 = 1e-8;

/// Upper bound of `2 pi r / (1 - pi r^2)` on `[0, 1/2]`.
pub const EXCHANGE_RATIO_BOUND: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub clogged_fraction: f64,
    /// `sum_i i int U_i`.
    pub moment: f64,
    /// Some `|U_i|` exceeds the budget `M`.
    pub linf_violation: bool,
    /// Some `U_i` left its reaction envelope.
    pub envelope_violation: bool,
    /// Some radius left the corridor while `t <= s_max`.
    pub corridor_violation: bool,
    /// Some unclogged cell has a non-positive diffusion eigenvalue.
    pub spd_violation: bool,
    pub picard_iterations: Option<usize>,
}

impl DiagnosticsRecord {
    pub fn any_violation(&self) -> bool {
        self.linf_violation || self.envelope_violation || self.corridor_violation || self.spd_violation
    }

    pub fn violation_summary(&self) -> String {
        let mut parts = Vec::new();
        if self.linf_violation {
            parts.push("sup-norm budget exceeded");
        }
        if self.envelope_violation {
            parts.push("concentration outside reaction envelope");
        }
        if self.corridor_violation {
            parts.push("radius left its corridor inside the feasible horizon");
        }
        if self.spd_violation {
            parts.push("diffusion matrix not positive definite");
        }
        parts.join("; ")
    }

    pub fn csv_header(n_species: usize) -> String {
        let mut s = String::from("t");
        for i in 1..=n_species {
            let _ = write!(s, ",u{i}_min,u{i}_max");
        }
        s.push_str(",r_min,r_max,clogged_fraction,moment,linf_violation,envelope_violation,corridor_violation,spd_violation,picard_iterations");
        s
    }

    pub fn csv_row(&self) -> String {
        let mut s = format!("{}", self.t);
        for (lo, hi) in self.u_min.iter().zip(&self.u_max) {
            let _ = write!(s, ",{lo:e},{hi:e}");
        }
        let flag = |b: bool| if b { 1 } else { 0 };
        let _ = write!(
            s,
            ",{:e},{:e},{},{:e},{},{},{},{},{}",
            self.r_min,
            self.r_max,
            self.clogged_fraction,
            self.moment,
            flag(self.linf_violation),
            flag(self.envelope_violation),
            flag(self.corridor_violation),
            flag(self.spd_violation),
            self.picard_iterations.map_or(String::new(), |k| k.to_string())
        );
        s
    }
}

/// Reaction envelope: `(sup F_+, sup F_-)` per species at time `t`.
pub fn reaction_envelope(params: &ModelParams, bx: &AnalysisBox, t: f64) -> Vec<(f64, f64)> {
    let n = params.n_species();
    let gamma = params.gamma.iter().flatten().copied().fold(0.0, f64::max);
    let growth = bx.m * bx.deposit_growth(t);
    (0..n)
        .map(|k| {
            let size = (k + 1) as f64;
            let agg = bx.m * bx.m * gamma * (n as f64 - (size + 1.0) / 2.0);
            let up = agg + EXCHANGE_RATIO_BOUND * (params.a[k] * bx.m + params.beta[k] * (bx.sup_v0 + growth));
            let down = agg + EXCHANGE_RATIO_BOUND * (params.a[k] * bx.m + params.beta[k] * growth);
            (up, down)
        })
        .collect()
}

/// Evaluates the bound checks on `state`.
///
/// `u_ceiling` is the maximum-principle level of the data (the larger of the
/// initial sup and the boundary data divided by the Robin coefficient).
pub fn monitor_step(
    state: &MacroState,
    params: &ModelParams,
    bx: &AnalysisBox,
    grid: &GridSpec,
    cond: &Conductivity,
    u_ceiling: f64,
) -> DiagnosticsRecord {
    let n = params.n_species();
    let envelope = reaction_envelope(params, bx, state.t);
    let mut u_min = Vec::with_capacity(n);
    let mut u_max = Vec::with_capacity(n);
    let mut linf = false;
    let mut env = false;
    for (k, u) in state.u.iter().enumerate() {
        let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        linf |= lo.abs().max(hi.abs()) > bx.m + MONITOR_TOL;
        let (up, down) = envelope[k];
        env |= lo < -state.t * down - MONITOR_TOL || hi > u_ceiling + state.t * up + MONITOR_TOL;
        u_min.push(lo);
        u_max.push(hi);
    }
    let r_min = state.r.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = state.r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (c_lo, c_hi) = bx.corridor();
    let corridor = state.t <= bx.s_max && (r_min < c_lo - MONITOR_TOL || r_max > c_hi + MONITOR_TOL);
    let spd = (0..grid.len())
        .filter(|&p| !state.clogged[p])
        .any(|p| params.d.iter().any(|&d| d * cond.k1[p].min(cond.k2[p]) <= 0.0 && d > 0.0));
    let moment = state.u.iter().enumerate().map(|(i, u)| (i + 1) as f64 * grid.integrate(u)).sum();
    DiagnosticsRecord {
        t: state.t,
        u_min,
        u_max,
        r_min,
        r_max,
        clogged_fraction: state.clogged_fraction(),
        moment,
        linf_violation: linf,
        envelope_violation: env,
        corridor_violation: corridor,
        spd_violation: spd,
        picard_iterations: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::TortuosityTensor;
    use crate::table::{MeshMeta, TortuosityTable};

    fn setup() -> (ModelParams, GridSpec, TortuosityTable) {
        let p = ModelParams {
            d: vec![0.5, 0.5],
            a: vec![1.0, 1.0],
            alpha_v: vec![1.0, 1.0],
            beta: vec![1.0, 1.0],
            gamma: vec![vec![1.0; 2]; 2],
            alpha_r: 0.1,
            b_r: 0.5,
            t0: 1.0,
            domain_area: 1.0,
            kappa: None,
        };
        let table = TortuosityTable {
            radii: vec![0.05, 0.5],
            tensors: vec![TortuosityTensor([[0.9, 0.0], [0.0, 0.9]]), TortuosityTensor::ZERO],
            mesh_meta: MeshMeta { n_theta: 8, n_rho: 2 },
            clog_anchor: true,
        };
        (p, GridSpec::new(5, 1e-3, 1.0).unwrap(), table)
    }

    fn zero_state(grid: &GridSpec) -> MacroState {
        let n = grid.len();
        MacroState { t: 0.0, u: vec![vec![0.0; n]; 2], v: vec![0.0; n], r: vec![0.1; n], clogged: vec![false; n] }
    }

    #[test]
    fn fresh_state_is_clean() {
        let (p, grid, table) = setup();
        let s = zero_state(&grid);
        let bx = AnalysisBox::new(1.0, 0.4, 0.05, &s.r, &s.v, &p).with_horizon(p.alpha_r).unwrap();
        let cond = Conductivity::from_radii(&s.r, &table, 1.0);
        let rec = monitor_step(&s, &p, &bx, &grid, &cond, 0.0);
        assert!(!rec.any_violation(), "{rec:?}");
        assert_eq!(rec.moment, 0.0);
    }

    #[test]
    fn forced_violations_are_flagged() {
        let (p, grid, table) = setup();
        let mut s = zero_state(&grid);
        let bx = AnalysisBox::new(1.0, 0.4, 0.05, &s.r, &s.v, &p).with_horizon(p.alpha_r).unwrap();
        s.u[0][3] = 2.0;
        s.r[4] = 0.01;
        let cond = Conductivity::from_radii(&s.r, &table, 1.0);
        let rec = monitor_step(&s, &p, &bx, &grid, &cond, 0.0);
        assert!(rec.linf_violation && rec.envelope_violation && rec.corridor_violation);
        assert!(!rec.spd_violation);
        assert!(rec.violation_summary().contains("budget"));
    }

    #[test]
    fn exchange_bound_covers_clogged_ratio() {
        assert!(crate::model::exchange_ratio(crate::table::CLOG_RADIUS) <= EXCHANGE_RATIO_BOUND);
    }

    #[test]
    fn csv_row_matches_header() {
        let (p, grid, table) = setup();
        let s = zero_state(&grid);
        let bx = AnalysisBox::new(1.0, 0.4, 0.05, &s.r, &s.v, &p).with_horizon(p.alpha_r).unwrap();
        let cond = Conductivity::from_radii(&s.r, &table, 1.0);
        let mut rec = monitor_step(&s, &p, &bx, &grid, &cond, 0.0);
        rec.picard_iterations = Some(3);
        let cols = DiagnosticsRecord::csv_header(2).split(',').count();
        assert_eq!(rec.csv_row().split(',').count(), cols);
        assert!(rec.csv_row().ends_with(",3"));
    }
}
