//! Time stepping of the coupled macroscopic system.
//!
//! Diffusion uses a flux-form five-point stencil with arithmetic-mean edge
//! diffusivities. It is written in trapezoid-weighted form
//! `W du/dt = L u + s`, where `L` is symmetric negative semidefinite, edges
//! on the boundary carry a factor `1/2`, and the Robin edge `x2 = 0`
//! contributes `-gain b_r u` to `L` and `gain g` to `s`. Dividing by `W`
//! reproduces the centred ghost-node closure on every edge.

use std::f64::consts::PI;

use crate::cell::porosity;
use crate::error::StepError;
use crate::grid::{BoundaryConfig, GridSpec, MacroState};
use crate::model::{advance_radius, exchange_term, smoluchowski_rates_into, ModelParams, R_FLOOR};
use crate::sparse::pcg;
use crate::table::{TortuosityTable, CLOG_RADIUS};

pub const STABILITY_SAFETY: f64 = 0.95;
/// Relative residual of the implicit diffusion solves.
pub const LINEAR_TOL: f64 = 1e-10;

/// Largest explicit time step admitted for this grid, model and table.
pub fn stability_guard(grid: &GridSpec, params: &ModelParams, table: &TortuosityTable) -> f64 {
    let d_max = params.max_d() * table.max_phi_tau11(params.domain_area);
    if d_max <= 0.0 {
        return f64::INFINITY;
    }
    STABILITY_SAFETY * grid.dx * grid.dx / (4.0 * d_max)
}

/// Per-node `phi tau11` and `phi tau22`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conductivity {
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
}

impl Conductivity {
    pub fn from_radii(r: &[f64], table: &TortuosityTable, domain_area: f64) -> Self {
        let mut k1 = Vec::with_capacity(r.len());
        let mut k2 = Vec::with_capacity(r.len());
        for &rp in r {
            let tau = table.interpolate(rp);
            let phi = porosity(rp, domain_area);
            k1.push(phi * tau.0[0][0]);
            k2.push(phi * tau.0[1][1]);
        }
        Conductivity { k1, k2 }
    }

    /// Effective diffusion matrix of species with diffusivity `d` at node `p`.
    pub fn diffusion_matrix(&self, p: usize, d: f64) -> [[f64; 2]; 2] {
        [[d * self.k1[p], 0.0], [0.0, d * self.k2[p]]]
    }
}

/// Weighted diffusion operator of one species.
pub struct Stencil<'a> {
    grid: &'a GridSpec,
    cond: &'a Conductivity,
    d: f64,
    /// Robin gain per node of the `x2 = 0` edge.
    gain: Vec<f64>,
    b_r: f64,
}

impl<'a> Stencil<'a> {
    pub fn new(grid: &'a GridSpec, cond: &'a Conductivity, d: f64, b_r: f64) -> Self {
        let m = grid.points;
        let gain = (0..m)
            .map(|i| {
                let share = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
                let (p, q) = (grid.index(i, 0), grid.index(i, 1));
                share * d * 0.5 * (cond.k2[p] + cond.k2[q]) / grid.dx
            })
            .collect();
        Stencil { grid, cond, d, gain, b_r }
    }

    fn edge_share(&self, k: usize) -> f64 {
        if k == 0 || k == self.grid.points - 1 {
            0.5
        } else {
            1.0
        }
    }

    /// `out = L u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let m = self.grid.points;
        let inv_dx2 = 1.0 / (self.grid.dx * self.grid.dx);
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..m {
            let share = self.edge_share(j) * self.d * 0.5 * inv_dx2;
            for i in 0..m - 1 {
                let p = j * m + i;
                let c = share * (self.cond.k1[p] + self.cond.k1[p + 1]);
                let flux = c * (u[p + 1] - u[p]);
                out[p] += flux;
                out[p + 1] -= flux;
            }
        }
        for j in 0..m - 1 {
            for i in 0..m {
                let p = j * m + i;
                let q = p + m;
                let c = self.edge_share(i) * self.d * 0.5 * inv_dx2 * (self.cond.k2[p] + self.cond.k2[q]);
                let flux = c * (u[q] - u[p]);
                out[p] += flux;
                out[q] -= flux;
            }
        }
        for i in 0..m {
            out[i] -= self.gain[i] * self.b_r * u[i];
        }
    }

    /// Diagonal of `-L`.
    pub fn neg_diagonal(&self) -> Vec<f64> {
        let m = self.grid.points;
        let inv_dx2 = 1.0 / (self.grid.dx * self.grid.dx);
        let mut diag = vec![0.0; self.grid.len()];
        for j in 0..m {
            for i in 0..m - 1 {
                let p = j * m + i;
                let c = self.edge_share(j) * self.d * 0.5 * inv_dx2 * (self.cond.k1[p] + self.cond.k1[p + 1]);
                diag[p] += c;
                diag[p + 1] += c;
            }
        }
        for j in 0..m - 1 {
            for i in 0..m {
                let p = j * m + i;
                let c = self.edge_share(i) * self.d * 0.5 * inv_dx2 * (self.cond.k2[p] + self.cond.k2[p + m]);
                diag[p] += c;
                diag[p + m] += c;
            }
        }
        for i in 0..m {
            diag[i] += self.gain[i] * self.b_r;
        }
        diag
    }

    /// Adds the Robin source for boundary data `g(x1)` into `out`.
    pub fn add_source(&self, g: impl Fn(f64) -> f64, out: &mut [f64]) {
        for i in 0..self.grid.points {
            out[i] += self.gain[i] * g(i as f64 * self.grid.dx);
        }
    }
}

/// Reaction right-hand side `F_i = R_i(u) - (L/A)(a_i u_i - beta_i v)` at every node.
pub fn reaction_fields(u: &[Vec<f64>], v: &[f64], r: &[f64], params: &ModelParams) -> Vec<Vec<f64>> {
    let n = u.len();
    let len = v.len();
    let mut out = vec![vec![0.0; len]; n];
    let mut local = vec![0.0; n];
    let mut rates = vec![0.0; n];
    for p in 0..len {
        for s in 0..n {
            local[s] = u[s][p];
        }
        smoluchowski_rates_into(&local, &params.gamma, &mut rates);
        for s in 0..n {
            out[s][p] = rates[s] - exchange_term(r[p], local[s], v[p], params.a[s], params.beta[s]);
        }
    }
    out
}

fn check_finite(state: &MacroState) -> Result<(), StepError> {
    match state.first_non_finite() {
        Some((field, index)) => Err(StepError::NonFinite { field, index, t: state.t }),
        None => Ok(()),
    }
}

fn check_state(state: &MacroState, params: &ModelParams, grid: &GridSpec) -> Result<(), StepError> {
    state.check_shape(grid, params.n_species()).map_err(StepError::Shape)?;
    check_finite(state)
}

/// One forward-Euler step of length `grid.dt`.
pub fn step_explicit(
    state: &MacroState,
    params: &ModelParams,
    grid: &GridSpec,
    table: &TortuosityTable,
    bc: &BoundaryConfig,
) -> Result<MacroState, StepError> {
    let limit = stability_guard(grid, params, table);
    if grid.dt > limit * (1.0 + 1e-12) {
        return Err(StepError::Stability { dt: grid.dt, limit });
    }
    check_state(state, params, grid)?;
    let dt = grid.dt;
    let cond = Conductivity::from_radii(&state.r, table, params.domain_area);
    let reactions = reaction_fields(&state.u, &state.v, &state.r, params);
    let weights = grid.weights();

    let mut u_next = Vec::with_capacity(params.n_species());
    let mut lu = vec![0.0; grid.len()];
    for (s, u) in state.u.iter().enumerate() {
        let stencil = Stencil::new(grid, &cond, params.d[s], params.b_r);
        stencil.apply(u, &mut lu);
        stencil.add_source(|x1| bc.data(s, x1, state.t, params.t0), &mut lu);
        let next: Vec<f64> = (0..grid.len())
            .map(|p| u[p] + dt * (lu[p] / weights[p] + reactions[s][p]))
            .collect();
        u_next.push(next);
    }

    let b = params.b();
    let mut v = state.v.clone();
    let mut r = state.r.clone();
    let mut clogged = state.clogged.clone();
    for p in 0..grid.len() {
        if clogged[p] {
            continue;
        }
        let absorbed: f64 = (0..params.n_species()).map(|s| params.alpha_v[s] * state.u[s][p]).sum();
        let deposited: f64 = (0..params.n_species()).map(|s| params.a[s] * state.u[s][p]).sum();
        v[p] = state.v[p] + dt * (absorbed - b * state.v[p]);
        r[p] = advance_radius(state.r[p], dt, params.alpha_r, deposited - b * state.v[p]);
        clogged[p] = r[p] >= CLOG_RADIUS;
    }

    let next = MacroState { t: state.t + dt, u: u_next, v, r, clogged };
    check_finite(&next)?;
    Ok(next)
}

/// Deposit and radius after a step of length `dt` with the mobile species
/// frozen at `u`, integrating the linear deposit ODE exactly.
pub fn advance_deposits(
    v: &[f64],
    r: &[f64],
    clogged: &[bool],
    u: &[Vec<f64>],
    params: &ModelParams,
    dt: f64,
) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let b = params.b();
    let decay = (-b * dt).exp();
    // e1 = int_0^dt e^{-b s} ds; e2 = int_0^dt (1 - e^{-b s}) / b ds.
    let (e1, e2) = if b > 0.0 {
        let e1 = -(-b * dt).exp_m1() / b;
        (e1, (dt - e1) / b)
    } else {
        (dt, 0.5 * dt * dt)
    };
    let mut v_out = v.to_vec();
    let mut r_out = r.to_vec();
    let mut c_out = clogged.to_vec();
    for p in 0..v.len() {
        if clogged[p] {
            continue;
        }
        let source: f64 = (0..params.n_species()).map(|s| params.alpha_v[s] * u[s][p]).sum();
        let deposit: f64 = (0..params.n_species()).map(|s| params.a[s] * u[s][p]).sum();
        v_out[p] = decay * v[p] + source * e1;
        let v_integral = v[p] * e1 + source * e2;
        let next = r[p] + 2.0 * PI * params.alpha_r * (deposit * dt - b * v_integral);
        r_out[p] = next.clamp(R_FLOOR, CLOG_RADIUS);
        c_out[p] = r_out[p] >= CLOG_RADIUS;
    }
    (v_out, r_out, c_out)
}

/// Outcome of a semi-implicit step.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardStep {
    pub state: MacroState,
    pub iterations: usize,
    pub increment: f64,
}

/// One backward-Euler step solved by Picard iteration on the lagged
/// coefficients. Converged when `max_i |U_i^(k+1) - U_i^(k)|_L2 < tol`.
#[allow(clippy::too_many_arguments)]
pub fn step_picard(
    state: &MacroState,
    params: &ModelParams,
    grid: &GridSpec,
    table: &TortuosityTable,
    bc: &BoundaryConfig,
    tol: f64,
    max_iter: usize,
) -> Result<PicardStep, StepError> {
    check_state(state, params, grid)?;
    let dt = grid.dt;
    let t_next = state.t + dt;
    let weights = grid.weights();
    let n = grid.len();
    let mut u_iter = state.u.clone();
    let mut increment = f64::INFINITY;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let (v, r, _) = advance_deposits(&state.v, &state.r, &state.clogged, &u_iter, params, dt);
        let cond = Conductivity::from_radii(&r, table, params.domain_area);
        let reactions = reaction_fields(&u_iter, &v, &r, params);

        let mut u_new = Vec::with_capacity(params.n_species());
        increment = 0.0f64;
        for (s, u_old) in state.u.iter().enumerate() {
            let stencil = Stencil::new(grid, &cond, params.d[s], params.b_r);
            let mut rhs: Vec<f64> = (0..n).map(|p| weights[p] * (u_old[p] + dt * reactions[s][p])).collect();
            let mut src = vec![0.0; n];
            stencil.add_source(|x1| bc.data(s, x1, t_next, params.t0), &mut src);
            rhs.iter_mut().zip(&src).for_each(|(a, b)| *a += dt * b);

            let diag: Vec<f64> = stencil.neg_diagonal().iter().zip(&weights).map(|(d, w)| w + dt * d).collect();
            let apply = |x: &[f64], out: &mut [f64]| {
                stencil.apply(x, out);
                for p in 0..n {
                    out[p] = weights[p] * x[p] - dt * out[p];
                }
            };
            let mut x = u_iter[s].clone();
            pcg(apply, &diag, &rhs, &mut x, LINEAR_TOL, 10 * n)?;
            let diff: Vec<f64> = x.iter().zip(&u_iter[s]).map(|(a, b)| a - b).collect();
            increment = increment.max(grid.l2_norm(&diff));
            u_new.push(x);
        }
        u_iter = u_new;
        if increment < tol {
            break;
        }
    }
    if !(increment < tol) {
        return Err(StepError::PicardDiverged { iterations, increment });
    }

    let (v, r, clogged) = advance_deposits(&state.v, &state.r, &state.clogged, &u_iter, params, dt);
    let next = MacroState { t: t_next, u: u_iter, v, r, clogged };
    check_finite(&next)?;
    Ok(PicardStep { state: next, iterations, increment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::TortuosityTensor;
    use crate::grid::InflowProfile;
    use crate::table::MeshMeta;

    fn flat_table() -> TortuosityTable {
        let radii = vec![0.01, 0.3, 0.5];
        let tensors = vec![
            TortuosityTensor([[1.0, 0.0], [0.0, 1.0]]),
            TortuosityTensor([[0.5, 0.0], [0.0, 0.5]]),
            TortuosityTensor::ZERO,
        ];
        TortuosityTable { radii, tensors, mesh_meta: MeshMeta { n_theta: 8, n_rho: 2 }, clog_anchor: true }
    }

    fn params(n: usize) -> ModelParams {
        ModelParams {
            d: (0..n).map(|i| 0.3 + 0.2 * i as f64).collect(),
            a: vec![0.5; n],
            alpha_v: vec![0.5; n],
            beta: vec![1.0; n],
            gamma: vec![vec![2.0; n]; n],
            alpha_r: 0.1,
            b_r: 0.5,
            t0: 1.0,
            domain_area: 1.0,
            kappa: None,
        }
    }

    fn state(grid: &GridSpec, n: usize, f: impl Fn([f64; 2]) -> f64) -> MacroState {
        let len = grid.len();
        let u = (0..n).map(|s| (0..len).map(|p| f(grid.coords(p)) / (s + 1) as f64).collect()).collect();
        MacroState { t: 0.0, u, v: vec![0.0; len], r: vec![0.1; len], clogged: vec![false; len] }
    }

    fn zero_bc(n: usize) -> BoundaryConfig {
        BoundaryConfig { inflow: vec![InflowProfile::Zero; n] }
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let grid = GridSpec::new(9, 1e-3, 1.0).unwrap();
        let p = params(3);
        let s0 = state(&grid, 3, |_| 0.0);
        let s1 = step_explicit(&s0, &p, &grid, &flat_table(), &zero_bc(3)).unwrap();
        assert_eq!(s1.u, s0.u);
        assert_eq!(s1.v, s0.v);
        assert_eq!(s1.r, s0.r);
        let s2 = step_picard(&s0, &p, &grid, &flat_table(), &zero_bc(3), 1e-12, 5).unwrap();
        assert_eq!(s2.state.r, s0.r);
        assert!(s2.state.u.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn operator_is_symmetric_and_annihilates_constants_without_robin() {
        let grid = GridSpec::new(6, 1e-3, 1.0).unwrap();
        let r: Vec<f64> = (0..grid.len()).map(|p| 0.05 + 0.4 * grid.coords(p)[0] * grid.coords(p)[1]).collect();
        let cond = Conductivity::from_radii(&r, &flat_table(), 1.0);
        let st = Stencil::new(&grid, &cond, 0.7, 0.0);
        let mut out = vec![0.0; grid.len()];
        st.apply(&vec![1.0; grid.len()], &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-10));
        let st = Stencil::new(&grid, &cond, 0.7, 0.5);
        let n = grid.len();
        let mut col_i = vec![0.0; n];
        let mut col_j = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                st.apply(&e, &mut col_i);
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                st.apply(&e, &mut col_j);
                assert!((col_i[j] - col_j[i]).abs() < 1e-10);
            }
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            st.apply(&e, &mut col_i);
            assert!((-col_i[i] - st.neg_diagonal()[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn robin_row_matches_ghost_node_closure() {
        // Constant coefficients: the weighted row divided by 1/2 is the
        // centred ghost-node update.
        let grid = GridSpec::new(7, 1e-3, 1.0).unwrap();
        let r = vec![0.01; grid.len()];
        let cond = Conductivity::from_radii(&r, &flat_table(), 1.0);
        let k = cond.k1[0];
        let d = 0.4;
        let b_r = 0.5;
        let st = Stencil::new(&grid, &cond, d, b_r);
        let u: Vec<f64> = (0..grid.len()).map(|p| (1.0 + p as f64).sqrt()).collect();
        let mut lu = vec![0.0; grid.len()];
        st.apply(&u, &mut lu);
        let g = 0.8;
        st.add_source(|_| g, &mut lu);
        let (i, dx) = (3, grid.dx);
        let (p, e, w, n) = (grid.index(i, 0), grid.index(i + 1, 0), grid.index(i - 1, 0), grid.index(i, 1));
        let ghost = u[n] - 2.0 * dx * (b_r * u[p] - g);
        let expect = d * k * (u[e] + u[w] + u[n] + ghost - 4.0 * u[p]) / (dx * dx);
        assert!((lu[p] / 0.5 - expect).abs() < 1e-9 * expect.abs().max(1.0));
    }

    #[test]
    fn composite_mass_conserved_without_exchange() {
        let grid = GridSpec::new(11, 1e-4, 1.0).unwrap();
        let mut p = params(3);
        p.a = vec![0.0; 3];
        p.beta = vec![0.0; 3];
        p.b_r = 0.0;
        let mut s = state(&grid, 3, |x| 1.0 + (3.0 * x[0]).sin() * x[1]);
        let mass = |s: &MacroState| {
            (0..3).map(|i| (i + 1) as f64 * grid.integrate(&s.u[i])).sum::<f64>()
        };
        let m0 = mass(&s);
        for _ in 0..20 {
            let next = step_explicit(&s, &p, &grid, &flat_table(), &zero_bc(3)).unwrap();
            assert!((mass(&next) - mass(&s)).abs() < 1e-10);
            s = next;
        }
        assert!((mass(&s) - m0).abs() < 1e-10);
    }

    #[test]
    fn guard_rejects_large_steps() {
        let p = params(3);
        let table = flat_table();
        let grid = GridSpec::new(41, 1.0, 1.0).unwrap();
        let limit = stability_guard(&grid, &p, &table);
        let expect = 0.95 * grid.dx * grid.dx / (4.0 * 0.7 * porosity(0.01, 1.0));
        assert!((limit - expect).abs() < 1e-15);
        let grid = GridSpec::new(41, 10.0 * limit, 1.0).unwrap();
        let s = state(&grid, 3, |_| 0.0);
        let err = step_explicit(&s, &p, &grid, &table, &zero_bc(3)).unwrap_err();
        assert!(matches!(err, StepError::Stability { .. }));
        let mut half = p.clone();
        half.d.iter_mut().for_each(|d| *d *= 0.5);
        assert!((stability_guard(&grid, &half, &table) / limit - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nan_is_reported() {
        let grid = GridSpec::new(5, 1e-4, 1.0).unwrap();
        let mut s = state(&grid, 2, |_| 1.0);
        s.u[1][7] = f64::NAN;
        let err = step_explicit(&s, &params(2), &grid, &flat_table(), &zero_bc(2)).unwrap_err();
        assert_eq!(err, StepError::NonFinite { field: "u2".into(), index: 7, t: 0.0 });
    }

    #[test]
    fn radius_grows_when_deposition_dominates() {
        let grid = GridSpec::new(7, 1e-4, 1.0).unwrap();
        let mut s = state(&grid, 3, |x| 1.0 + x[0]);
        for _ in 0..10 {
            let next = step_explicit(&s, &params(3), &grid, &flat_table(), &zero_bc(3)).unwrap();
            assert!(next.r.iter().zip(&s.r).all(|(a, b)| a >= b));
            s = next;
        }
    }

    #[test]
    fn linear_picard_converges_in_two_iterations() {
        let grid = GridSpec::new(9, 1e-3, 1.0).unwrap();
        let mut p = params(2);
        p.gamma = vec![vec![0.0; 2]; 2];
        p.a = vec![0.0; 2];
        p.alpha_v = vec![0.0; 2];
        let s = state(&grid, 2, |x| x[0] * x[1]);
        let bc = BoundaryConfig { inflow: vec![InflowProfile::Parabolic { amplitude: 4.0, root: 1.0 }; 2] };
        let out = step_picard(&s, &p, &grid, &flat_table(), &bc, 1e-9, 10).unwrap();
        assert!(out.iterations <= 2);
        let one = step_picard(&s, &p, &grid, &flat_table(), &bc, f64::INFINITY, 10).unwrap();
        assert_eq!(one.iterations, 1);
        for (a, b) in one.state.u.iter().flatten().zip(out.state.u.iter().flatten()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn picard_reports_non_convergence() {
        let grid = GridSpec::new(9, 0.5, 1.0).unwrap();
        let mut p = params(3);
        p.gamma = vec![vec![500.0; 3]; 3];
        let s = state(&grid, 3, |_| 3.0);
        let err = step_picard(&s, &p, &grid, &flat_table(), &zero_bc(3), 1e-12, 3).unwrap_err();
        assert!(matches!(err, StepError::PicardDiverged { iterations: 3, .. }));
    }

    #[test]
    fn exact_deposit_update_for_constant_u() {
        let p = params(1);
        let (v, r, c) = advance_deposits(&[0.2], &[0.1], &[false], &[vec![2.0]], &p, 0.5);
        let b = 1.0;
        let v_expect = 0.2 * (-0.5f64).exp() + 1.0 * (1.0 - (-0.5f64).exp()) / b;
        assert!((v[0] - v_expect).abs() < 1e-15);
        // int v = 0.2 e1 + 1.0 (dt - e1), e1 = 1 - e^{-1/2}.
        let e1 = 1.0 - (-0.5f64).exp();
        let iv = 0.2 * e1 + (0.5 - e1);
        let r_expect = 0.1 + 2.0 * PI * 0.1 * (1.0 * 0.5 - iv);
        assert!((r[0] - r_expect).abs() < 1e-15);
        assert!(!c[0]);
        let (v2, r2, _) = advance_deposits(&[0.2], &[0.5], &[true], &[vec![2.0]], &p, 0.5);
        assert_eq!((v2[0], r2[0]), (0.2, 0.5));
    }
}
