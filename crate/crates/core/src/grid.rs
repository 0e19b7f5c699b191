//! Node-centred grid on the unit square and the macroscopic state.
//!
//! Node `p = j * points + i` sits at `(i dx, j dx)`; `j = 0` is the inflow
//! edge `x2 = 0`. Quadrature uses trapezoid weights (`1` inside, `1/2` on
//! edges, `1/4` at corners) times `dx^2`.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    pub dx: f64,
    pub dt: f64,
    pub t_final: f64,
}

impl GridSpec {
    pub fn new(points: usize, dt: f64, t_final: f64) -> Result<Self, ConfigError> {
        if points < 3 {
            return Err(ConfigError::Invalid(format!("grid needs at least 3 points per side, got {points}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ConfigError::Invalid(format!("time step {dt} must be positive")));
        }
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(ConfigError::Invalid(format!("final time {t_final} must be nonnegative")));
        }
        Ok(GridSpec { points, dx: 1.0 / (points - 1) as f64, dt, t_final })
    }

    /// Grid with `dt = ratio * dx^2`.
    pub fn with_ratio(points: usize, ratio: f64, t_final: f64) -> Result<Self, ConfigError> {
        let dx = 1.0 / (points.max(2) - 1) as f64;
        Self::new(points, ratio * dx * dx, t_final)
    }

    pub fn len(&self) -> usize {
        self.points * self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.points + i
    }

    pub fn coords(&self, p: usize) -> [f64; 2] {
        [(p % self.points) as f64 * self.dx, (p / self.points) as f64 * self.dx]
    }

    /// Number of steps needed to reach `t_final`, the last one possibly short.
    pub fn step_count(&self) -> usize {
        ((self.t_final / self.dt) - 1e-9).ceil().max(0.0) as usize
    }

    /// Trapezoid weight of node `p` (without the `dx^2` factor).
    pub fn weight(&self, p: usize) -> f64 {
        let edge = |k: usize| if k == 0 || k == self.points - 1 { 0.5 } else { 1.0 };
        edge(p % self.points) * edge(p / self.points)
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|p| self.weight(p)).collect()
    }

    pub fn integrate(&self, field: &[f64]) -> f64 {
        field.iter().enumerate().map(|(p, f)| self.weight(p) * f).sum::<f64>() * self.dx * self.dx
    }

    pub fn l2_norm(&self, field: &[f64]) -> f64 {
        let sq: Vec<f64> = field.iter().map(|f| f * f).collect();
        self.integrate(&sq).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub t: f64,
    /// One field per species.
    pub u: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub clogged: Vec<bool>,
}

impl MacroState {
    pub fn check_shape(&self, grid: &GridSpec, n_species: usize) -> Result<(), String> {
        let n = grid.len();
        if self.u.len() != n_species {
            return Err(format!("{} species fields, expected {n_species}", self.u.len()));
        }
        if self.u.iter().any(|f| f.len() != n) || self.v.len() != n || self.r.len() != n || self.clogged.len() != n {
            return Err(format!("fields must have {n} entries"));
        }
        Ok(())
    }

    pub fn clogged_fraction(&self) -> f64 {
        self.clogged.iter().filter(|c| **c).count() as f64 / self.clogged.len().max(1) as f64
    }

    /// `(field name, index)` of the first non-finite value.
    pub fn first_non_finite(&self) -> Option<(String, usize)> {
        for (i, f) in self.u.iter().enumerate() {
            if let Some(p) = f.iter().position(|x| !x.is_finite()) {
                return Some((format!("u{}", i + 1), p));
            }
        }
        if let Some(p) = self.v.iter().position(|x| !x.is_finite()) {
            return Some(("v".into(), p));
        }
        self.r.iter().position(|x| !x.is_finite()).map(|p| ("r".into(), p))
    }
}

/// Inflow data along `x2 = 0` as a function of `x1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InflowProfile {
    Zero,
    /// `amplitude * x1 * (root - x1)`.
    Parabolic { amplitude: f64, root: f64 },
    /// `sum_k coefficients[k] * x1^k`.
    Polynomial { coefficients: Vec<f64> },
}

impl InflowProfile {
    pub fn eval(&self, x1: f64) -> f64 {
        match self {
            InflowProfile::Zero => 0.0,
            InflowProfile::Parabolic { amplitude, root } => amplitude * x1 * (root - x1),
            InflowProfile::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * x1 + c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    /// One profile per species, active on `[0, t0]`.
    pub inflow: Vec<InflowProfile>,
}

impl BoundaryConfig {
    /// Robin data for `species` at `x1` and time `t`.
    pub fn data(&self, species: usize, x1: f64, t: f64, t0: f64) -> f64 {
        if t <= t0 {
            self.inflow[species].eval(x1)
        } else {
            0.0
        }
    }

    /// Errors if some profile is negative at a grid abscissa.
    pub fn validate(&self, grid: &GridSpec, n_species: usize) -> Result<(), ConfigError> {
        if self.inflow.len() != n_species {
            return Err(ConfigError::Invalid(format!(
                "{} inflow profiles for {n_species} species",
                self.inflow.len()
            )));
        }
        for (s, prof) in self.inflow.iter().enumerate() {
            for i in 0..grid.points {
                let g = prof.eval(i as f64 * grid.dx);
                if !(g.is_finite() && g >= 0.0) {
                    return Err(ConfigError::Invalid(format!(
                        "inflow profile of species {} is {g} at x1 = {}",
                        s + 1,
                        i as f64 * grid.dx
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_integrate_constants_and_linears_exactly() {
        let g = GridSpec::new(11, 1e-3, 1.0).unwrap();
        assert!((g.integrate(&vec![1.0; g.len()]) - 1.0).abs() < 1e-14);
        let x: Vec<f64> = (0..g.len()).map(|p| g.coords(p)[0] + 2.0 * g.coords(p)[1]).collect();
        assert!((g.integrate(&x) - 1.5).abs() < 1e-14);
        assert_eq!(g.weight(0), 0.25);
        assert_eq!(g.weight(5), 0.5);
        assert_eq!(g.weight(g.index(5, 5)), 1.0);
    }

    #[test]
    fn ratio_grid() {
        let g = GridSpec::with_ratio(41, 0.2, 3.0).unwrap();
        assert_eq!(g.dx, 0.025);
        assert!((g.dt - 1.25e-4).abs() < 1e-18);
        assert_eq!(g.step_count(), 24_000);
    }

    #[test]
    fn profiles() {
        let p = InflowProfile::Parabolic { amplitude: 25.0, root: 1.0 };
        assert_eq!(p.eval(0.5), 6.25);
        let q = InflowProfile::Polynomial { coefficients: vec![0.0, 25.0, -25.0] };
        assert_eq!(q.eval(0.5), 6.25);
        let bc = BoundaryConfig { inflow: vec![p, InflowProfile::Zero] };
        assert_eq!(bc.data(0, 0.5, 2.5, 2.0), 0.0);
        assert_eq!(bc.data(0, 0.5, 2.0, 2.0), 6.25);
        let g = GridSpec::new(5, 1e-3, 1.0).unwrap();
        assert!(bc.validate(&g, 2).is_ok());
        let neg = BoundaryConfig { inflow: vec![InflowProfile::Parabolic { amplitude: 1.0, root: 0.5 }] };
        assert!(neg.validate(&g, 1).is_err());
    }
}
