//! Pointwise reaction laws: Smoluchowski aggregation, deposit exchange and
//! the deposit/radius ODE right-hand sides.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::table::CLOG_RADIUS;

/// Below this radius the growth law is applied without dividing by `r`.
pub const R_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Molecular diffusivities `d_i`.
    pub d: Vec<f64>,
    /// Deposition coefficients `a_i` (exchange and radius growth).
    pub a: Vec<f64>,
    /// Absorption rates in the deposit equation.
    pub alpha_v: Vec<f64>,
    /// Dissolution rates `beta_i`; their sum is `b`.
    pub beta: Vec<f64>,
    /// Symmetric aggregation kernel `gamma_ij`.
    pub gamma: Vec<Vec<f64>>,
    /// Radius growth coefficient.
    pub alpha_r: f64,
    /// Robin coefficient on the inflow edge.
    pub b_r: f64,
    /// Inflow shut-off time.
    pub t0: f64,
    #[serde(default = "unit_area")]
    pub domain_area: f64,
    /// Accepted for completeness; it enters no equation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

fn unit_area() -> f64 {
    1.0
}

impl ModelParams {
    pub fn n_species(&self) -> usize {
        self.d.len()
    }

    /// `b = sum_i beta_i`.
    pub fn b(&self) -> f64 {
        self.beta.iter().sum()
    }

    pub fn max_d(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.n_species();
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if n == 0 {
            return bad("at least one species is required".into());
        }
        for (name, list) in [("a", &self.a), ("alpha_v", &self.alpha_v), ("beta", &self.beta)] {
            if list.len() != n {
                return bad(format!("`{name}` has {} entries, expected {n}", list.len()));
            }
        }
        if self.gamma.len() != n || self.gamma.iter().any(|row| row.len() != n) {
            return bad(format!("`gamma` must be {n}x{n}"));
        }
        let lists = [&self.d, &self.a, &self.alpha_v, &self.beta];
        if lists.iter().flat_map(|l| l.iter()).chain(self.gamma.iter().flatten()).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("coefficients must be finite and nonnegative".into());
        }
        for i in 0..n {
            for j in 0..i {
                if self.gamma[i][j] != self.gamma[j][i] {
                    return bad(format!("`gamma` is not symmetric at ({}, {})", i + 1, j + 1));
                }
            }
        }
        for (name, v) in [("alpha_r", self.alpha_r), ("b_r", self.b_r), ("t0", self.t0)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("`{name}` must be finite and nonnegative"));
            }
        }
        if !(self.domain_area.is_finite() && self.domain_area > 0.0) {
            return bad("`domain_area` must be positive".into());
        }
        Ok(())
    }
}

/// Truncated Smoluchowski rates written into `out`.
///
/// With species `1..=N`, `R_i = 1/2 sum_{j<i} g_{j,i-j} u_j u_{i-j} - u_i sum_{j<=N-i} g_ij u_j`,
/// so `sum_i i R_i = 0` for symmetric `g`.
pub fn smoluchowski_rates_into(u: &[f64], gamma: &[Vec<f64>], out: &mut [f64]) {
    let n = u.len();
    for i in 0..n {
        let size = i + 1;
        let mut gain = 0.0;
        for j in 1..size {
            let l = size - j;
            gain += gamma[j - 1][l - 1] * u[j - 1] * u[l - 1];
        }
        let mut loss = 0.0;
        for j in 1..=(n - size) {
            loss += gamma[i][j - 1] * u[j - 1];
        }
        out[i] = 0.5 * gain - u[i] * loss;
    }
}

pub fn smoluchowski_rates(u: &[f64], gamma: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    smoluchowski_rates_into(u, gamma, &mut out);
    out
}

/// Interface length over fluid area, `2 pi r / (1 - pi r^2)`.
pub fn exchange_ratio(r: f64) -> f64 {
    2.0 * PI * r / (1.0 - PI * r * r)
}

/// Net transfer rate from species `i` to the deposit; zero once clogged.
pub fn exchange_term(r: f64, u_i: f64, v: f64, a_i: f64, beta_i: f64) -> f64 {
    if r >= CLOG_RADIUS {
        return 0.0;
    }
    exchange_ratio(r) * (a_i * u_i - beta_i * v)
}

/// Radius after one forward step driven by `drive = sum_i a_i u_i - b v`.
///
/// Above [`R_FLOOR`] the update is `dt (1/r) alpha drive L(r)`, otherwise
/// `2 pi alpha dt drive`; the result is clamped to `[R_FLOOR, 1/2]`.
pub fn advance_radius(r: f64, dt: f64, alpha_r: f64, drive: f64) -> f64 {
    let next = if r > R_FLOOR {
        r + dt * (1.0 / r) * alpha_r * drive * (2.0 * PI * r)
    } else {
        r + 2.0 * PI * alpha_r * dt * drive
    };
    next.clamp(R_FLOOR, CLOG_RADIUS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize) -> Vec<Vec<f64>> {
        vec![vec![1.0; n]; n]
    }

    #[test]
    fn rates_small_example() {
        let r = smoluchowski_rates(&[1.0, 1.0, 0.0], &ones(3));
        assert_eq!(r, vec![-2.0, -0.5, 1.0]);
        let moment: f64 = r.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
        assert_eq!(moment, 0.0);
    }

    #[test]
    fn rates_vanish() {
        assert!(smoluchowski_rates(&[0.0; 4], &ones(4)).iter().all(|v| *v == 0.0));
        assert!(smoluchowski_rates(&[0.3, 2.0, 1.0], &vec![vec![0.0; 3]; 3]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_species_is_inert() {
        assert_eq!(smoluchowski_rates(&[5.0], &ones(1)), vec![0.0]);
    }

    #[test]
    fn exchange_examples() {
        assert!((exchange_ratio(0.5) - PI / (1.0 - PI / 4.0)).abs() < 1e-14);
        assert!(exchange_ratio(0.5) <= 15.0);
        assert_eq!(exchange_term(0.0, 1.0, 0.0, 1.0, 1.0), 0.0);
        assert!((exchange_term(0.1, 1.0, 0.0, 0.9, 1.0) - 0.583_84).abs() < 1e-4);
        assert_eq!(exchange_term(0.5, 1.0, 0.0, 0.9, 1.0), 0.0);
    }

    #[test]
    fn radius_update_forms_agree() {
        let r = advance_radius(0.1, 0.01, 1.0, 0.05);
        assert!((r - 0.103_141_6).abs() < 1e-6);
        for &(r0, drive) in &[(0.1, 0.05), (0.3, -0.2), (0.01, 1.0)] {
            let divided = advance_radius(r0, 1e-3, 0.7, drive);
            let direct = r0 + 2.0 * PI * 0.7 * 1e-3 * drive;
            assert!((divided - direct).abs() <= 1e-14 * direct.abs());
        }
    }

    #[test]
    fn radius_update_clamps() {
        assert_eq!(advance_radius(0.49, 1.0, 1.0, 1.0), 0.5);
        assert_eq!(advance_radius(0.002, 1.0, 1.0, -1.0), R_FLOOR);
        assert!(advance_radius(5e-4, 1e-3, 1.0, 0.01) > 5e-4);
    }

    #[test]
    fn validation_catches_shapes() {
        let mut p = ModelParams {
            d: vec![1.0, 1.0],
            a: vec![1.0, 1.0],
            alpha_v: vec![1.0, 1.0],
            beta: vec![1.0, 1.0],
            gamma: ones(2),
            alpha_r: 1.0,
            b_r: 0.5,
            t0: 1.0,
            domain_area: 1.0,
            kappa: None,
        };
        assert!(p.validate().is_ok());
        assert_eq!(p.b(), 2.0);
        p.gamma[0][1] = 2.0;
        assert!(p.validate().is_err());
        p.gamma[0][1] = 1.0;
        p.beta.pop();
        assert!(p.validate().is_err());
        p.beta.push(-1.0);
        assert!(p.validate().is_err());
    }
}
