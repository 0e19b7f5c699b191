//! Closed-form solution operators for the deposit and radius ODEs and the
//! a-priori bounds they imply. Integrals over time use the trapezoid rule
//! on stored history frames and never call into the stepping code.

use std::f64::consts::PI;

use crate::error::OracleError;
use crate::model::ModelParams;

/// Fields at one instant of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryFrame {
    pub t: f64,
    pub u: Vec<Vec<f64>>,
    /// Deposit density; may be empty when only `u` is needed.
    pub v: Vec<f64>,
}

const TIME_SLACK: f64 = 1e-12;

fn check_history(history: &[HistoryFrame], t: f64) -> Result<(), OracleError> {
    let gap = |reason: &str| Err(OracleError::HistoryGap { requested: t, reason: reason.to_string() });
    let Some(first) = history.first() else {
        return gap("history is empty");
    };
    if first.t.abs() > TIME_SLACK {
        return gap("history does not start at t = 0");
    }
    if history.windows(2).any(|w| w[1].t <= w[0].t) {
        return gap("frame times are not increasing");
    }
    if t < 0.0 || t > history.last().unwrap().t + TIME_SLACK {
        return gap("requested time lies outside the stored frames");
    }
    Ok(())
}

/// Trapezoid integral over `[0, t]` of a per-node integrand sampled at the
/// frames; a partial last interval is closed by linear interpolation.
fn integrate<F>(history: &[HistoryFrame], t: f64, len: usize, integrand: F) -> Vec<f64>
where
    F: Fn(&HistoryFrame, usize) -> f64,
{
    let mut acc = vec![0.0; len];
    for w in history.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.t >= t {
            break;
        }
        let end = b.t.min(t);
        let h = end - a.t;
        let theta = h / (b.t - a.t);
        for (p, slot) in acc.iter_mut().enumerate() {
            let fa = integrand(a, p);
            let fb = integrand(b, p);
            let f_end = fa + theta * (fb - fa);
            *slot += 0.5 * h * (fa + f_end);
        }
    }
    acc
}

/// `v(t) = e^{-bt} v0 + sum_i alpha_i int_0^t e^{b(s-t)} u_i(s) ds`.
pub fn v_closed_form(
    history: &[HistoryFrame],
    v0: &[f64],
    params: &ModelParams,
    t: f64,
) -> Result<Vec<f64>, OracleError> {
    check_history(history, t)?;
    let b = params.b();
    let integral = integrate(history, t, v0.len(), |f, p| {
        let source: f64 = f.u.iter().zip(&params.alpha_v).map(|(u, a)| a * u[p]).sum();
        (b * (f.t - t)).exp() * source
    });
    let decay = (-b * t).exp();
    Ok(v0.iter().zip(integral).map(|(v, i)| decay * v + i).collect())
}

/// `r(t) = r0 + 2 pi alpha int_0^t (sum_i a_i u_i - b v) ds`, unclamped.
pub fn r_closed_form(
    history: &[HistoryFrame],
    r0: &[f64],
    params: &ModelParams,
    t: f64,
) -> Result<Vec<f64>, OracleError> {
    check_history(history, t)?;
    if history.iter().any(|f| f.v.len() != r0.len()) {
        return Err(OracleError::HistoryGap { requested: t, reason: "frames lack deposit fields".into() });
    }
    let b = params.b();
    let integral = integrate(history, t, r0.len(), |f, p| {
        let deposit: f64 = f.u.iter().zip(&params.a).map(|(u, a)| a * u[p]).sum();
        deposit - b * f.v[p]
    });
    let k = 2.0 * PI * params.alpha_r;
    Ok(r0.iter().zip(integral).map(|(r, i)| r + k * i).collect())
}

/// Bounds entering the radius-corridor estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisBox {
    /// Sup-norm budget for the mobile species.
    pub m: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub sup_r0: f64,
    pub inf_r0: f64,
    pub sup_v0: f64,
    /// Aggregate species coefficient.
    pub a: f64,
    pub b: f64,
    /// Feasible horizon, filled by [`AnalysisBox::with_horizon`].
    pub s_max: f64,
}

impl AnalysisBox {
    /// Box for the given data with `a = max(sum a_i, sum alpha_i)`.
    pub fn new(m: f64, eps1: f64, eps2: f64, r0: &[f64], v0: &[f64], params: &ModelParams) -> Self {
        let a = params.a.iter().sum::<f64>().max(params.alpha_v.iter().sum());
        AnalysisBox {
            m,
            eps1,
            eps2,
            sup_r0: r0.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            inf_r0: r0.iter().copied().fold(f64::INFINITY, f64::min),
            sup_v0: v0.iter().copied().fold(0.0, f64::max),
            a,
            b: params.b(),
            s_max: f64::NAN,
        }
    }

    pub fn with_horizon(mut self, alpha_r: f64) -> Result<Self, OracleError> {
        self.s_max = feasible_horizon(&self, alpha_r)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |m: String| Err(OracleError::InconsistentBox(m));
        let values = [self.m, self.eps1, self.eps2, self.sup_r0, self.inf_r0, self.sup_v0, self.a, self.b];
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("entries must be finite and nonnegative".into());
        }
        if self.inf_r0 > self.sup_r0 {
            return bad(format!("inf r0 = {} exceeds sup r0 = {}", self.inf_r0, self.sup_r0));
        }
        Ok(())
    }

    /// Corridor `[eps2, (1 - eps1) / 2]` guaranteed for radii inside the horizon.
    pub fn corridor(&self) -> (f64, f64) {
        (self.eps2, 0.5 * (1.0 - self.eps1))
    }

    /// `a/b (e^{bt} - 1)`, the growth factor of the deposit bound.
    pub fn deposit_growth(&self, t: f64) -> f64 {
        if self.b > 0.0 {
            self.a * (self.b * t).exp_m1() / self.b
        } else {
            self.a * t
        }
    }
}

/// Left side, upper margin and lower margin of the horizon inequality at `t`.
fn horizon_terms(bx: &AnalysisBox, alpha_r: f64, t: f64) -> (f64, f64, f64) {
    let k = 2.0 * PI * alpha_r;
    let scale = k * bx.m;
    let lhs = if scale == 0.0 { 0.0 } else { scale * bx.deposit_growth(t) };
    let upper = 0.5 * (1.0 - 2.0 * bx.sup_r0 - bx.eps1);
    let lower = bx.inf_r0 - bx.eps2 - k * bx.b * t * bx.sup_v0;
    (lhs, upper, lower)
}

/// Whether the radius stays in its corridor up to `t` by the a-priori bound.
pub fn horizon_condition(bx: &AnalysisBox, alpha_r: f64, t: f64) -> bool {
    let (lhs, upper, lower) = horizon_terms(bx, alpha_r, t);
    lhs <= upper.min(lower)
}

/// Largest `s` with the horizon condition holding on `[0, s]`; infinite
/// when it never fails.
pub fn feasible_horizon(bx: &AnalysisBox, alpha_r: f64) -> Result<f64, OracleError> {
    bx.validate()?;
    let (_, upper, lower) = horizon_terms(bx, alpha_r, 0.0);
    if upper <= 0.0 || lower <= 0.0 {
        return Err(OracleError::VoidMargins(format!(
            "upper margin {upper}, lower margin {lower}"
        )));
    }
    let mut hi = 1.0;
    while horizon_condition(bx, alpha_r, hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 * hi.max(1e-3) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if horizon_condition(bx, alpha_r, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Constant `C` in the radius stability estimate, for the l1 norm over species.
pub fn radius_lipschitz_constant(params: &ModelParams) -> f64 {
    let a_max = params.a.iter().copied().fold(0.0, f64::max);
    let alpha_max = params.alpha_v.iter().copied().fold(0.0, f64::max);
    2.0 * PI * params.alpha_r * a_max.max(params.b() * alpha_max)
}

/// Largest pointwise ratio of `|r1 - r2|` to the bound
/// `C int_0^t (|du|(s) + int_0^s e^{b q} |du|(q) dq) ds`, with `du = u1 - u2`.
/// Nodes where the bound vanishes contribute ratio 0.
pub fn radius_lipschitz_check(
    h1: &[HistoryFrame],
    h2: &[HistoryFrame],
    r1: &[f64],
    r2: &[f64],
    params: &ModelParams,
    t: f64,
) -> Result<f64, OracleError> {
    check_history(h1, t)?;
    if h1.len() != h2.len() || h1.iter().zip(h2).any(|(a, b)| a.t != b.t) {
        return Err(OracleError::HistoryGap { requested: t, reason: "histories sampled at different times".into() });
    }
    let len = r1.len();
    let b = params.b();
    let diff: Vec<HistoryFrame> = h1
        .iter()
        .zip(h2)
        .map(|(f1, f2)| {
            let du: Vec<f64> = (0..len)
                .map(|p| f1.u.iter().zip(&f2.u).map(|(x, y)| (x[p] - y[p]).abs()).sum())
                .collect();
            HistoryFrame { t: f1.t, u: vec![du], v: Vec::new() }
        })
        .collect();
    // Inner integral at every frame time, then the outer integral.
    let inner: Vec<Vec<f64>> = diff
        .iter()
        .map(|f| integrate(&diff, f.t, len, |g, p| (b * g.t).exp() * g.u[0][p]))
        .collect();
    let combined: Vec<HistoryFrame> = diff
        .iter()
        .zip(inner)
        .map(|(f, i)| HistoryFrame { t: f.t, u: vec![f.u[0].iter().zip(&i).map(|(x, y)| x + y).collect()], v: Vec::new() })
        .collect();
    let outer = integrate(&combined, t, len, |g, p| g.u[0][p]);
    let c = radius_lipschitz_constant(params);
    let mut ratio: f64 = 0.0;
    for p in 0..len {
        let lhs = (r1[p] - r2[p]).abs();
        let rhs = c * outer[p];
        if rhs > 0.0 {
            ratio = ratio.max(lhs / rhs);
        } else if lhs > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(ratio)
}
