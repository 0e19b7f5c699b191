//! Tortuosity tensors tabulated over the deposit radius.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::cell::{cell_tortuosity, porosity, TortuosityTensor};
use crate::error::TableError;

pub const DEFAULT_R_MIN: f64 = 0.05;
pub const DEFAULT_DELTA_R: f64 = 0.01;
pub const DEFAULT_N_THETA: usize = 64;
pub const DEFAULT_N_RHO: usize = 16;

/// Radius at which the cell is fully clogged.
pub const CLOG_RADIUS: f64 = 0.5;

const HEADER_TAG: &str = "clogsim-tau v1";
const TENSOR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshMeta {
    pub n_theta: usize,
    pub n_rho: usize,
}

impl Default for MeshMeta {
    fn default() -> Self {
        MeshMeta { n_theta: DEFAULT_N_THETA, n_rho: DEFAULT_N_RHO }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TortuosityTable {
    pub radii: Vec<f64>,
    pub tensors: Vec<TortuosityTensor>,
    pub mesh_meta: MeshMeta,
    /// The last entry is `(1/2, 0)`.
    pub clog_anchor: bool,
}

/// Radii `r_min + m delta_r` not exceeding `1/2 - delta_r`.
pub fn partition(r_min: f64, delta_r: f64) -> Result<Vec<f64>, TableError> {
    if !(r_min > 0.0 && r_min < CLOG_RADIUS) {
        return Err(TableError::Partition(format!("r_min = {r_min} must lie in (0, 1/2)")));
    }
    if !(delta_r > 0.0 && delta_r < CLOG_RADIUS - r_min) {
        return Err(TableError::Partition(format!(
            "delta_r = {delta_r} must lie in (0, {})",
            CLOG_RADIUS - r_min
        )));
    }
    let r_cap = CLOG_RADIUS - delta_r;
    let steps = ((r_cap - r_min) / delta_r + 1e-9).floor() as usize;
    Ok((0..=steps).map(|m| r_min + m as f64 * delta_r).collect())
}

/// Solves the cell problem at every partition radius (in parallel) and
/// appends the clogging anchor.
pub fn build_table(r_min: f64, delta_r: f64, mesh_meta: MeshMeta) -> Result<TortuosityTable, TableError> {
    let mut radii = partition(r_min, delta_r)?;
    let mut tensors = radii
        .par_iter()
        .map(|&r| {
            cell_tortuosity(r, mesh_meta.n_theta, mesh_meta.n_rho)
                .map_err(|source| TableError::CellSolve { radius: r, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    radii.push(CLOG_RADIUS);
    tensors.push(TortuosityTensor::ZERO);
    let table = TortuosityTable { radii, tensors, mesh_meta, clog_anchor: true };
    table.validate()?;
    Ok(table)
}

impl TortuosityTable {
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn validate(&self) -> Result<(), TableError> {
        let inv = |msg: String| Err(TableError::Invariant(msg));
        if self.radii.is_empty() {
            return inv("table is empty".into());
        }
        if self.radii.len() != self.tensors.len() {
            return inv(format!("{} radii but {} tensors", self.radii.len(), self.tensors.len()));
        }
        for (i, r) in self.radii.iter().enumerate() {
            if !(r.is_finite() && *r > 0.0 && *r <= CLOG_RADIUS) {
                return inv(format!("radius {r} at entry {i} outside (0, 1/2]"));
            }
        }
        for (i, w) in self.radii.windows(2).enumerate() {
            if w[1] <= w[0] {
                return inv(format!("radii not strictly increasing at entry {}", i + 1));
            }
        }
        let last = *self.radii.last().unwrap();
        if self.clog_anchor {
            if last != CLOG_RADIUS || !self.tensors.last().unwrap().is_zero() {
                return inv("clog anchor must be the entry (1/2, 0)".into());
            }
        } else if last == CLOG_RADIUS {
            return inv("radius 1/2 present without the clog anchor".into());
        }
        for (r, t) in self.radii.iter().zip(&self.tensors) {
            if t.0.iter().flatten().any(|v| !v.is_finite()) {
                return inv(format!("non-finite tensor at r = {r}"));
            }
            t.check(TENSOR_TOL).map_err(|e| TableError::Invariant(format!("r = {r}: {e}")))?;
        }
        for i in 1..self.len() {
            if self.tensors[i].0[0][0] >= self.tensors[i - 1].0[0][0] {
                return inv(format!("tau11 not strictly decreasing at r = {}", self.radii[i]));
            }
        }
        Ok(())
    }

    /// Piecewise-linear interpolation in `r`, clamped below the first radius;
    /// zero for `r >= 1/2`.
    pub fn interpolate(&self, r: f64) -> TortuosityTensor {
        if r >= CLOG_RADIUS {
            return TortuosityTensor::ZERO;
        }
        if r <= self.radii[0] {
            return self.tensors[0];
        }
        let hi = self.radii.partition_point(|x| *x < r);
        if hi == self.len() {
            return *self.tensors.last().unwrap();
        }
        if self.radii[hi] == r {
            return self.tensors[hi];
        }
        let lo = hi - 1;
        let t = (r - self.radii[lo]) / (self.radii[hi] - self.radii[lo]);
        self.tensors[lo].lerp(&self.tensors[hi], t)
    }

    /// Largest entrywise slope `|delta tau| / delta r` over the segments.
    pub fn lipschitz_constant(&self) -> f64 {
        (1..self.len())
            .map(|i| {
                self.tensors[i].max_abs_diff(&self.tensors[i - 1]) / (self.radii[i] - self.radii[i - 1])
            })
            .fold(0.0, f64::max)
    }

    /// `max_r phi(r) tau11(r)` over the stored entries.
    pub fn max_phi_tau11(&self, domain_area: f64) -> f64 {
        self.radii
            .iter()
            .zip(&self.tensors)
            .map(|(r, t)| porosity(*r, domain_area) * t.0[0][0].max(t.0[1][1]))
            .fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{HEADER_TAG} n_theta={} n_rho={}\n",
            self.mesh_meta.n_theta, self.mesh_meta.n_rho
        );
        for (r, t) in self.radii.iter().zip(&self.tensors) {
            let [[a, b], [c, d]] = t.0;
            let _ = writeln!(s, "{r:.16e} {a:.16e} {b:.16e} {c:.16e} {d:.16e}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, TableError> {
        let malformed = |line: usize, reason: &str| TableError::Malformed { line, reason: reason.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| malformed(1, "empty file"))?;
        let rest = header
            .strip_prefix(HEADER_TAG)
            .ok_or_else(|| malformed(1, "missing format header"))?;
        let mut n_theta = None;
        let mut n_rho = None;
        for field in rest.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| malformed(1, "bad header field"))?;
            let value: usize = value.parse().map_err(|_| malformed(1, "bad header value"))?;
            match key {
                "n_theta" => n_theta = Some(value),
                "n_rho" => n_rho = Some(value),
                _ => return Err(malformed(1, "unknown header field")),
            }
        }
        let mesh_meta = MeshMeta {
            n_theta: n_theta.ok_or_else(|| malformed(1, "missing n_theta"))?,
            n_rho: n_rho.ok_or_else(|| malformed(1, "missing n_rho"))?,
        };

        let mut radii = Vec::new();
        let mut tensors = Vec::new();
        for (i, line) in lines {
            let values = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| malformed(i + 1, "unparsable number"))?;
            if values.len() != 5 {
                return Err(malformed(i + 1, "expected 5 columns"));
            }
            radii.push(values[0]);
            tensors.push(TortuosityTensor([[values[1], values[2]], [values[3], values[4]]]));
        }
        let clog_anchor =
            radii.last() == Some(&CLOG_RADIUS) && tensors.last().is_some_and(TortuosityTensor::is_zero);
        let table = TortuosityTable { radii, tensors, mesh_meta, clog_anchor };
        table.validate()?;
        Ok(table)
    }
}

pub fn save_table(table: &TortuosityTable, path: &Path) -> Result<(), TableError> {
    fs::write(path, table.to_text()).map_err(|source| TableError::Io { path: path.to_path_buf(), source })
}

pub fn load_table(path: &Path) -> Result<TortuosityTable, TableError> {
    let text = fs::read_to_string(path).map_err(|source| TableError::Io { path: path.to_path_buf(), source })?;
    TortuosityTable::from_text(&text)
}

/// Loads a table and reports whether its mesh resolution differs from `expected`.
pub fn load_table_checked(path: &Path, expected: MeshMeta) -> Result<(TortuosityTable, bool), TableError> {
    let table = load_table(path)?;
    let mismatch = table.mesh_meta != expected;
    Ok((table, mismatch))
}
