//! Periodic cell problems on the perforated unit cell and the resulting
//! tortuosity tensor.
//!
//! For `k = 1, 2` the corrector `w_k` solves `-Δw_k = 0` in the fluid part of
//! the cell, `-∇w_k·n = e_k·n` on the inclusion boundary, with periodic
//! conditions on the square. Discretisation is piecewise-linear on the
//! [`CellMesh`](crate::geometry::CellMesh); the inclusion-boundary load uses
//! the outward chord normal of every boundary segment, so the discrete load
//! integrates to zero against constants.

use serde::{Deserialize, Serialize};

use crate::error::CellError;
use crate::geometry::CellMesh;
use crate::sparse::{solve_csr, CsrMatrix};

/// Relative residual targeted by the cell solves.
pub const CELL_SOLVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    pub radius: f64,
    /// Nodal values of `w_1` and `w_2`, zero area-mean.
    pub w: [Vec<f64>; 2],
    /// Area-weighted means after normalisation.
    pub mean: [f64; 2],
    /// Relative residual `|K w - b| / |b|` of the full (unpinned) system.
    pub residual: [f64; 2],
}

/// Symmetric 2x2 tortuosity tensor `tau_jk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TortuosityTensor(pub [[f64; 2]; 2]);

impl TortuosityTensor {
    pub const ZERO: TortuosityTensor = TortuosityTensor([[0.0; 2]; 2]);
    pub const IDENTITY: TortuosityTensor = TortuosityTensor([[1.0, 0.0], [0.0, 1.0]]);

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.0[j][k]
    }

    pub fn symmetrized(&self) -> Self {
        let off = 0.5 * (self.0[0][1] + self.0[1][0]);
        TortuosityTensor([[self.0[0][0], off], [off, self.0[1][1]]])
    }

    pub fn asymmetry(&self) -> f64 {
        (self.0[0][1] - self.0[1][0]).abs()
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        sym_eigenvalues(self.symmetrized().0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().flatten().all(|v| *v == 0.0)
    }

    /// Entrywise `(1 - t) self + t other`.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        let mut out = [[0.0; 2]; 2];
        for j in 0..2 {
            for k in 0..2 {
                out[j][k] = (1.0 - t) * self.0[j][k] + t * other.0[j][k];
            }
        }
        TortuosityTensor(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..2 {
            for k in 0..2 {
                m = m.max((self.0[j][k] - other.0[j][k]).abs());
            }
        }
        m
    }

    /// Checks symmetry, positive semidefiniteness and the unit upper bound
    /// of the eigenvalues, each within `tol`.
    pub fn check(&self, tol: f64) -> Result<(), String> {
        if self.asymmetry() > tol {
            return Err(format!("asymmetric tensor (|tau12 - tau21| = {:e})", self.asymmetry()));
        }
        let [lo, hi] = self.eigenvalues();
        if lo < -tol {
            return Err(format!("tensor not positive semidefinite (eigenvalue {lo:e})"));
        }
        if hi > 1.0 + tol {
            return Err(format!("tensor eigenvalue {hi} exceeds 1"));
        }
        Ok(())
    }
}

pub(crate) fn sym_eigenvalues(m: [[f64; 2]; 2]) -> [f64; 2] {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let half_diff = 0.5 * (m[0][0] - m[1][1]);
    let rad = half_diff.hypot(m[0][1]);
    [mean - rad, mean + rad]
}

struct TriangleGeometry {
    area: f64,
    /// Gradients of the three hat functions.
    grads: [[f64; 2]; 3],
}

fn triangle_geometry(mesh: &CellMesh, t: usize) -> TriangleGeometry {
    let [i0, i1, i2] = mesh.triangles[t];
    let (p0, p1, p2) = (mesh.nodes[i0], mesh.nodes[i1], mesh.nodes[i2]);
    let area = mesh.signed_area(t);
    let s = 1.0 / (2.0 * area);
    let grads = [
        [(p1[1] - p2[1]) * s, (p2[0] - p1[0]) * s],
        [(p2[1] - p0[1]) * s, (p0[0] - p2[0]) * s],
        [(p0[1] - p1[1]) * s, (p1[0] - p0[0]) * s],
    ];
    TriangleGeometry { area, grads }
}

/// Assembled periodic system: stiffness over degrees of freedom and the two
/// inclusion-boundary loads.
#[derive(Debug, Clone)]
pub struct CellSystem {
    pub stiffness: CsrMatrix,
    pub loads: [Vec<f64>; 2],
    pub dof_map: Vec<usize>,
}

pub fn assemble_cell_system(mesh: &CellMesh) -> CellSystem {
    let dof_map = mesh.dof_map();
    let n = mesh.dof_count();
    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let geo = triangle_geometry(mesh, t);
        for a in 0..3 {
            for b in 0..3 {
                let g = geo.grads[a][0] * geo.grads[b][0] + geo.grads[a][1] * geo.grads[b][1];
                triplets.push((dof_map[tri[a]], dof_map[tri[b]], geo.area * g));
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(n, triplets);

    let mut loads = [vec![0.0; n], vec![0.0; n]];
    let ring = &mesh.inner_boundary;
    for (i, &p) in ring.iter().enumerate() {
        let q = ring[(i + 1) % ring.len()];
        let (a, b) = (mesh.nodes[p], mesh.nodes[q]);
        // Counter-clockwise edge; its right-hand normal points away from the centre.
        let normal_len = [b[1] - a[1], a[0] - b[0]];
        for k in 0..2 {
            loads[k][dof_map[p]] += 0.5 * normal_len[k];
            loads[k][dof_map[q]] += 0.5 * normal_len[k];
        }
    }
    CellSystem { stiffness, loads, dof_map }
}

/// Area-weighted mean of a nodal field over the mesh.
pub fn area_mean(mesh: &CellMesh, field: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut area = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let a = mesh.signed_area(t);
        acc += a * (field[tri[0]] + field[tri[1]] + field[tri[2]]) / 3.0;
        area += a;
    }
    acc / area
}

/// Solves both cell problems on `mesh`.
pub fn solve_cell_problem(mesh: &CellMesh) -> Result<CellSolution, CellError> {
    mesh.validate()?;
    let system = assemble_cell_system(mesh);
    let n = system.stiffness.n;

    // Pin dof 0: drop its row and column.
    let mut reduced = Vec::with_capacity(system.stiffness.vals.len());
    for i in 1..n {
        for k in system.stiffness.row_ptr[i]..system.stiffness.row_ptr[i + 1] {
            let j = system.stiffness.cols[k];
            if j != 0 {
                reduced.push((i - 1, j - 1, system.stiffness.vals[k]));
            }
        }
    }
    let reduced = CsrMatrix::from_triplets(n - 1, reduced);

    let mut w: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut mean = [0.0; 2];
    let mut residual = [0.0; 2];
    for k in 0..2 {
        let load = &system.loads[k];
        let total: f64 = load.iter().sum();
        if total.abs() > 1e-8 {
            return Err(CellError::Compatibility { direction: k + 1, value: total.abs() });
        }
        let mut x = vec![0.0; n - 1];
        solve_csr(&reduced, &load[1..], &mut x, CELL_SOLVE_TOL, 20 * n)?;
        let mut dofs = Vec::with_capacity(n);
        dofs.push(0.0);
        dofs.extend_from_slice(&x);

        let mut kw = vec![0.0; n];
        system.stiffness.mul_vec(&dofs, &mut kw);
        let b_norm = load.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r_norm = kw.iter().zip(load).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        residual[k] = if b_norm > 0.0 { r_norm / b_norm } else { r_norm };

        let mut nodal: Vec<f64> = system.dof_map.iter().map(|&d| dofs[d]).collect();
        let m = area_mean(mesh, &nodal);
        nodal.iter_mut().for_each(|v| *v -= m);
        mean[k] = area_mean(mesh, &nodal);
        w[k] = nodal;
    }
    Ok(CellSolution { radius: mesh.radius, w, mean, residual })
}

/// Unsymmetrised `tau_jk = sum_T |T| (delta_jk + d_j w_k)`.
pub fn raw_tortuosity(mesh: &CellMesh, sol: &CellSolution) -> TortuosityTensor {
    let mut tau = [[0.0; 2]; 2];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let geo = triangle_geometry(mesh, t);
        for k in 0..2 {
            let mut grad = [0.0; 2];
            for a in 0..3 {
                let value = sol.w[k][tri[a]];
                grad[0] += value * geo.grads[a][0];
                grad[1] += value * geo.grads[a][1];
            }
            for j in 0..2 {
                let delta = if j == k { 1.0 } else { 0.0 };
                tau[j][k] += geo.area * (delta + grad[j]);
            }
        }
    }
    TortuosityTensor(tau)
}

/// Tortuosity tensor, symmetrised.
pub fn tortuosity(mesh: &CellMesh, sol: &CellSolution) -> TortuosityTensor {
    raw_tortuosity(mesh, sol).symmetrized()
}

/// Porosity density `phi(r) = (1 - pi r^2) / |Omega|`.
pub fn porosity(r: f64, domain_area: f64) -> f64 {
    (1.0 - std::f64::consts::PI * r * r) / domain_area
}

/// Effective diffusion matrix `D = d_i phi(r) tau`.
pub fn effective_diffusivity(tau: &TortuosityTensor, r: f64, d_i: f64, domain_area: f64) -> [[f64; 2]; 2] {
    let s = d_i * porosity(r, domain_area);
    [[s * tau.0[0][0], s * tau.0[0][1]], [s * tau.0[1][0], s * tau.0[1][1]]]
}

/// Builds the mesh and returns the tortuosity tensor for radius `r`.
pub fn cell_tortuosity(r: f64, n_theta: usize, n_rho: usize) -> Result<TortuosityTensor, CellError> {
    let mesh = crate::geometry::build_cell_mesh(r, n_theta, n_rho)?;
    let sol = solve_cell_problem(&mesh)?;
    Ok(tortuosity(&mesh, &sol))
}
