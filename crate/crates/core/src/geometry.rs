//! Triangulated perforated unit cell `Y \ B(r)` and the radial map that
//! carries a cell with one inclusion radius onto a cell with another.
//!
//! Meshes are structured: rays leave the cell centre at equally spaced angles
//! and every ray is split into layers between the inclusion boundary and the
//! square. With an angular count divisible by 8 the rays hit the four corners
//! and the edge midpoints, so nodes on opposite edges sit at matching heights
//! and periodic identification is exact.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::error::GeometryError;

/// Centre of the inclusion, `a = (1/2, 1/2)`.
pub const CELL_CENTER: [f64; 2] = [0.5, 0.5];

/// Largest radius accepted by the mesh generator.
pub const MAX_MESH_RADIUS: f64 = 0.5 - 1e-4;

/// A node on one side of the cell identified with a node on the opposite
/// side: `nodes[slave] == nodes[master] + shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicPair {
    pub master: usize,
    pub slave: usize,
    pub shift: [u8; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellMesh {
    pub radius: f64,
    pub n_theta: usize,
    pub n_rho: usize,
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    /// Nodes on the inclusion boundary, counter-clockwise around the centre.
    pub inner_boundary: Vec<usize>,
    pub periodic_pairs: Vec<PeriodicPair>,
}

impl CellMesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn dof_count(&self) -> usize {
        self.nodes.len() - self.periodic_pairs.len()
    }

    /// Node index to degree-of-freedom index, with slaves sharing their
    /// master's unknown.
    pub fn dof_map(&self) -> Vec<usize> {
        let mut master_of: Vec<Option<usize>> = vec![None; self.nodes.len()];
        for pair in &self.periodic_pairs {
            master_of[pair.slave] = Some(pair.master);
        }
        let mut map = vec![usize::MAX; self.nodes.len()];
        let mut next = 0;
        for (node, master) in master_of.iter().enumerate() {
            if master.is_none() {
                map[node] = next;
                next += 1;
            }
        }
        for (node, master) in master_of.iter().enumerate() {
            if let Some(m) = master {
                map[node] = map[*m];
            }
        }
        map
    }

    pub fn signed_area(&self, triangle: usize) -> f64 {
        let [a, b, c] = self.triangles[triangle];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    pub fn min_triangle_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.signed_area(t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks the structural invariants of the mesh.
    pub fn validate(&self) -> Result<(), GeometryError> {
        for (t, _) in self.triangles.iter().enumerate() {
            let area = self.signed_area(t);
            if !(area > 0.0) {
                return Err(GeometryError::DegenerateTriangle { triangle: t, area });
            }
        }
        Ok(())
    }

    /// Writes the node and triangle listing used for external inspection.
    pub fn dump(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.dump_string())
    }

    pub fn dump_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# nodes {}", self.nodes.len());
        for (i, [x, y]) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "{i} {x:e} {y:e}");
        }
        let _ = writeln!(out, "# triangles {}", self.triangles.len());
        for [a, b, c] in &self.triangles {
            let _ = writeln!(out, "{a} {b} {c}");
        }
        out
    }
}

pub(crate) fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

/// Point where the ray from the centre at angle index `i` leaves the square.
fn square_exit(i: usize, n_theta: usize) -> [f64; 2] {
    let eighth = n_theta / 8;
    if i.is_multiple_of(eighth) && (i / eighth) % 2 == 1 {
        return match i / eighth {
            1 => [1.0, 1.0],
            3 => [0.0, 1.0],
            5 => [0.0, 0.0],
            _ => [1.0, 0.0],
        };
    }
    let theta = 2.0 * PI * i as f64 / n_theta as f64;
    let (s, c) = theta.sin_cos();
    if c.abs() >= s.abs() {
        [0.5 + 0.5 * c.signum(), 0.5 + 0.5 * s / c.abs()]
    } else {
        [0.5 + 0.5 * c / s.abs(), 0.5 + 0.5 * s.signum()]
    }
}

/// Builds the structured polar mesh of `Y \ B(r)`.
pub fn build_cell_mesh(r: f64, n_theta: usize, n_rho: usize) -> Result<CellMesh, GeometryError> {
    if !(r > 0.0 && r < MAX_MESH_RADIUS) {
        return Err(GeometryError::RadiusOutOfRange(r));
    }
    if n_theta == 0 || !n_theta.is_multiple_of(8) {
        return Err(GeometryError::AngularResolution(n_theta));
    }
    if n_rho < 2 {
        return Err(GeometryError::RadialResolution(n_rho));
    }

    let per_ray = n_rho + 1;
    let idx = |i: usize, j: usize| i * per_ray + j;
    let mut nodes = Vec::with_capacity(n_theta * per_ray);
    for i in 0..n_theta {
        let theta = 2.0 * PI * i as f64 / n_theta as f64;
        let (s, c) = theta.sin_cos();
        let exit = square_exit(i, n_theta);
        let reach = ((exit[0] - 0.5).powi(2) + (exit[1] - 0.5).powi(2)).sqrt();
        for j in 0..n_rho {
            let rho = r + (reach - r) * j as f64 / n_rho as f64;
            nodes.push([CELL_CENTER[0] + rho * c, CELL_CENTER[1] + rho * s]);
        }
        nodes.push(exit);
    }

    let mut triangles = Vec::with_capacity(2 * n_theta * n_rho);
    for i in 0..n_theta {
        let next = (i + 1) % n_theta;
        for j in 0..n_rho {
            let (p00, p01) = (idx(i, j), idx(i, j + 1));
            let (p10, p11) = (idx(next, j), idx(next, j + 1));
            triangles.push([p00, p01, p11]);
            triangles.push([p00, p11, p10]);
        }
    }

    let eighth = n_theta / 8;
    let outer = |i: usize| idx(i % n_theta, n_rho);
    let mut periodic_pairs = Vec::new();
    for i in 0..n_theta {
        let pair = if i.is_multiple_of(eighth) && (i / eighth) % 2 == 1 {
            // Corners all collapse onto (0, 0).
            let master = outer(5 * eighth);
            match i / eighth {
                1 => Some((master, [1, 1])),
                3 => Some((master, [0, 1])),
                7 => Some((master, [1, 0])),
                _ => None,
            }
        } else if i < eighth || i > 7 * eighth {
            // Right edge, mirrored through the vertical axis onto the left edge.
            Some((outer(n_theta / 2 + n_theta - i), [1, 0]))
        } else if i > eighth && i < 3 * eighth {
            // Top edge, mirrored onto the bottom edge.
            Some((outer(n_theta - i), [0, 1]))
        } else {
            None
        };
        if let Some((master, shift)) = pair {
            let slave = outer(i);
            let m = nodes[master];
            nodes[slave] = [m[0] + f64::from(shift[0]), m[1] + f64::from(shift[1])];
            periodic_pairs.push(PeriodicPair { master, slave, shift });
        }
    }

    let inner_boundary = (0..n_theta).map(|i| idx(i, 0)).collect();
    let mesh = CellMesh {
        radius: r,
        n_theta,
        n_rho,
        nodes,
        triangles,
        inner_boundary,
        periodic_pairs,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Radial blending profile of the cell-to-cell map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffProfile {
    /// Cubic smoothstep cutoff `chi` on `[from, 1/2]`; the map is smooth.
    Smoothstep,
    /// Radius mapped affinely between the inclusion boundary and `|y - a| = 1/2`.
    /// Maps with swapped radii are exact inverses of one another.
    RadialAffine,
}

/// The map `xi` taking `Y \ B(from_radius)` onto `Y \ B(to_radius)`:
/// identity for `|y - a| >= 1/2`, pure scaling by `to/from` inside the
/// inclusion, and a radial blend in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialMap {
    pub from_radius: f64,
    pub to_radius: f64,
    pub cutoff: CutoffProfile,
}

impl RadialMap {
    pub fn new(from_radius: f64, to_radius: f64, cutoff: CutoffProfile) -> Result<Self, GeometryError> {
        for r in [from_radius, to_radius] {
            if !(r > 0.0 && r < 0.5) {
                return Err(GeometryError::RadiusOutOfRange(r));
            }
        }
        let map = RadialMap { from_radius, to_radius, cutoff };
        if cutoff == CutoffProfile::Smoothstep {
            let eps1 = 1.0 - 2.0 * from_radius.max(to_radius);
            let steepest = 1.5 / (0.5 - from_radius);
            assert!(
                steepest <= 4.0 / eps1,
                "cutoff slope {steepest} exceeds 4/eps1 = {}",
                4.0 / eps1
            );
        }
        Ok(map)
    }

    fn ratio(&self) -> f64 {
        self.to_radius / self.from_radius
    }

    /// Cutoff `chi(z)` on `[from, 1/2]`, with `chi(from) = 1` and `chi(1/2) = 0`.
    pub fn chi(&self, z: f64) -> f64 {
        let z = z.clamp(self.from_radius, 0.5);
        match self.cutoff {
            CutoffProfile::Smoothstep => {
                let s = (z - self.from_radius) / (0.5 - self.from_radius);
                1.0 - s * s * (3.0 - 2.0 * s)
            }
            CutoffProfile::RadialAffine => {
                let k = self.ratio();
                if (1.0 - k).abs() < f64::EPSILON {
                    return 1.0 - (z - self.from_radius) / (0.5 - self.from_radius);
                }
                let (g, _) = self.scale(z);
                (1.0 - g) / (1.0 - k)
            }
        }
    }

    /// Radial scale factor `g(rho)` with `xi(y) = a + g(|y-a|) (y - a)`, and its derivative.
    pub fn scale(&self, rho: f64) -> (f64, f64) {
        let k = self.ratio();
        if rho >= 0.5 {
            return (1.0, 0.0);
        }
        if rho <= self.from_radius {
            return (k, 0.0);
        }
        match self.cutoff {
            CutoffProfile::Smoothstep => {
                let h = 0.5 - self.from_radius;
                let s = (rho - self.from_radius) / h;
                let chi = 1.0 - s * s * (3.0 - 2.0 * s);
                let dchi = -6.0 * s * (1.0 - s) / h;
                (1.0 + (k - 1.0) * chi, (k - 1.0) * dchi)
            }
            CutoffProfile::RadialAffine => {
                let c = (0.5 - self.to_radius) / (0.5 - self.from_radius);
                let f = 0.5 + (rho - 0.5) * c;
                (f / rho, (c * rho - f) / (rho * rho))
            }
        }
    }

    pub fn apply(&self, y: [f64; 2]) -> [f64; 2] {
        let p = [y[0] - CELL_CENTER[0], y[1] - CELL_CENTER[1]];
        let rho = p[0].hypot(p[1]);
        if rho >= 0.5 {
            return y;
        }
        let (g, _) = self.scale(rho);
        [CELL_CENTER[0] + g * p[0], CELL_CENTER[1] + g * p[1]]
    }

    /// `D xi = g I + (g'/rho) p p^T` with `p = y - a`.
    pub fn jacobian(&self, y: [f64; 2]) -> [[f64; 2]; 2] {
        let p = [y[0] - CELL_CENTER[0], y[1] - CELL_CENTER[1]];
        let rho = p[0].hypot(p[1]);
        let (g, dg) = self.scale(rho);
        let b = if rho > 0.0 { dg / rho } else { 0.0 };
        [
            [g + b * p[0] * p[0], b * p[0] * p[1]],
            [b * p[0] * p[1], g + b * p[1] * p[1]],
        ]
    }

    pub fn jacobian_determinant(&self, y: [f64; 2]) -> f64 {
        let j = self.jacobian(y);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }
}

/// Sampled extremes of `det D xi` over the blend annulus `from <= |y-a| <= 1/2`.
pub fn jacobian_determinant_bounds(map: &RadialMap) -> (f64, f64) {
    const RADIAL: usize = 400;
    const ANGULAR: usize = 64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..=RADIAL {
        let rho = map.from_radius + (0.5 - map.from_radius) * i as f64 / RADIAL as f64;
        for k in 0..ANGULAR {
            let theta = 2.0 * PI * (k as f64 + 0.25) / ANGULAR as f64;
            let y = [CELL_CENTER[0] + rho * theta.cos(), CELL_CENTER[1] + rho * theta.sin()];
            let det = map.jacobian_determinant(y);
            lo = lo.min(det);
            hi = hi.max(det);
        }
    }
    (lo, hi)
}

/// Moves the mesh nodes with the radial-affine map onto a cell of radius
/// `r_target`, keeping connectivity.
pub fn apply_radial_map(mesh: &CellMesh, r_target: f64) -> Result<CellMesh, GeometryError> {
    let map = RadialMap::new(mesh.radius, r_target, CutoffProfile::RadialAffine)?;
    let mut mapped = mesh.clone();
    mapped.radius = r_target;
    if r_target != mesh.radius {
        for node in mapped.nodes.iter_mut() {
            *node = map.apply(*node);
        }
    }
    mapped.validate()?;
    Ok(mapped)
}

/// Maps an existing mesh to a new radius, rebuilding from scratch when the
/// mapped mesh is invalid.
pub fn remap_or_rebuild(mesh: &CellMesh, r_target: f64) -> Result<CellMesh, GeometryError> {
    match apply_radial_map(mesh, r_target) {
        Ok(m) => Ok(m),
        Err(GeometryError::DegenerateTriangle { .. }) => {
            build_cell_mesh(r_target, mesh.n_theta, mesh.n_rho)
        }
        Err(e) => Err(e),
    }
}
