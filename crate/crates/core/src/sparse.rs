//! Compressed sparse rows and a Jacobi-preconditioned conjugate gradient.

use crate::error::SolveError;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a square matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map_or(0.0, |k| self.vals[k])
            })
            .collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .find(|&k| self.cols[k] == j)
            .map_or(0.0, |k| self.vals[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive-definite `A` given as an operator,
/// starting from the contents of `x`. Stops once `|b - A x| <= rel_tol |b|`.
pub fn pcg<A>(
    apply: A,
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgReport, SolveError>
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport { iterations: 0, relative_residual: 0.0 });
    }
    let inv_diag: Vec<f64> = diag.iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();

    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut res = dot(&r, &r).sqrt() / b_norm;
    if res <= rel_tol {
        return Ok(CgReport { iterations: 0, relative_residual: res });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolveError::Indefinite);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt() / b_norm;
        if res <= rel_tol {
            return Ok(CgReport { iterations: it, relative_residual: res });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::NotConverged { iterations: max_iter, residual: res })
}

/// [`pcg`] on an assembled matrix.
pub fn solve_csr(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgReport, SolveError> {
    let diag = a.diagonal();
    pcg(|v, out| a.mul_vec(v, out), &diag, b, x, rel_tol, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.diagonal(), vec![4.0, 0.0]);
    }

    #[test]
    fn identity_solve() {
        let m = CsrMatrix::from_triplets(3, (0..3).map(|i| (i, i, 1.0)).collect());
        let b = [1.0, 2.0, 3.0];
        let mut x = [0.0; 3];
        solve_csr(&m, &b, &mut x, 1e-14, 10).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn tridiagonal_matches_exact_solution() {
        let n = 50;
        let a = laplacian_1d(n);
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&exact, &mut b);
        let mut x = vec![0.0; n];
        let rep = solve_csr(&a, &b, &mut x, 1e-13, 500).unwrap();
        assert!(rep.relative_residual <= 1e-13);
        for (xi, ei) in x.iter().zip(&exact) {
            assert!((xi - ei).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplacian_1d(4);
        let mut x = vec![1.0; 4];
        let rep = solve_csr(&a, &[0.0; 4], &mut x, 1e-12, 10).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(x, vec![0.0; 4]);
    }

    #[test]
    fn reports_non_convergence() {
        let a = laplacian_1d(100);
        let b = vec![1.0; 100];
        let mut x = vec![0.0; 100];
        let err = solve_csr(&a, &b, &mut x, 1e-14, 3).unwrap_err();
        assert!(matches!(err, SolveError::NotConverged { iterations: 3, .. }));
    }
}
