//! Sparse symmetric matrices, a Jacobi-preconditioned conjugate gradient
//! solver, and a sparse Cholesky wrapper.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with both triangles stored.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from triplets, summing duplicates in input order.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        // stable sort keeps the summation order reproducible
        entries.sort_by_key(|e| (e.0, e.1));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut data: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].iter().copied().zip(self.data[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        match self.indices[a..b].binary_search(&j) {
            Ok(p) => self.data[a + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`; rows are independent so the result is thread-count invariant.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    /// `A + s D` for a diagonal `D`.
    pub fn add_diagonal(&self, d: &[f64], s: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            let (a, b) = (m.indptr[i], m.indptr[i + 1]);
            if let Ok(p) = m.indices[a..b].binary_search(&i) {
                m.data[a + p] += s * d[i];
            }
        }
        m
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let mut entries = Vec::new();
        for (k, &i) in keep.iter().enumerate() {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    entries.push((k, map[j], v));
                }
            }
        }
        Self::from_triplets(keep.len(), entries)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= s);
        m
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`, stopping when
/// `‖b − Ax‖ ≤ tol ‖b‖`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<(Vec<f64>, CgReport)> {
    let n = a.n;
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::LinearSolve(f64::NAN));
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    let ax = a.matvec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let bn = norm(b);
    if bn == 0.0 {
        return Ok((
            vec![0.0; n],
            CgReport {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = norm(&r) / bn;
    let mut it = 0;
    while rel > tol && it < max_iter {
        let ap = a.matvec(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rel = norm(&r) / bn;
        it += 1;
    }
    if rel > tol {
        return Err(Error::LinearSolve(rel));
    }
    Ok((
        x,
        CgReport {
            iterations: it,
            relative_residual: rel,
        },
    ))
}

/// Sparse Cholesky factorization of an SPD matrix.
pub struct Cholesky {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl Cholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut trip = Vec::with_capacity(a.data.len() / 2 + a.n);
        for i in 0..a.n {
            for (j, v) in a.row(i) {
                if j <= i {
                    trip.push(Triplet::new(i, j, v));
                }
            }
        }
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &trip)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let llt = m
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self { n: a.n, llt })
    }

    /// Solves for every column of `rhs` (column-major, `n` rows).
    pub fn solve_columns(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut m = Mat::<f64>::from_fn(self.n, rhs.len(), |i, j| rhs[j][i]);
        self.llt.solve_in_place(m.as_mut());
        (0..rhs.len())
            .map(|j| (0..self.n).map(|i| m[(i, j)]).collect())
            .collect()
    }

    /// Solves in place for every column of `rhs`.
    pub fn solve_mat(&self, rhs: faer::MatMut<'_, f64>) {
        self.llt.solve_in_place(rhs);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_columns(&[b.to_vec()]).pop().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_laplacian(n: usize, shift: f64) -> CsrMatrix {
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, i, 2.0 + shift));
            if i + 1 < n {
                e.push((i, i + 1, -1.0));
                e.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, e)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn cg_and_cholesky_agree() {
        let a = path_laplacian(50, 0.1);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let (x, rep) = pcg(&a, &b, None, 1e-12, 1000).unwrap();
        assert!(rep.relative_residual <= 1e-12);
        let y = Cholesky::new(&a).unwrap().solve(&b);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-9);
        }
        let r: Vec<f64> = a.matvec(&y).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&r) < 1e-12);
    }

    #[test]
    fn submatrix_keeps_order() {
        let a = path_laplacian(5, 0.0);
        let s = a.submatrix(&[3, 1, 2]);
        assert_eq!(s.get(0, 2), -1.0);
        assert_eq!(s.get(1, 2), -1.0);
        assert_eq!(s.get(0, 1), 0.0);
    }
}
