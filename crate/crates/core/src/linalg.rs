//! Small dense linear algebra: square matrices, pivoted Cholesky and the
//! symmetric tridiagonal eigenproblem.

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("matrix rows must all have length n".into()));
        }
        Ok(Self { n, data: rows.iter().flatten().copied().collect() })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `self * self^T`
    pub fn gram(&self) -> SquareMatrix {
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.get(i, k) * self.get(j, k);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn frobenius_distance(&self, other: &SquareMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

/// Pivoted Cholesky factor of a symmetric positive semidefinite matrix.
///
/// Returns `sigma` with `sigma * sigma^T = a`. Columns whose pivot falls below
/// `rank_tol` are left at zero. Fails when the matrix is indefinite by more
/// than `neg_tol`.
pub fn pivoted_cholesky(a: &SquareMatrix, rank_tol: f64, neg_tol: f64) -> Result<SquareMatrix> {
    let n = a.dim();
    let mut work = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    // lower-triangular factor in pivoted order
    let mut l = SquareMatrix::zeros(n);
    let mut rank = n;
    for k in 0..n {
        let (piv, &dmax) = (k..n)
            .map(|i| (i, &work.data[perm[i] * n + perm[i]]))
            .max_by(|x, y| x.1.total_cmp(y.1))
            .expect("non-empty range");
        if dmax <= rank_tol {
            if dmax < -neg_tol {
                return Err(Error::NumericalDomain(format!(
                    "matrix is not positive semidefinite (pivot {dmax:e})"
                )));
            }
            rank = k;
            break;
        }
        perm.swap(k, piv);
        l.swap_rows(k, piv, k);
        let pk = perm[k];
        let lkk = dmax.sqrt();
        l.set(k, k, lkk);
        for i in k + 1..n {
            let pi = perm[i];
            l.set(i, k, work.get(pi, pk) / lkk);
        }
        for i in k + 1..n {
            let pi = perm[i];
            let lik = l.get(i, k);
            for j in k + 1..=i {
                let pj = perm[j];
                let v = work.get(pi, pj) - lik * l.get(j, k);
                work.set(pi, pj, v);
                work.set(pj, pi, v);
            }
        }
    }
    // the trailing Schur complement must vanish
    for i in rank..n {
        for j in rank..n {
            let v = work.get(perm[i], perm[j]);
            if v.abs() > neg_tol.max(rank_tol) * 10.0 {
                return Err(Error::NumericalDomain(format!(
                    "matrix is not positive semidefinite (residual {v:e})"
                )));
            }
        }
    }
    let mut sigma = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            sigma.set(perm[i], j, l.get(i, j));
        }
    }
    Ok(sigma)
}

impl SquareMatrix {
    fn swap_rows(&mut self, a: usize, b: usize, upto: usize) {
        if a == b {
            return;
        }
        for j in 0..upto {
            self.data.swap(a * self.n + j, b * self.n + j);
        }
    }
}

/// Eigen-decomposition of a symmetric tridiagonal matrix by implicit QL.
///
/// `diag` has length n, `off` length n-1 (`off[i]` couples rows i and i+1).
/// Returns the eigenvalues (ascending) and, for each, the first component of
/// its normalized eigenvector. Those first components are what Golub-Welsch
/// quadrature needs.
pub fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if n == 0 {
        return Ok((vec![], vec![]));
    }
    if off.len() + 1 != n {
        return Err(Error::InvalidArgument("off-diagonal must have length n-1".into()));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm < n - 1 {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::NumericalDomain("tridiagonal QL did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = mm;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    Ok((idx.iter().map(|&i| d[i]).collect(), idx.iter().map(|&i| z[i]).collect()))
}
