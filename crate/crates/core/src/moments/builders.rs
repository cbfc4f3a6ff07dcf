//! Coefficient matrices of the closed moment systems `dM/dt = A M + C`.

use crate::env::DiffusionSelectionSpec;
use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;

/// Which moment hierarchy a matrix closes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClosureKind {
    /// `E[X^k]`, k = 1..N, of a two-species community.
    TwoSpecies,
    /// `E[X^n Y^k]`, max(n,k) <= N, of a three-species community.
    ThreeSpecies,
    /// `E[X^n v^k]` for two species whose selection is `c v - b`.
    WfSelection,
}

impl ClosureKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::TwoSpecies => "two_species",
            Self::ThreeSpecies => "three_species",
            Self::WfSelection => "wf_selection",
        }
    }

    pub fn dim(self, order: usize) -> usize {
        match self {
            Self::TwoSpecies => order,
            Self::ThreeSpecies | Self::WfSelection => (order + 1) * (order + 1) - 1,
        }
    }
}

/// Flat index of bivariate exponents: `phi(n, k) = n (N+1) + k - 1`, with the
/// constant `(0, 0)` excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BivariateIndex {
    order: usize,
}

impl BivariateIndex {
    pub fn new(order: usize) -> Self {
        Self { order }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        (self.order + 1) * (self.order + 1) - 1
    }

    /// `None` for the constant or exponents beyond the closure.
    #[inline]
    pub fn index(&self, n: usize, k: usize) -> Option<usize> {
        if n > self.order || k > self.order || (n == 0 && k == 0) {
            None
        } else {
            Some(n * (self.order + 1) + k - 1)
        }
    }

    #[inline]
    pub fn exponents(&self, i: usize) -> (usize, usize) {
        let j = i + 1;
        (j / (self.order + 1), j % (self.order + 1))
    }
}

/// Sparse coefficient matrix with a constant forcing term.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureMatrix {
    pub kind: ClosureKind,
    pub order: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    constant: Vec<f64>,
}

impl ClosureMatrix {
    fn from_rows(kind: ClosureKind, order: usize, rows: Vec<Vec<(usize, f64)>>, constant: Vec<f64>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (c, v) in row {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { kind, order, row_ptr, cols, vals, constant }
    }

    pub fn dim(&self) -> usize {
        self.constant.len()
    }

    pub fn constant_term(&self) -> &[f64] {
        &self.constant
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().position(|&c| c == j).map_or(0.0, |p| self.vals[a + p])
    }

    /// Nonzero `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }

    /// `out = A y + C`
    #[inline]
    pub fn apply(&self, y: &[f64], out: &mut [f64]) {
        for i in 0..self.constant.len() {
            let mut acc = self.constant[i];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * y[self.cols[p]];
            }
            out[i] = acc;
        }
    }

    pub fn to_dense(&self) -> SquareMatrix {
        let n = self.dim();
        let mut a = SquareMatrix::zeros(n);
        for i in 0..n {
            for (j, v) in self.row(i) {
                a.set(i, j, v);
            }
        }
        a
    }
}

fn check_order(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidOrder(n));
    }
    Ok(())
}

/// Two-species tridiagonal system for `E[X^k]`, k = 1..N.
///
/// Row k: `k(k-1+mp)` on moment k-1, `k(s-(k-1)-m)` on moment k and `-ks` on
/// moment k+1. The last row drops its `N s E[X^N (1-X)]` remainder, leaving
/// `-N(N-1+m)` on the diagonal.
pub fn build_two_species(order: usize, m: f64, p: f64, s: f64) -> Result<ClosureMatrix> {
    check_order(order)?;
    let mut rows = Vec::with_capacity(order);
    let mut constant = vec![0.0; order];
    for k in 1..=order {
        let kf = k as f64;
        let mut row = Vec::with_capacity(3);
        let lower = kf * (kf - 1.0 + m * p);
        if k == 1 {
            constant[0] = lower;
        } else {
            row.push((k - 2, lower));
        }
        if k < order {
            row.push((k - 1, kf * (s - (kf - 1.0) - m)));
            row.push((k, -kf * s));
        } else {
            row.push((k - 1, -kf * (kf - 1.0 + m)));
        }
        rows.push(row);
    }
    Ok(ClosureMatrix::from_rows(ClosureKind::TwoSpecies, order, rows, constant))
}

/// Generic bivariate row assembly: `terms` lists `(dn, dk, coefficient)` with
/// exponent shifts in {-1, 0, 1}; shifts landing on the constant feed `C`,
/// those beyond the closure are dropped.
fn build_bivariate(
    kind: ClosureKind,
    order: usize,
    terms: impl Fn(usize, usize) -> [(i64, i64, f64); 6],
) -> ClosureMatrix {
    let idx = BivariateIndex::new(order);
    let dim = idx.dim();
    let mut rows = Vec::with_capacity(dim);
    let mut constant = vec![0.0; dim];
    for i in 0..dim {
        let (n, k) = idx.exponents(i);
        let mut row = Vec::with_capacity(6);
        for (dn, dk, coeff) in terms(n, k) {
            if coeff == 0.0 {
                continue;
            }
            let (nn, kk) = (n as i64 + dn, k as i64 + dk);
            if nn < 0 || kk < 0 {
                continue;
            }
            let (nn, kk) = (nn as usize, kk as usize);
            if nn == 0 && kk == 0 {
                constant[i] += coeff;
            } else if let Some(j) = idx.index(nn, kk) {
                row.push((j, coeff));
            }
        }
        row.sort_by_key(|&(j, _)| j);
        rows.push(row);
    }
    ClosureMatrix::from_rows(kind, order, rows, constant)
}

/// Three-species system for `E[X^n Y^k]`, max(n,k) <= N.
pub fn build_three_species(order: usize, m: f64, p_x: f64, p_y: f64, s_x: f64, s_y: f64) -> Result<ClosureMatrix> {
    check_order(order)?;
    Ok(build_bivariate(ClosureKind::ThreeSpecies, order, |n, k| {
        let (nf, kf) = (n as f64, k as f64);
        [
            (-1, 0, nf * (m * p_x + nf - 1.0)),
            (0, -1, kf * (m * p_y + kf - 1.0)),
            (
                0,
                0,
                -m * (nf + kf) - 2.0 * kf * nf - kf * (kf - 1.0) - nf * (nf - 1.0) + nf * s_x + kf * s_y,
            ),
            (1, 0, -s_x * (nf + kf)),
            (0, 1, -s_y * (nf + kf)),
            (1, 1, 0.0),
        ]
    }))
}

/// System for `E[X^n v^k]` where X has immigration `(m, p)` and selection
/// `c v - b`, and v is a neutral Wright-Fisher diffusion with immigration
/// `(m_s, p_s)`.
pub fn build_wf_selection(order: usize, m: f64, p: f64, spec: &DiffusionSelectionSpec) -> Result<ClosureMatrix> {
    check_order(order)?;
    let DiffusionSelectionSpec { c, b, m_s, p_s, .. } = *spec;
    Ok(build_bivariate(ClosureKind::WfSelection, order, |n, k| {
        let (nf, kf) = (n as f64, k as f64);
        [
            (-1, 0, nf * (m * p + nf - 1.0)),
            (0, -1, kf * (m_s * p_s + kf - 1.0)),
            (0, 0, -(m + b) * nf - kf * m_s - kf * (kf - 1.0) - nf * (nf - 1.0)),
            (1, 0, nf * b),
            (0, 1, c * nf),
            (1, 1, -nf * c),
        ]
    }))
}
