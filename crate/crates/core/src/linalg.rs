//! Small dense kernels, a banded LU and thin wrappers over faer.

// Elimination loops index several arrays at once.
#![allow(clippy::needless_range_loop)]

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Mat, MatMut, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// LU factorization of a 4x4 complex matrix with partial pivoting.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Lu4 {
    lu: [[C64; 4]; 4],
    piv: [usize; 4],
    sign: f64,
    singular: bool,
}

impl Lu4 {
    pub(crate) fn new(m: [[C64; 4]; 4]) -> Self {
        let mut lu = m;
        let mut piv = [0, 1, 2, 3];
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..4 {
            let mut p = k;
            for r in k + 1..4 {
                if lu[r][k].norm() > lu[p][k].norm() {
                    p = r;
                }
            }
            if p != k {
                lu.swap(p, k);
                piv.swap(p, k);
                sign = -sign;
            }
            if lu[k][k] == ZERO {
                singular = true;
                continue;
            }
            for r in k + 1..4 {
                let l = lu[r][k] / lu[k][k];
                lu[r][k] = l;
                for c in k + 1..4 {
                    let t = lu[k][c];
                    lu[r][c] -= l * t;
                }
            }
        }
        Lu4 {
            lu,
            piv,
            sign,
            singular,
        }
    }

    pub(crate) fn det(&self) -> C64 {
        let mut d = C64::new(self.sign, 0.0);
        for k in 0..4 {
            d *= self.lu[k][k];
        }
        d
    }

    pub(crate) fn solve(&self, b: [C64; 4]) -> Option<[C64; 4]> {
        if self.singular {
            return None;
        }
        let mut x = [ZERO; 4];
        for i in 0..4 {
            x[i] = b[self.piv[i]];
        }
        for i in 0..4 {
            for j in 0..i {
                let t = self.lu[i][j] * x[j];
                x[i] -= t;
            }
        }
        for i in (0..4).rev() {
            for j in i + 1..4 {
                let t = self.lu[i][j] * x[j];
                x[i] -= t;
            }
            x[i] /= self.lu[i][i];
        }
        Some(x)
    }

    /// Infinity-norm condition number, computed through the explicit inverse.
    pub(crate) fn condition(&self, m: &[[C64; 4]; 4]) -> f64 {
        if self.singular {
            return f64::INFINITY;
        }
        let mut inv_cols = [[ZERO; 4]; 4];
        for (c, col) in inv_cols.iter_mut().enumerate() {
            let mut e = [ZERO; 4];
            e[c] = ONE;
            match self.solve(e) {
                Some(x) => *col = x,
                None => return f64::INFINITY,
            }
        }
        let norm_m = (0..4)
            .map(|i| m[i].iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let norm_inv = (0..4)
            .map(|i| (0..4).map(|c| inv_cols[c][i].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let k = norm_m * norm_inv;
        if k.is_finite() {
            k
        } else {
            f64::INFINITY
        }
    }
}

/// Band LU with partial pivoting for a square matrix with `kl` sub- and `ku`
/// superdiagonals. Pivoting widens the upper band of `U` to `kl + ku`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<C64>,
    lower: Vec<C64>,
    piv: Vec<usize>,
    min_pivot: f64,
}

impl BandedLu {
    /// Factors the band of `a`. Entries outside the band are ignored.
    pub fn factor(a: MatRef<'_, C64>, kl: usize, ku: usize) -> Self {
        let n = a.nrows();
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            data: vec![ZERO; n * width],
            lower: vec![ZERO; n * kl.max(1)],
            piv: vec![0; n],
            min_pivot: f64::INFINITY,
        };
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                *lu.at_mut(i, j) = a[(i, j)];
            }
        }
        lu.eliminate();
        lu
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> C64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        let k = self.idx(i, j);
        &mut self.data[k]
    }

    fn eliminate(&mut self) {
        let n = self.n;
        let span = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + span).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).norm();
            for r in k + 1..=last_row {
                let v = self.at(r, k).norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            self.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    // Row p may not reach column k + span; its slot exists but holds zero.
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.at(k, k);
            self.min_pivot = self.min_pivot.min(pivot.norm());
            if pivot == ZERO {
                continue;
            }
            for r in k + 1..=last_row {
                let l = self.at(r, k) / pivot;
                self.lower[k * self.kl.max(1) + (r - k - 1)] = l;
                *self.at_mut(r, k) = ZERO;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..=last_col {
                    let u = self.at(k, j);
                    *self.at_mut(r, j) -= l * u;
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest pivot modulus met during elimination.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        let kl = self.kl;
        let span = self.kl + self.ku;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            for r in k + 1..=(k + kl).min(n - 1) {
                b[r] -= self.lower[k * kl.max(1) + (r - k - 1)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + span).min(n - 1) {
                s -= self.at(i, j) * b[j];
            }
            b[i] = s / self.at(i, i);
        }
    }

    pub fn solve_adjoint_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        let kl = self.kl;
        let span = self.kl + self.ku;
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(span)..i {
                s -= self.at(j, i).conj() * b[j];
            }
            b[i] = s / self.at(i, i).conj();
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for r in k + 1..=(k + kl).min(n - 1) {
                s -= self.lower[k * kl.max(1) + (r - k - 1)].conj() * b[r];
            }
            b[k] = s;
            b.swap(k, self.piv[k]);
        }
    }
}

/// Lower and upper bandwidth of `a`, counting entries with modulus above `tol`.
pub fn bandwidths(a: MatRef<'_, C64>, tol: f64) -> (usize, usize) {
    let mut kl = 0;
    let mut ku = 0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)].norm() > tol {
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
    }
    (kl, ku)
}

/// A factored square matrix that can solve with itself and with its adjoint.
pub enum Factorization {
    Banded(BandedLu),
    Dense(PartialPivLu<C64>),
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Factorization::Banded(b) => write!(f, "Factorization::Banded(n = {})", b.dim()),
            Factorization::Dense(_) => write!(f, "Factorization::Dense"),
        }
    }
}

impl Factorization {
    /// Chooses the band solver when the band is narrow relative to the size.
    pub fn new(a: MatRef<'_, C64>) -> Self {
        let n = a.nrows();
        let (kl, ku) = bandwidths(a, 0.0);
        if n >= 16 && 2 * kl + ku < n / 4 {
            Factorization::Banded(BandedLu::factor(a, kl, ku))
        } else {
            Factorization::Dense(a.partial_piv_lu())
        }
    }

    pub fn with_band(a: MatRef<'_, C64>, kl: usize, ku: usize) -> Self {
        Factorization::Banded(BandedLu::factor(a, kl, ku))
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        match self {
            Factorization::Banded(lu) => lu.solve_in_place(b),
            Factorization::Dense(lu) => {
                let n = b.len();
                lu.solve_in_place(MatMut::from_column_major_slice_mut(b, n, 1));
            }
        }
    }

    pub fn solve_adjoint_in_place(&self, b: &mut [C64]) {
        match self {
            Factorization::Banded(lu) => lu.solve_adjoint_in_place(b),
            Factorization::Dense(lu) => {
                let n = b.len();
                lu.solve_adjoint_in_place(MatMut::from_column_major_slice_mut(b, n, 1));
            }
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Eigenvalues of a dense complex matrix.
pub fn eigenvalues(a: MatRef<'_, C64>) -> Result<Vec<C64>> {
    a.eigenvalues().map_err(|_| Error::EigenNoConvergence)
}

/// Eigenvalues of a real matrix stored in complex form with zero imaginary parts.
pub fn eigenvalues_real(a: MatRef<'_, C64>) -> Result<Vec<C64>> {
    let r = Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].re);
    r.eigenvalues().map_err(|_| Error::EigenNoConvergence)
}

pub fn is_real(a: MatRef<'_, C64>) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].im == 0.0))
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: MatRef<'_, C64>) -> Result<Vec<f64>> {
    a.singular_values().map_err(|_| Error::EigenNoConvergence)
}

/// Eigenvalues and right eigenvectors (columns of the returned matrix).
pub fn eigenpairs(a: MatRef<'_, C64>) -> Result<(Vec<C64>, Mat<C64>)> {
    if is_real(a) {
        let r = Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].re);
        let e = r.eigen().map_err(|_| Error::EigenNoConvergence)?;
        Ok((
            e.S().column_vector().iter().copied().collect(),
            e.U().to_owned(),
        ))
    } else {
        let e = a.eigen().map_err(|_| Error::EigenNoConvergence)?;
        Ok((
            e.S().column_vector().iter().copied().collect(),
            e.U().to_owned(),
        ))
    }
}

/// Orthonormal basis of the numerical range of `a`: left singular vectors
/// whose singular values exceed `rel_tol` times the largest.
pub fn range_basis(a: MatRef<'_, C64>, rel_tol: f64) -> Result<(Mat<C64>, Vec<f64>)> {
    let svd = a.thin_svd().map_err(|_| Error::EigenNoConvergence)?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let top = s.first().copied().unwrap_or(0.0);
    let r = s
        .iter()
        .filter(|&&x| top > 0.0 && x > rel_tol * top)
        .count();
    let q = svd.U().get(.., 0..r).to_owned();
    Ok((q, s))
}

pub fn matvec(a: MatRef<'_, C64>, x: &[C64]) -> Vec<C64> {
    let mut y = vec![ZERO; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == ZERO {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a[(i, j)] * xj;
        }
    }
    y
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
