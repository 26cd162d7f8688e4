//! Small dense and banded symmetric solvers.
//!
//! Every system solved by the estimators is symmetric positive definite,
//! and for the spline penalties it is banded with a half-bandwidth equal to
//! the spline order, so fits stay linear in the number of design points.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

fn pivot_condition<T: Scalar>(dmax: T, dmin: T, failed: T) -> f64 {
    // A non-positive pivot means the smallest eigenvalue is (numerically) zero.
    if failed.is_finite() && failed > T::zero() && dmin > T::zero() {
        to_f64(dmax / dmin).powi(2)
    } else {
        f64::INFINITY
    }
}

/// Symmetric banded matrix, lower band stored row by row.
///
/// Entry `(i, j)` with `i - bw <= j <= i` lives at `data[i * (bw + 1) + j + bw - i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym<T> {
    n: usize,
    bw: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandedSym<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![T::zero(); n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + j + self.bw - i
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            T::zero()
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// Banded Cholesky factorization `A = L Lᵀ`.
    pub fn cholesky(&self) -> Result<BandedCholesky<T>> {
        let n = self.n;
        let bw = self.bw;
        let mut l = self.clone();
        let mut dmin = T::infinity();
        let mut dmax = T::zero();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = l.data[l.idx(i, j)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    s -= l.data[l.idx(i, k)] * l.data[l.idx(j, k)];
                }
                let at = l.idx(i, j);
                if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        return Err(Error::Singular {
                            condition: pivot_condition(dmax, dmin, s),
                        });
                    }
                    let d = s.sqrt();
                    dmin = dmin.min(d);
                    dmax = dmax.max(d);
                    l.data[at] = d;
                } else {
                    l.data[at] = s / l.data[l.idx(j, j)];
                }
            }
        }
        let condition = to_f64(dmax / dmin).powi(2);
        Ok(BandedCholesky { l, condition })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedCholesky<T> {
    l: BandedSym<T>,
    condition: f64,
}

impl<T: Scalar> BandedCholesky<T> {
    /// Squared ratio of the extreme pivots; a cheap condition-number estimate.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let l = &self.l;
        let n = l.n;
        let bw = l.bw;
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= l.data[l.idx(i, k)] * b[k];
            }
            b[i] = s / l.data[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= l.data[l.idx(k, i)] * b[k];
            }
            b[i] = s / l.data[l.idx(i, i)];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn cholesky(&self) -> Result<DenseCholesky<T>> {
        let n = self.n;
        let mut l = DenseMatrix::zeros(n);
        let mut dmin = T::infinity();
        let mut dmax = T::zero();
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        return Err(Error::Singular {
                            condition: pivot_condition(dmax, dmin, s),
                        });
                    }
                    let d = s.sqrt();
                    dmin = dmin.min(d);
                    dmax = dmax.max(d);
                    l[(i, i)] = d;
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        let condition = to_f64(dmax / dmin).powi(2);
        Ok(DenseCholesky { l, condition })
    }

    /// Eigenvalues and eigenvectors (columns of the returned matrix) of a
    /// symmetric matrix by cyclic Jacobi rotations.
    pub fn symmetric_eigen(&self) -> (Vec<T>, DenseMatrix<T>) {
        let n = self.n;
        let mut a = self.clone();
        let mut v = DenseMatrix::identity(n);
        let tiny = T::epsilon() * T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in 0..i {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            let scale: T = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum::<T>() + off;
            if off <= tiny * scale || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (lit::<T>(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        ((0..n).map(|i| a[(i, i)]).collect(), v)
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseCholesky<T> {
    l: DenseMatrix<T>,
    condition: f64,
}

impl<T: Scalar> DenseCholesky<T> {
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[(i, k)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }
}
