//! Roughness seminorms over values on a one-dimensional design grid.
//!
//! Two families are supported: quadratic forms `I²(f) = fᵀKf` (the order-`m`
//! spline energy of the natural interpolating spline, or any user supplied
//! positive semidefinite matrix) and the discrete total variation.

mod spline;

use crate::error::{Error, Result};
use crate::linalg::{BandedCholesky, BandedSym, DenseCholesky, DenseMatrix};
use crate::scalar::{lit, Scalar};

pub use spline::{gauss_legendre, spline_penalty_form_general};

/// Relative tolerance below which negative eigenvalues count as round-off.
pub const PSD_RELATIVE_TOL: f64 = 1e-10;

/// Sorted, distinct covariates `x_1 < … < x_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignGrid<T = f64> {
    points: Vec<T>,
}

impl<T: Scalar> DesignGrid<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InsufficientPoints {
                needed: 2,
                got: points.len(),
            });
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("non-finite covariate".into()));
        }
        if let Some(i) = points.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid(format!(
                "points must be strictly increasing (violated at index {})",
                i + 1
            )));
        }
        Ok(Self { points })
    }

    /// `n` equispaced points covering `[0, 1]` including both ends.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InsufficientPoints { needed: 2, got: n });
        }
        let d = lit::<T>((n - 1) as f64);
        Self::new((0..n).map(|i| lit::<T>(i as f64) / d).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Evaluates `f` at every design point.
    pub fn sample(&self, f: impl Fn(T) -> T) -> Vec<T> {
        self.points.iter().map(|&x| f(x)).collect()
    }
}

/// Positive semidefinite quadratic form `fᵀKf` on grid values.
#[derive(Debug, Clone)]
pub struct QuadraticForm<T = f64> {
    n: usize,
    order: usize,
    repr: FormRepr<T>,
}

#[derive(Debug, Clone)]
enum FormRepr<T> {
    /// `K = Dᵀ G⁻¹ D` with `D` banded (`rows × n`, row `i` touching columns
    /// `i..=i+width-1`) and `G` banded symmetric positive definite.
    Factored {
        diff: Vec<T>,
        width: usize,
        gram: BandedSym<T>,
        gram_chol: BandedCholesky<T>,
    },
    Dense(DenseMatrix<T>),
}

impl<T: Scalar> QuadraticForm<T> {
    /// Builds `K = Dᵀ G⁻¹ D` from a banded difference operator.
    pub(crate) fn factored(
        n: usize,
        order: usize,
        diff: Vec<T>,
        width: usize,
        gram: BandedSym<T>,
    ) -> Result<Self> {
        debug_assert_eq!(diff.len(), gram.dim() * width);
        let gram_chol = gram.cholesky()?;
        Ok(Self {
            n,
            order,
            repr: FormRepr::Factored {
                diff,
                width,
                gram,
                gram_chol,
            },
        })
    }

    /// Wraps a dense symmetric matrix after checking it is positive
    /// semidefinite. Eigenvalues in `(-tol, 0)` are clamped to zero, where
    /// `tol = 1e-10 × largest eigenvalue`.
    pub fn from_dense(matrix: DenseMatrix<T>, order: usize) -> Result<Self> {
        let n = matrix.dim();
        if order < 1 {
            return Err(Error::InvalidArgument("order must be positive".into()));
        }
        let scale = matrix.max_abs();
        if matrix.asymmetry() > lit::<T>(1e-12) * scale {
            return Err(Error::NotPositiveSemidefinite("matrix is not symmetric".into()));
        }
        let (eig, vecs) = matrix.symmetric_eigen();
        let largest = eig.iter().fold(T::zero(), |m, &v| m.max(v));
        let tol = lit::<T>(PSD_RELATIVE_TOL) * largest;
        let smallest = eig.iter().fold(T::infinity(), |m, &v| m.min(v));
        if smallest < -tol {
            return Err(Error::NotPositiveSemidefinite(format!(
                "eigenvalue {smallest} below -{tol}"
            )));
        }
        let matrix = if smallest < T::zero() {
            // Rebuild V diag(max(λ, 0)) Vᵀ.
            let mut k = DenseMatrix::zeros(n);
            for (c, &lam) in eig.iter().enumerate() {
                let lam = lam.max(T::zero());
                if lam == T::zero() {
                    continue;
                }
                for i in 0..n {
                    let vi = vecs[(i, c)] * lam;
                    for j in 0..n {
                        k[(i, j)] += vi * vecs[(j, c)];
                    }
                }
            }
            k
        } else {
            matrix
        };
        Ok(Self {
            n,
            order,
            repr: FormRepr::Dense(matrix),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Derivative order `m` of the spline energy (or the user-declared order).
    pub fn order(&self) -> usize {
        self.order
    }

    fn check(&self, f: &[T]) -> Result<()> {
        if f.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: f.len(),
            });
        }
        Ok(())
    }

    /// `fᵀKf`, possibly slightly negative from round-off.
    pub fn value(&self, f: &[T]) -> Result<T> {
        self.check(f)?;
        Ok(match &self.repr {
            FormRepr::Factored {
                diff,
                width,
                gram_chol,
                ..
            } => {
                let d = apply_diff(diff, *width, f);
                let z = gram_chol.solve(&d);
                d.iter().zip(&z).map(|(&a, &b)| a * b).sum()
            }
            FormRepr::Dense(k) => {
                let kf = k.mul_vec(f);
                f.iter().zip(&kf).map(|(&a, &b)| a * b).sum()
            }
        })
    }

    /// `K f`.
    pub fn apply(&self, f: &[T]) -> Result<Vec<T>> {
        self.check(f)?;
        Ok(match &self.repr {
            FormRepr::Factored {
                diff,
                width,
                gram_chol,
                ..
            } => {
                let d = apply_diff(diff, *width, f);
                let z = gram_chol.solve(&d);
                apply_diff_transpose(diff, *width, &z, self.n)
            }
            FormRepr::Dense(k) => k.mul_vec(f),
        })
    }

    /// Dense copy of `K`; intended for small grids.
    pub fn to_dense(&self) -> DenseMatrix<T> {
        match &self.repr {
            FormRepr::Dense(k) => k.clone(),
            FormRepr::Factored { .. } => {
                let mut k = DenseMatrix::zeros(self.n);
                let mut e = vec![T::zero(); self.n];
                for j in 0..self.n {
                    e[j] = T::one();
                    let col = self.apply(&e).expect("dimension checked");
                    for i in 0..self.n {
                        k[(i, j)] = col[i];
                    }
                    e[j] = T::zero();
                }
                // Symmetrize away round-off from the two triangular solves.
                for i in 0..self.n {
                    for j in 0..i {
                        let v = (k[(i, j)] + k[(j, i)]) / lit(2.0);
                        k[(i, j)] = v;
                        k[(j, i)] = v;
                    }
                }
                k
            }
        }
    }

    /// Factors `I + shift·K` once for repeated solves.
    pub fn shifted_system(&self, shift: T) -> Result<ShiftedSystem<T>> {
        if !(shift >= T::zero()) {
            return Err(Error::InvalidArgument("shift must be non-negative".into()));
        }
        match &self.repr {
            FormRepr::Factored {
                diff, width, gram, ..
            } => {
                let rows = gram.dim();
                let width = *width;
                let mut sys = BandedSym::zeros(rows, width - 1);
                for i in 0..rows {
                    for j in i.saturating_sub(width - 1)..=i {
                        let g = gram.get(i, j);
                        // (D Dᵀ)_{ij}: rows i and j overlap on columns i..j+width-1.
                        let mut dd = T::zero();
                        for c in i..(j + width) {
                            dd += diff[i * width + (c - i)] * diff[j * width + (c - j)];
                        }
                        sys.add(i, j, g + shift * dd);
                    }
                }
                let chol = sys.cholesky()?;
                Ok(ShiftedSystem {
                    shift,
                    n: self.n,
                    repr: ShiftedRepr::Banded {
                        diff: diff.clone(),
                        width,
                        chol,
                    },
                })
            }
            FormRepr::Dense(k) => {
                let mut a = k.clone();
                for i in 0..self.n {
                    for j in 0..self.n {
                        a[(i, j)] *= shift;
                    }
                    a[(i, i)] += T::one();
                }
                Ok(ShiftedSystem {
                    shift,
                    n: self.n,
                    repr: ShiftedRepr::Dense(a.cholesky()?),
                })
            }
        }
    }
}

fn apply_diff<T: Scalar>(diff: &[T], width: usize, f: &[T]) -> Vec<T> {
    diff.chunks_exact(width)
        .enumerate()
        .map(|(i, row)| row.iter().zip(&f[i..i + width]).map(|(&a, &b)| a * b).sum())
        .collect()
}

fn apply_diff_transpose<T: Scalar>(diff: &[T], width: usize, z: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for (i, row) in diff.chunks_exact(width).enumerate() {
        for (k, &a) in row.iter().enumerate() {
            out[i + k] += a * z[i];
        }
    }
    out
}

/// Factorization of `I + shift·K`.
#[derive(Debug, Clone)]
pub struct ShiftedSystem<T = f64> {
    shift: T,
    n: usize,
    repr: ShiftedRepr<T>,
}

#[derive(Debug, Clone)]
enum ShiftedRepr<T> {
    /// Reinsch-type elimination: `(G + s D Dᵀ) γ = D y`, `f = y - s Dᵀ γ`.
    Banded {
        diff: Vec<T>,
        width: usize,
        chol: BandedCholesky<T>,
    },
    Dense(DenseCholesky<T>),
}

impl<T: Scalar> ShiftedSystem<T> {
    pub fn shift(&self) -> T {
        self.shift
    }

    pub fn condition_estimate(&self) -> f64 {
        match &self.repr {
            ShiftedRepr::Banded { chol, .. } => chol.condition_estimate(),
            ShiftedRepr::Dense(chol) => chol.condition_estimate(),
        }
    }

    /// Solves `(I + shift·K) f = y`.
    pub fn solve(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: y.len(),
            });
        }
        Ok(match &self.repr {
            ShiftedRepr::Banded { diff, width, chol } => {
                let mut gamma = apply_diff(diff, *width, y);
                chol.solve_in_place(&mut gamma);
                let corr = apply_diff_transpose(diff, *width, &gamma, self.n);
                y.iter()
                    .zip(&corr)
                    .map(|(&yi, &ci)| yi - self.shift * ci)
                    .collect()
            }
            ShiftedRepr::Dense(chol) => chol.solve(y),
        })
    }
}

/// Roughness functional `I(·)` on grid values.
#[derive(Debug, Clone)]
pub enum Seminorm<T = f64> {
    Quadratic(QuadraticForm<T>),
    TotalVariation,
}

impl<T: Scalar> Seminorm<T> {
    pub fn is_quadratic(&self) -> bool {
        matches!(self, Seminorm::Quadratic(_))
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticForm<T>> {
        match self {
            Seminorm::Quadratic(q) => Some(q),
            Seminorm::TotalVariation => None,
        }
    }

    /// Evaluates `I(f)`.
    pub fn eval(&self, f: &[T]) -> Result<T> {
        match self {
            Seminorm::Quadratic(q) => Ok(q.value(f)?.max(T::zero()).sqrt()),
            Seminorm::TotalVariation => Ok(total_variation(f)),
        }
    }
}

/// Natural-spline roughness `∫ |g^{(m)}|²` of the interpolant of grid values.
///
/// For `m = 2` this is the Reinsch form `Q R⁻¹ Qᵀ` with tridiagonal `R`;
/// higher orders use the Gram matrix of the order-`m` B-splines, see
/// [`spline_penalty_form_general`].
pub fn spline_penalty_form<T: Scalar>(grid: &DesignGrid<T>, m: usize) -> Result<Seminorm<T>> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "spline order must be at least 2, got {m}"
        )));
    }
    let n = grid.len();
    if n <= m {
        return Err(Error::InsufficientPoints { needed: m, got: n });
    }
    let form = if m == 2 {
        spline::reinsch_form(grid)?
    } else {
        spline_penalty_form_general(grid, m)?
    };
    Ok(Seminorm::Quadratic(form))
}

/// `Σ_{i≥2} |f_i − f_{i−1}|`.
pub fn tv_value<T: Scalar>(f: &[T], n: usize) -> Result<T> {
    if f.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: f.len(),
        });
    }
    Ok(total_variation(f))
}

pub(crate) fn total_variation<T: Scalar>(f: &[T]) -> T {
    f.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// `I(f)` with a dimension check against the grid size `n`.
pub fn eval_seminorm<T: Scalar>(s: &Seminorm<T>, f: &[T], n: usize) -> Result<T> {
    if f.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: f.len(),
        });
    }
    s.eval(f)
}
