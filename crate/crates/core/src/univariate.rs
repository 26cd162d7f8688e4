//! One-dimensional maximization and interpolation.

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
///
/// Stops once the bracket is narrower than `tol`. The endpoints are compared
/// against the interior estimate at the end, so a maximum sitting exactly on
/// an endpoint is returned exactly.
pub fn golden_section_max<T, F>(mut f: F, a: T, b: T, tol: T) -> Result<(T, T)>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    if !(a <= b) {
        return Err(Error::InvalidArgument(format!(
            "empty search interval [{a}, {b}]"
        )));
    }
    let invphi = lit::<T>((5f64.sqrt() - 1.0) / 2.0);
    let tol = tol.max(T::epsilon() * lit(4.0) * (a.abs() + b.abs()));
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - invphi * (hi - lo);
    let mut x2 = lo + invphi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut iterations = 0usize;
    while hi - lo > tol {
        iterations += 1;
        if iterations > 500 {
            return Err(Error::Convergence {
                solver: "golden-section search",
                iterations,
                residual: to_f64(hi - lo),
            });
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = f(x1)?;
        }
    }
    let mid = (lo + hi) * lit(0.5);
    let mut best = (mid, f(mid)?);
    for x in [a, b] {
        if x == lo || x == hi {
            let fx = f(x)?;
            if fx >= best.1 {
                best = (x, fx);
            }
        }
    }
    Ok(best)
}

/// Natural cubic interpolating spline through `(x_i, y_i)`.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline<T = f64> {
    x: Vec<T>,
    y: Vec<T>,
    m: Vec<T>,
}

impl<T: Scalar> NaturalCubicSpline<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        let n = x.len();
        if y.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: y.len(),
            });
        }
        if n < 2 {
            return Err(Error::InsufficientPoints { needed: 1, got: n });
        }
        if x.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("knots must increase".into()));
        }
        let mut m = vec![T::zero(); n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives.
            let k = n - 2;
            let mut diag = vec![T::zero(); k];
            let mut rhs = vec![T::zero(); k];
            let mut upper = vec![T::zero(); k];
            for i in 0..k {
                let h0 = x[i + 1] - x[i];
                let h1 = x[i + 2] - x[i + 1];
                diag[i] = (h0 + h1) * lit(2.0);
                upper[i] = h1;
                rhs[i] = ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0) * lit(6.0);
            }
            for i in 1..k {
                let h0 = x[i + 1] - x[i];
                let w = h0 / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] = rhs[i] - w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { x, y, m })
    }

    /// Value at `t`, extrapolating linearly outside the knots.
    pub fn eval(&self, t: T) -> T {
        let n = self.x.len();
        let i = match self.x.iter().position(|&v| v > t) {
            Some(0) => 0,
            Some(j) => j - 1,
            None => n - 2,
        };
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        let six = lit::<T>(6.0);
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / six
    }

    pub fn knots(&self) -> &[T] {
        &self.x
    }
}
