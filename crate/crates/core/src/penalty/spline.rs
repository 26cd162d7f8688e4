use super::{DesignGrid, QuadraticForm};
use crate::error::{Error, Result};
use crate::linalg::BandedSym;
use crate::scalar::{lit, Scalar};

/// Reinsch form for cubic smoothing splines: `K = Q R⁻¹ Qᵀ` where `Qᵀ` maps
/// values to jumps of the first divided differences and `R` is tridiagonal
/// in the interval lengths.
pub(super) fn reinsch_form<T: Scalar>(grid: &DesignGrid<T>) -> Result<QuadraticForm<T>> {
    let x = grid.points();
    let n = x.len();
    let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let rows = n - 2;
    let mut diff = Vec::with_capacity(rows * 3);
    let mut r = BandedSym::zeros(rows, 1);
    let three = lit::<T>(3.0);
    let six = lit::<T>(6.0);
    for j in 1..n - 1 {
        let row = j - 1;
        let (hl, hr) = (h[j - 1], h[j]);
        diff.push(T::one() / hl);
        diff.push(-(T::one() / hl + T::one() / hr));
        diff.push(T::one() / hr);
        r.add(row, row, (hl + hr) / three);
        if row + 1 < rows {
            r.add(row + 1, row, hr / six);
        }
    }
    QuadraticForm::factored(n, 2, diff, 3, r)
}

/// Order-`m` natural-spline energy through the B-spline Gram identity.
///
/// The `m`-th derivative of the natural interpolating spline lies in the
/// span of the normalized order-`m` B-splines `M_j` on knots
/// `x_j..x_{j+m}`, and `[x_j..x_{j+m}] f = (1/m!) ∫ M_j g^{(m)}`. Hence
/// `∫ |g^{(m)}|² = (m!)² (Δf)ᵀ G⁻¹ (Δf)` with `Δ` the `m`-th divided
/// differences and `G_ij = ∫ M_i M_j`, integrated exactly by `m`-point
/// Gauss–Legendre on every knot interval.
pub fn spline_penalty_form_general<T: Scalar>(
    grid: &DesignGrid<T>,
    m: usize,
) -> Result<QuadraticForm<T>> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "spline order must be at least 2, got {m}"
        )));
    }
    let x = grid.points();
    let n = x.len();
    if n <= m {
        return Err(Error::InsufficientPoints { needed: m, got: n });
    }
    let rows = n - m;
    let width = m + 1;
    let factorial: T = (1..=m).map(|k| lit::<T>(k as f64)).fold(T::one(), |a, b| a * b);

    let mut diff = Vec::with_capacity(rows * width);
    for i in 0..rows {
        for j in i..i + width {
            let mut denom = T::one();
            for k in i..i + width {
                if k != j {
                    denom *= x[j] - x[k];
                }
            }
            diff.push(factorial / denom);
        }
    }

    let (nodes, weights) = gauss_legendre::<T>(m);
    let mut gram = BandedSym::zeros(rows, m - 1);
    let half = lit::<T>(0.5);
    let mut vals = vec![T::zero(); m];
    for k in 0..n - 1 {
        let (a, b) = (x[k], x[k + 1]);
        let mid = (a + b) * half;
        let rad = (b - a) * half;
        // B-splines whose support [x_j, x_{j+m}] covers [x_k, x_{k+1}].
        let first = k.saturating_sub(m - 1);
        let last = k.min(rows - 1);
        if first > last {
            continue;
        }
        for (&node, &w) in nodes.iter().zip(&weights) {
            let t = mid + rad * node;
            for j in first..=last {
                let knots = &x[j..=j + m];
                let scale = lit::<T>(m as f64) / (knots[m] - knots[0]);
                vals[j - first] = scale * bspline_value(knots, t);
            }
            for i in first..=last {
                for j in first..=i {
                    gram.add(i, j, w * rad * vals[i - first] * vals[j - first]);
                }
            }
        }
    }
    QuadraticForm::factored(n, m, diff, width, gram)
}

/// Value at `t` of the partition-of-unity B-spline on the given knots.
fn bspline_value<T: Scalar>(knots: &[T], t: T) -> T {
    let m = knots.len() - 1;
    let mut v: Vec<T> = (0..m)
        .map(|j| {
            if knots[j] <= t && t < knots[j + 1] {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect();
    for order in 2..=m {
        for j in 0..=(m - order) {
            let left = (t - knots[j]) / (knots[j + order - 1] - knots[j]) * v[j];
            let right = (knots[j + order] - t) / (knots[j + order] - knots[j + 1]) * v[j + 1];
            v[j] = left + right;
        }
    }
    v[0]
}

/// Nodes and weights of the `k`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre<T: Scalar>(k: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    let kf = k as f64;
    for i in 1..=k {
        let mut z = (std::f64::consts::PI * (i as f64 - 0.25) / (kf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=k {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let p = if k == 0 { 1.0 } else { p1 };
            let pm1 = if k == 1 { 1.0 } else { p0 };
            dp = kf * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(lit::<T>(z));
        weights.push(lit::<T>(2.0 / ((1.0 - z * z) * dp * dp)));
    }
    (nodes, weights)
}
