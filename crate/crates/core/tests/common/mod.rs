//! Independent reference computations used by the integration tests.
//!
//! Nothing here calls into the library's solvers: dense linear algebra goes
//! through nalgebra and optimization uses generic methods.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Sorted random design on `[0, 1]` with gaps of at least `1/(4n)`.
pub fn random_grid(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let gaps: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.25..1.75)).collect();
    let total: f64 = gaps.iter().sum();
    let mut x = vec![0.0];
    for g in gaps {
        x.push(x.last().unwrap() + g / total);
    }
    x
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (five points).
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// `∫_a^b g` by composite five-point Gauss–Legendre on `pieces` subintervals.
pub fn quadrature(g: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    let mut s = 0.0;
    for k in 0..pieces {
        let mid = a + (k as f64 + 0.5) * h;
        for (t, w) in GL5 {
            s += w * g(mid + 0.5 * h * t) * 0.5 * h;
        }
    }
    s
}

/// `∫ |s''|²` of the natural cubic interpolant of `(x, f)`.
///
/// The interpolant's second derivatives at the knots come from the classical
/// moment equations, solved densely; the energy is then integrated numerically.
pub fn cubic_spline_energy(x: &[f64], f: &[f64]) -> f64 {
    let n = x.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    a[(0, 0)] = 1.0;
    a[(n - 1, n - 1)] = 1.0;
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        a[(i, i - 1)] = h0 / 6.0;
        a[(i, i)] = (h0 + h1) / 3.0;
        a[(i, i + 1)] = h1 / 6.0;
        rhs[i] = (f[i + 1] - f[i]) / h1 - (f[i] - f[i - 1]) / h0;
    }
    let m = a.lu().solve(&rhs).expect("moment system is nonsingular");
    let mut e = 0.0;
    for i in 0..n - 1 {
        let (x0, x1, m0, m1) = (x[i], x[i + 1], m[i], m[i + 1]);
        let s2 = |t: f64| m0 + (m1 - m0) * (t - x0) / (x1 - x0);
        e += quadrature(|t| s2(t) * s2(t), x0, x1, 16);
    }
    e
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// `∫ |g^{(m)}|²` of the natural spline of order `2m` interpolating `(x, f)`.
///
/// Uses the truncated-power representation
/// `g(x) = Σ_{k<m} b_k x^k + Σ_i a_i (x − x_i)_+^{2m−1}` with the natural
/// conditions `Σ_i a_i x_i^k = 0` for `k < m`. Only suitable for small `n`.
pub fn natural_spline_energy(x: &[f64], f: &[f64], m: usize) -> f64 {
    let n = x.len();
    let d = 2 * m - 1;
    let size = n + m;
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut rhs = DVector::<f64>::zeros(size);
    for i in 0..n {
        for j in 0..n {
            let t = x[i] - x[j];
            if t > 0.0 {
                a[(i, j)] = t.powi(d as i32);
            }
        }
        for k in 0..m {
            a[(i, n + k)] = x[i].powi(k as i32);
            a[(n + k, i)] = x[i].powi(k as i32);
        }
        rhs[i] = f[i];
    }
    let c = a.lu().solve(&rhs).expect("interpolation system is nonsingular");
    let scale = factorial(d) / factorial(m - 1);
    let gm = |t: f64| -> f64 {
        (0..n)
            .map(|j| {
                let u = t - x[j];
                if u > 0.0 {
                    c[j] * scale * u.powi((m - 1) as i32)
                } else {
                    0.0
                }
            })
            .sum()
    };
    (0..n - 1)
        .map(|i| quadrature(|t| gm(t) * gm(t), x[i], x[i + 1], 8))
        .sum()
}

/// Nelder–Mead minimization with restarts until the simplex collapses.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, tol: f64) -> Vec<f64> {
    let dim = x0.len();
    let mut best = x0.to_vec();
    let mut scale = step;
    for _ in 0..20 {
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for k in 0..dim {
            let mut v = best.clone();
            v[k] += scale;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        for _ in 0..20_000 {
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();
            let diameter = simplex[1..]
                .iter()
                .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if diameter < tol {
                break;
            }
            let centroid: Vec<f64> = (0..dim)
                .map(|k| simplex[..dim].iter().map(|v| v[k]).sum::<f64>() / dim as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[dim])
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let xr = along(1.0);
            let fr = f(&xr);
            if fr < values[0] {
                let xe = along(2.0);
                let fe = f(&xe);
                if fe < fr {
                    simplex[dim] = xe;
                    values[dim] = fe;
                } else {
                    simplex[dim] = xr;
                    values[dim] = fr;
                }
            } else if fr < values[dim - 1] {
                simplex[dim] = xr;
                values[dim] = fr;
            } else {
                let xc = if fr < values[dim] { along(0.5) } else { along(-0.5) };
                let fc = f(&xc);
                if fc < values[dim].min(fr) {
                    simplex[dim] = xc;
                    values[dim] = fc;
                } else {
                    for k in 1..=dim {
                        let v: Vec<f64> = simplex[k]
                            .iter()
                            .zip(&simplex[0])
                            .map(|(a, b)| b + 0.5 * (a - b))
                            .collect();
                        values[k] = f(&v);
                        simplex[k] = v;
                    }
                }
            }
        }
        let i = (0..=dim).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
        let moved = simplex[i].iter().zip(&best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        best = simplex[i].clone();
        if moved < tol {
            break;
        }
        scale = (moved * 10.0).max(tol * 10.0);
    }
    best
}

/// Dense `K` with `fᵀKf = ∫|s''|²` built column by column from the energy
/// oracle through polarization.
pub fn cubic_energy_matrix(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let e = |v: &[f64]| cubic_spline_energy(x, v);
    let unit = |i: usize| {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    };
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = e(&unit(i));
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut v = unit(i);
            v[j] = 1.0;
            let off = 0.5 * (e(&v) - k[(i, i)] - k[(j, j)]);
            k[(i, j)] = off;
            k[(j, i)] = off;
        }
    }
    k
}

/// Sign patterns of the two increments of a three-point vector, with the
/// matching subspace basis and total-variation weight vector.
fn tv3_patterns() -> Vec<(DMatrix<f64>, DVector<f64>, [f64; 2])> {
    let mut out = Vec::new();
    for s1 in [-1.0, 0.0, 1.0] {
        for s2 in [-1.0, 0.0, 1.0] {
            let mut cols = vec![DVector::from_vec(vec![1.0, 1.0, 1.0])];
            if s1 != 0.0 {
                cols.push(DVector::from_vec(vec![0.0, 1.0, 1.0]));
            }
            if s2 != 0.0 {
                cols.push(DVector::from_vec(vec![0.0, 0.0, 1.0]));
            }
            let b = DMatrix::from_columns(&cols);
            let w = DVector::from_vec(vec![-s1, s1 - s2, s2]);
            out.push((b, w, [s1, s2]));
        }
    }
    out
}

fn consistent(f: &DVector<f64>, signs: [f64; 2]) -> bool {
    let d = [f[1] - f[0], f[2] - f[1]];
    d.iter().zip(signs).all(|(&di, s)| s == 0.0 || di * s >= -1e-13)
}

/// Exact minimizer of `‖y − f‖²/3 + λ² TV(f)²` over `ℝ³`.
///
/// On every sign pattern of the increments the objective is a quadratic in
/// the free coordinates; the global minimizer lies in the relative interior
/// of exactly one pattern, where it is that quadratic's unconstrained
/// minimizer.
pub fn tv3_fit(y: &[f64], lambda: f64) -> Vec<f64> {
    let yv = DVector::from_row_slice(y);
    let l2 = lambda * lambda;
    let objective = |f: &DVector<f64>| {
        let tv = (f[1] - f[0]).abs() + (f[2] - f[1]).abs();
        (f - &yv).norm_squared() / 3.0 + l2 * tv * tv
    };
    let mut best: Option<(f64, DVector<f64>)> = None;
    for (b, w, signs) in tv3_patterns() {
        let bw = b.transpose() * &w;
        let h = b.transpose() * &b / 3.0 + &bw * bw.transpose() * l2;
        let g = b.transpose() * &yv / 3.0;
        let u = h.lu().solve(&g).expect("positive definite");
        let f = &b * u;
        if consistent(&f, signs) {
            let v = objective(&f);
            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, f));
            }
        }
    }
    best.expect("some pattern is consistent").1.as_slice().to_vec()
}

/// Exact `sup ⟨ε, f − f⁰⟩/3` over `‖f − f⁰‖²/3 + λ² TV(f)² ≤ R²`.
///
/// Same pattern argument as [`tv3_fit`]: on a pattern's subspace the
/// constraint is an ellipsoid and the linear maximizer is explicit.
pub fn tv3_sup(f0: &[f64], eps: &[f64], lambda: f64, r: f64) -> f64 {
    let f0v = DVector::from_row_slice(f0);
    let ev = DVector::from_row_slice(eps);
    let l2 = lambda * lambda;
    let mut best = f64::NEG_INFINITY;
    for (b, w, signs) in tv3_patterns() {
        let bw = b.transpose() * &w;
        // τ² = uᵀHu − 2uᵀg + c on f = Bu.
        let h = b.transpose() * &b / 3.0 + &bw * bw.transpose() * l2;
        let g = b.transpose() * &f0v / 3.0;
        let c = f0v.norm_squared() / 3.0;
        let hinv = h.try_inverse().expect("positive definite");
        let center = &hinv * &g;
        let rho2 = r * r - (c - g.dot(&center));
        if rho2 < 0.0 {
            continue;
        }
        let a = b.transpose() * &ev / 3.0;
        let ha = &hinv * &a;
        let norm = a.dot(&ha).sqrt();
        let u = if norm > 0.0 {
            &center + ha * (rho2.sqrt() / norm)
        } else {
            center
        };
        let f = &b * u;
        if consistent(&f, signs) {
            best = best.max(ev.dot(&(f - &f0v)) / 3.0);
        }
    }
    best
}

/// `sup ⟨ε, f − f⁰⟩/n` over `‖f − f⁰‖²/n + λ² fᵀKf ≤ R²` by projected
/// gradient ascent.
///
/// The feasible set is the ellipsoid `(f − c)ᵀA(f − c) ≤ ρ²`; Euclidean
/// projection onto it solves `(I + μA)(x − c) = v − c` with `μ` found by
/// bisection.
pub fn ellipsoid_sup(k: &DMatrix<f64>, f0: &[f64], eps: &[f64], lambda: f64, r: f64) -> f64 {
    let n = f0.len();
    let nf = n as f64;
    let f0v = DVector::from_row_slice(f0);
    let ev = DVector::from_row_slice(eps);
    let a = DMatrix::<f64>::identity(n, n) / nf + k * (lambda * lambda);
    let center = a.clone().lu().solve(&(&f0v / nf)).unwrap();
    let rho2 = r * r - (f0v.norm_squared() / nf - center.dot(&(&a * &center)));
    assert!(rho2 >= 0.0, "radius below the minimum");
    let quad = |d: &DVector<f64>| d.dot(&(&a * d));
    let project = |v: &DVector<f64>| -> DVector<f64> {
        let d = v - &center;
        if quad(&d) <= rho2 {
            return v.clone();
        }
        let solve = |mu: f64| {
            let m = DMatrix::<f64>::identity(n, n) + &a * mu;
            m.lu().solve(&d).unwrap()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        while quad(&solve(hi)) > rho2 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if quad(&solve(mid)) > rho2 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        &center + solve(hi)
    };
    let grad = &ev / nf;
    let step = 1.0 / grad.norm().max(1e-300) * rho2.sqrt();
    let mut x = center.clone();
    let mut value = f64::NEG_INFINITY;
    for _ in 0..20_000 {
        let next = project(&(&x + &grad * step));
        let v = ev.dot(&(&next - &f0v)) / nf;
        let moved = (&next - &x).norm();
        x = next;
        value = value.max(v);
        if moved < 1e-14 {
            break;
        }
    }
    value
}

/// Weighted least-squares polynomial fit of degree `< m` evaluated on `x`.
pub fn polynomial_projection(x: &[f64], y: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    let v = DMatrix::from_fn(n, m, |i, k| x[i].powi(k as i32));
    let yv = DVector::from_row_slice(y);
    let coef = (v.transpose() * &v).lu().solve(&(v.transpose() * yv)).unwrap();
    (v * coef).as_slice().to_vec()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
