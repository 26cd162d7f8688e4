//! `M_n(R)` for the total-variation penalty.
//!
//! For `β > 0` the maximizer of `⟨ε, f − f⁰⟩/n − τ²(f)/(2β)` is the fit to the
//! response `f⁰ + βε`, and `τ` along this path increases from `R_min`. The
//! supremum over `{τ ≤ R}` is attained at the `β` with `τ(f_β) = R`. While
//! the run structure of `f_β` is fixed, the run values are affine in `β` and
//! `τ²` is an explicit quadratic, so Newton-like steps on that model land on
//! the root exactly once the right structure is found.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::estimator::prox::Segments;
use crate::estimator::solve_tv;
use crate::penalty::total_variation;
use crate::scalar::{lit, norm_sq, to_f64, Scalar};

const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy)]
struct Warm<T> {
    delta: T,
    beta: T,
    kappa: T,
}

pub(crate) struct TvPath<'a, T> {
    f0: &'a [T],
    eps: &'a [T],
    s: T,
    lambda_sq: T,
    warm: Cell<Option<Warm<T>>>,
}

struct Point<T> {
    f: Vec<T>,
    kappa: T,
    segments: Segments,
    tau: T,
}

pub(crate) struct PathSolution<T> {
    pub f: Vec<T>,
    pub beta: T,
    pub tau: T,
}

impl<'a, T: Scalar> TvPath<'a, T> {
    pub fn new(f0: &'a [T], eps: &'a [T], lambda: T) -> Self {
        let n = lit::<T>(f0.len() as f64);
        Self {
            f0,
            eps,
            s: n * lambda * lambda,
            lambda_sq: lambda * lambda,
            warm: Cell::new(None),
        }
    }

    fn n(&self) -> T {
        lit(self.f0.len() as f64)
    }

    fn tau(&self, f: &[T]) -> T {
        let err: T = f.iter().zip(self.f0).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let tv = total_variation(f);
        (err / self.n() + self.lambda_sq * tv * tv).sqrt()
    }

    fn eval(&self, beta: T, kappa: Option<T>) -> Result<Point<T>> {
        let y: Vec<T> = self
            .f0
            .iter()
            .zip(self.eps)
            .map(|(&a, &e)| a + beta * e)
            .collect();
        let raw = solve_tv(&y, self.s, kappa)?;
        let tau = self.tau(&raw.f);
        Ok(Point {
            f: raw.f,
            kappa: raw.kappa,
            segments: raw.segments,
            tau,
        })
    }

    /// Root in `β` of `τ(f_β) = R` for the structure `seg`, with the matching `κ`.
    fn model_root(&self, seg: &Segments, r: T) -> Option<(T, T)> {
        let m0 = seg.means(self.f0);
        let me = seg.means(self.eps);
        let d = seg.drifts::<T>();
        let w = seg.tv_weights::<T>();
        let s = self.s;
        let mut a0 = T::zero();
        let mut a1 = T::zero();
        let mut b = T::zero();
        for k in 0..seg.count() {
            a0 += w[k] * m0[k];
            a1 += w[k] * me[k];
            b -= w[k] * d[k];
        }
        let denom = T::one() + s * b;
        let p = s * a0 / denom;
        let q = s * a1 / denom;
        let t0 = a0 - b * p;
        let t1 = a1 - b * q;
        let mut c0 = T::zero();
        let mut c1 = T::zero();
        let mut c2 = T::zero();
        for k in 0..seg.count() {
            let (lo, hi) = (seg.bounds[k], seg.bounds[k + 1]);
            let len = lit::<T>((hi - lo) as f64);
            let within: T = self.f0[lo..hi].iter().map(|&v| (v - m0[k]) * (v - m0[k])).sum();
            let shift = p * d[k];
            let g = me[k] + q * d[k];
            c0 += len * shift * shift + within;
            c1 += len * shift * g;
            c2 += len * g * g;
        }
        let n = self.n();
        let l2 = self.lambda_sq;
        let c0 = c0 / n + l2 * t0 * t0;
        let c1 = lit::<T>(2.0) * (c1 / n + l2 * t0 * t1);
        let c2 = c2 / n + l2 * t1 * t1;
        if !(c2 > T::zero()) {
            return None;
        }
        let rhs = r * r - c0;
        let disc = c1 * c1 + lit::<T>(4.0) * c2 * rhs;
        if !(disc >= T::zero()) {
            return None;
        }
        let sq = disc.sqrt();
        let beta = if c1 > T::zero() {
            lit::<T>(2.0) * rhs / (c1 + sq)
        } else {
            (sq - c1) / (lit::<T>(2.0) * c2)
        };
        if !beta.is_finite() {
            return None;
        }
        Some((beta, p + q * beta))
    }

    /// Finds `β` with `τ(f_β) = r`, for `r` strictly above `r_min`.
    pub fn solve(&self, r: T, r_min: T) -> Result<PathSolution<T>> {
        let delta = ((r - r_min) * (r + r_min)).max(T::zero()).sqrt();
        let n = self.f0.len();
        let tol = T::epsilon() * lit::<T>(64.0 * (n as f64).sqrt()) * r;
        let (mut beta, mut kappa) = match self.warm.get() {
            Some(w) if w.delta > T::zero() => (w.beta * delta / w.delta, Some(w.kappa)),
            _ => {
                let e = norm_sq(self.eps).sqrt();
                (delta * lit::<T>(n as f64).sqrt() / e, None)
            }
        };
        let mut lo = T::zero();
        let mut hi: Option<T> = None;
        let mut from_model: Option<Segments> = None;
        let mut last = T::infinity();
        for _ in 0..MAX_ITERATIONS {
            let pt = self.eval(beta, kappa)?;
            last = (pt.tau - r).abs();
            let exact = from_model.as_ref() == Some(&pt.segments);
            if exact || last <= tol {
                self.warm.set(Some(Warm {
                    delta,
                    beta,
                    kappa: pt.kappa,
                }));
                return Ok(PathSolution {
                    f: pt.f,
                    beta,
                    tau: pt.tau,
                });
            }
            if pt.tau < r {
                lo = lo.max(beta);
            } else {
                hi = Some(hi.map_or(beta, |h| h.min(beta)));
            }
            if let Some(h) = hi {
                if h - lo <= T::epsilon() * lit(4.0) * h {
                    let pt = self.eval(h, Some(pt.kappa))?;
                    return Ok(PathSolution {
                        f: pt.f,
                        beta: h,
                        tau: pt.tau,
                    });
                }
            }
            let upper = hi.unwrap_or(T::infinity());
            match self.model_root(&pt.segments, r) {
                Some((b, k)) if b > lo && b < upper => {
                    beta = b;
                    kappa = Some(k.max(T::zero()));
                    from_model = Some(pt.segments);
                }
                _ => {
                    beta = match hi {
                        Some(h) => (lo + h) * lit(0.5),
                        None => beta * lit(2.0),
                    };
                    kappa = Some(pt.kappa);
                    from_model = None;
                }
            }
        }
        Err(Error::Convergence {
            solver: "total-variation trade-off path",
            iterations: MAX_ITERATIONS,
            residual: to_f64(last),
        })
    }
}
