//! Total-variation fit.
//!
//! Stationarity of `‖Y − f‖_n² + λ² TV(f)²` reads `f = prox_{κ TV}(Y)` with
//! `κ = nλ² TV(f)`. The map `κ ↦ TV(prox_κ(Y))` is continuous, non-increasing
//! and affine while the run structure of the prox is fixed, so the scalar
//! equation `κ = nλ² TV(prox_κ(Y))` is solved by Newton steps on the exact
//! affine model, safeguarded by a bisection bracket `[0, nλ² TV(Y)]`.

use super::prox::{prox_violation, tv_prox_into, Segments};
use super::{FitResult, Problem};
use crate::error::{Error, Result};
use crate::penalty::{total_variation, Seminorm};
use crate::scalar::{lit, to_f64, Scalar};

pub(crate) const MAX_ITERATIONS: usize = 200;
pub(crate) const BRACKET_TOL: f64 = 1e-10;

/// Fit together with the multiplier that produced it.
#[derive(Debug, Clone)]
pub struct TvSolution<T = f64> {
    pub fit: FitResult<T>,
    /// Prox weight `κ = nλ² TV(f̂)`.
    pub kappa: T,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct RawTv<T> {
    pub f: Vec<T>,
    pub kappa: T,
    pub segments: Segments,
    pub iterations: usize,
}

/// Solves `κ = s · TV(prox_κ(y))` starting from `start` (default `0`).
pub(crate) fn solve_tv<T: Scalar>(y: &[T], s: T, start: Option<T>) -> Result<RawTv<T>> {
    let n = y.len();
    let mut f = vec![T::zero(); n];
    let tv_y = total_variation(y);
    if tv_y == T::zero() {
        f.copy_from_slice(y);
        return Ok(RawTv {
            segments: Segments::of(&f),
            f,
            kappa: T::zero(),
            iterations: 0,
        });
    }
    let hi0 = s * tv_y;
    let (mut lo, mut hi) = (T::zero(), hi0);
    let width_tol = (lit::<T>(BRACKET_TOL) * hi0.max(T::one())).max(T::epsilon() * hi0);
    let noise = T::epsilon() * lit::<T>(64.0 * (n as f64).sqrt());
    let mut kappa = start.unwrap_or(T::zero()).max(lo).min(hi);
    let mut previous: Option<Segments> = None;
    let mut last_gap = T::infinity();
    for it in 1..=MAX_ITERATIONS {
        tv_prox_into(y, kappa, &mut f);
        let seg = Segments::of(&f);
        let tv = total_variation(&f);
        let g = kappa - s * tv;
        last_gap = g.abs();
        let done_structure = previous.as_ref() == Some(&seg);
        if done_structure || g.abs() <= noise * (kappa + s * tv) {
            return Ok(RawTv {
                f,
                kappa,
                segments: seg,
                iterations: it,
            });
        }
        if g < T::zero() {
            lo = lo.max(kappa);
        } else {
            hi = hi.min(kappa);
        }
        if hi - lo <= width_tol {
            return Ok(RawTv {
                f,
                kappa,
                segments: seg,
                iterations: it,
            });
        }
        let (a, b) = seg.tv_model(y);
        let mut next = s * a / (T::one() + s * b);
        if !(next > lo && next < hi) {
            next = (lo + hi) * lit(0.5);
            previous = None;
        } else {
            previous = Some(seg);
        }
        kappa = next;
    }
    Err(Error::Convergence {
        solver: "total-variation multiplier",
        iterations: MAX_ITERATIONS,
        residual: to_f64(last_gap),
    })
}

/// Total-variation fit with an optional starting multiplier `κ₀`.
pub fn fit_tv_from<T: Scalar>(p: &Problem<T>, y: &[T], start: Option<T>) -> Result<TvSolution<T>> {
    p.check(y)?;
    if !matches!(p.seminorm(), Seminorm::TotalVariation) {
        return Err(Error::InvalidArgument(
            "fit_tv needs the total-variation seminorm".into(),
        ));
    }
    let s = p.n_lambda_sq();
    let raw = solve_tv(y, s, start)?;
    let kkt = prox_violation(y, &raw.f, s * total_variation(&raw.f));
    Ok(TvSolution {
        fit: p.result(y, raw.f, kkt)?,
        kappa: raw.kappa,
        iterations: raw.iterations,
    })
}
