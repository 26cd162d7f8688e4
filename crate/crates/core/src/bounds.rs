//! Closed-form probability bounds and entropy envelopes.
//!
//! Every probability bound is clamped to `[0, 1]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Entropy exponent and the constants of the entropy envelopes.
///
/// The defaults for `c0`, `c1`, `c2` and `C` are conventional choices that
/// satisfy the constraints; they carry no further meaning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyParams<T = f64> {
    pub alpha: T,
    pub c0: T,
    pub c1: T,
    pub c2: T,
    pub big_c: T,
}

impl<T: Scalar> EntropyParams<T> {
    pub const DEFAULT_C: f64 = 0.5;
    pub const DEFAULT_C0: f64 = 2.0;
    pub const DEFAULT_C1: f64 = 1.0;
    pub const DEFAULT_C2: f64 = 4.0;

    /// Default constants with the given exponent.
    pub fn with_alpha(alpha: T) -> Result<Self> {
        Self::new(
            alpha,
            lit(Self::DEFAULT_C0),
            lit(Self::DEFAULT_C1),
            lit(Self::DEFAULT_C2),
            lit(Self::DEFAULT_C),
        )
    }

    pub fn new(alpha: T, c0: T, c1: T, c2: T, big_c: T) -> Result<Self> {
        let p = Self {
            alpha,
            c0,
            c1,
            c2,
            big_c,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let two = lit::<T>(2.0);
        if !(self.alpha > T::zero() && self.alpha < two) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 2), got {}",
                self.alpha
            )));
        }
        if !(self.c0 > T::zero() && self.c0 <= two) {
            return Err(Error::InvalidArgument(format!("c0 must lie in (0, 2], got {}", self.c0)));
        }
        if !(self.c1 > T::zero() && self.c2 > self.c1) {
            return Err(Error::InvalidArgument(format!(
                "need c2 > c1 > 0, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if !(self.big_c >= lit(0.5)) {
            return Err(Error::InvalidArgument(format!("C must be at least 1/2, got {}", self.big_c)));
        }
        Ok(())
    }
}

fn positive<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

fn count<T: Scalar>(n: usize) -> Result<T> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(lit(n as f64))
}

fn clamp<T: Scalar>(p: T) -> T {
    p.min(T::one()).max(T::zero())
}

/// `P(|τ(f̂)/R₀ − 1| ≥ x) ≤ 3 exp(−x⁴ (√n R₀)² / (32 (1 + x)²))`.
pub fn theorem1_tail<T: Scalar>(x: T, n: usize, r0: T) -> Result<T> {
    positive("x", x)?;
    positive("r0", r0)?;
    let n = count::<T>(n)?;
    let one = T::one();
    let e = x.powi(4) * n * r0 * r0 / (lit::<T>(32.0) * (one + x) * (one + x));
    Ok(clamp(lit::<T>(3.0) * (-e).exp()))
}

/// `3 exp(−n x⁴ / (32 (r₀ + x)²))`; `x` here is on the scale of `R₀`.
pub fn lemma33_event_bound<T: Scalar>(x: T, n: usize, r0: T) -> Result<T> {
    positive("x", x)?;
    positive("r0", r0)?;
    let n = count::<T>(n)?;
    let e = n * x.powi(4) / (lit::<T>(32.0) * (r0 + x) * (r0 + x));
    Ok(clamp(lit::<T>(3.0) * (-e).exp()))
}

/// `(K₁, K₂)` of the parabola envelopes.
pub fn k_constants<T: Scalar>(ep: &EntropyParams<T>, n: usize, lambda: T) -> Result<(T, T)> {
    ep.validate()?;
    positive("lambda", lambda)?;
    let n = count::<T>(n)?;
    let two = lit::<T>(2.0);
    let scale = (n * lambda.powf(ep.alpha)).recip().sqrt();
    let k1 = ep.c0.powf(T::one() - ep.alpha / two) * ep.c1.sqrt() / two * scale;
    let k2 = lit::<T>(4.0) * ep.big_c * ep.c2.sqrt() / (two - ep.alpha) * scale;
    Ok((k1, k2))
}

/// `g_i(R) = K_i R − R²/2` for `i = 1, 2`.
pub fn g_envelopes<T: Scalar>(r: T, k1: T, k2: T) -> (T, T) {
    let half = lit::<T>(0.5);
    (k1 * r - half * r * r, k2 * r - half * r * r)
}

/// Vertex form `−(R − K)²/2 + K²/2` of a single envelope.
pub fn g_vertex_form<T: Scalar>(r: T, k: T) -> T {
    let half = lit::<T>(0.5);
    -half * (r - k) * (r - k) + half * k * k
}

/// Upper bound `K₂ R` on the expected supremum.
pub fn dudley_upper<T: Scalar>(ep: &EntropyParams<T>, n: usize, lambda: T, r: T) -> Result<T> {
    Ok(k_constants(ep, n, lambda)?.1 * r)
}

/// Entropy integral `C ∫₀^{2R} (c₂ (R/(uλ))^α / n)^{1/2} du` in closed form.
///
/// Equals `2^{−α/2} K₂ R`, so it never exceeds [`dudley_upper`].
pub fn dudley_integral<T: Scalar>(ep: &EntropyParams<T>, n: usize, lambda: T, r: T) -> Result<T> {
    ep.validate()?;
    positive("lambda", lambda)?;
    let n = count::<T>(n)?;
    let two = lit::<T>(2.0);
    let a = ep.alpha;
    let scale = (n * lambda.powf(a)).recip().sqrt();
    Ok(two.powf(two - a / two) * ep.big_c * ep.c2.sqrt() / (two - a) * scale * r)
}

/// Lower bound `K₁ R` on the expected supremum.
pub fn sudakov_lower<T: Scalar>(ep: &EntropyParams<T>, n: usize, lambda: T, r: T) -> Result<T> {
    Ok(k_constants(ep, n, lambda)?.0 * r)
}

/// `P(|H_n(R) − H(R)| ≥ t) ≤ 2 exp(−n t² / (2R²))`.
pub fn gaussian_hn_tail<T: Scalar>(t: T, n: usize, r: T) -> Result<T> {
    positive("t", t)?;
    positive("R", r)?;
    let n = count::<T>(n)?;
    let e = n * t * t / (lit::<T>(2.0) * r * r);
    Ok(clamp(lit::<T>(2.0) * (-e).exp()))
}

/// Rate-optimal tuning parameter `c · n^{−1/(2+α)}`.
pub fn rate_lambda<T: Scalar>(n: usize, alpha: T, c: T) -> Result<T> {
    positive("c", c)?;
    let n = count::<T>(n)?;
    if !(alpha > T::zero() && alpha < lit(2.0)) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    Ok(c * n.powf(-(lit::<T>(2.0) + alpha).recip()))
}

/// Rate exponent `−1/(2+α)`.
pub fn rate_exponent<T: Scalar>(alpha: T) -> T {
    -(lit::<T>(2.0) + alpha).recip()
}
