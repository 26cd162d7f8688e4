//! Gaussian landscape of the trade-off:
//! `M_n(R) = sup_{τ(f) ≤ R} ⟨ε, f − f⁰⟩/n`, `H_n(R) = M_n(R) − R²/2`,
//! the per-draw maximizer `R*` and the Monte-Carlo maximizer `R₀` of `E H_n`.

mod noise;
mod tv;

use std::cell::Cell;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{fit, noiseless_fit, Problem};
use crate::penalty::Seminorm;
use crate::scalar::{lit, to_f64, Scalar};
use crate::univariate::{golden_section_max, NaturalCubicSpline};

pub use noise::{NoiseDraw, GENERATOR, NORMAL_SAMPLER};

/// Absolute tolerance of the golden-section search for `R*`.
pub const R_STAR_TOL: f64 = 1e-9;

/// Slack below `R_min` still accepted as the radius `R_min`.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// Maximizer of `H_n` over the radius grid and the sampled curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeCurve<T = f64> {
    pub radii: Vec<T>,
    pub m_values: Vec<T>,
    pub h_values: Vec<T>,
    pub r_star: T,
    pub h_at_r_star: T,
}

/// Value of `M_n(R)` with solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupCorrelation<T = f64> {
    pub value: T,
    /// Lagrange scale `β`: the maximizer is the fit to `f⁰ + βε`.
    pub beta: T,
    /// Upper bound on `sup − value`; zero for closed-form evaluations.
    pub duality_gap: T,
}

/// Noise-free part of the landscape, shared by every draw.
#[derive(Debug, Clone)]
pub struct Landscape<'p, T: Scalar = f64> {
    problem: &'p Problem<T>,
    f_min: Vec<T>,
    u_min: Vec<T>,
    r_min: T,
}

impl<'p, T: Scalar> Landscape<'p, T> {
    pub fn new(problem: &'p Problem<T>) -> Result<Self> {
        let nf = noiseless_fit(problem)?;
        let u_min = nf
            .f_min
            .iter()
            .zip(problem.f0())
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Self {
            problem,
            f_min: nf.f_min,
            u_min,
            r_min: nf.r_min,
        })
    }

    pub fn problem(&self) -> &'p Problem<T> {
        self.problem
    }

    pub fn r_min(&self) -> T {
        self.r_min
    }

    pub fn f_min(&self) -> &[T] {
        &self.f_min
    }

    /// Landscape of one noise vector.
    pub fn draw<'a>(&'a self, eps: &'a NoiseDraw<T>) -> Result<DrawLandscape<'a, T>> {
        let p = self.problem;
        let n = p.n();
        if eps.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: eps.len(),
            });
        }
        let nt = lit::<T>(n as f64);
        let e = &eps.epsilon;
        let m_min = e.iter().zip(&self.u_min).map(|(&a, &b)| a * b).sum::<T>() / nt;
        let kind = match p.seminorm() {
            Seminorm::Quadratic(_) => {
                let sys = p.shifted_system().expect("quadratic problems carry a factorization");
                let solved = sys.solve(e)?;
                let q = nt * e.iter().zip(&solved).map(|(&a, &b)| a * b).sum::<T>();
                DrawKind::Quadratic { q: q.max(T::zero()) }
            }
            Seminorm::TotalVariation => DrawKind::Tv(tv::TvPath::new(p.f0(), e, p.lambda())),
        };
        Ok(DrawLandscape {
            land: self,
            eps,
            m_min,
            zero: eps.is_zero(),
            kind,
            evaluations: Cell::new(0),
        })
    }
}

enum DrawKind<'a, T> {
    /// `q = εᵀA⁻¹ε` with `A = I/n + λ²K`.
    Quadratic { q: T },
    Tv(tv::TvPath<'a, T>),
}

/// `M_n` and `H_n` for a fixed noise vector.
pub struct DrawLandscape<'a, T: Scalar = f64> {
    land: &'a Landscape<'a, T>,
    eps: &'a NoiseDraw<T>,
    m_min: T,
    zero: bool,
    kind: DrawKind<'a, T>,
    evaluations: Cell<usize>,
}

impl<'a, T: Scalar> DrawLandscape<'a, T> {
    pub fn noise(&self) -> &NoiseDraw<T> {
        self.eps
    }

    pub fn r_min(&self) -> T {
        self.land.r_min
    }

    /// Number of `M_n` evaluations so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations.get()
    }

    /// `M_n(R_min) = ⟨ε, f_min − f⁰⟩/n`.
    pub fn m_at_r_min(&self) -> T {
        self.m_min
    }

    /// `M_n(R)` together with its certificate.
    pub fn sup_correlation(&self, r: T) -> Result<SupCorrelation<T>> {
        self.evaluations.set(self.evaluations.get() + 1);
        let r_min = self.land.r_min;
        if !(r >= r_min - lit::<T>(FEASIBILITY_SLACK)) {
            return Err(Error::InfeasibleRadius {
                radius: to_f64(r),
                r_min: to_f64(r_min),
            });
        }
        let at_min = SupCorrelation {
            value: self.m_min,
            beta: T::zero(),
            duality_gap: T::zero(),
        };
        if r <= r_min || self.zero {
            return Ok(at_min);
        }
        let n = lit::<T>(self.land.problem.n() as f64);
        let delta = ((r - r_min) * (r + r_min)).sqrt();
        match &self.kind {
            DrawKind::Quadratic { q } => {
                if *q == T::zero() {
                    return Ok(at_min);
                }
                let root = q.sqrt();
                Ok(SupCorrelation {
                    value: self.m_min + delta * root / n,
                    beta: n * delta / root,
                    duality_gap: T::zero(),
                })
            }
            DrawKind::Tv(path) => {
                let sol = path.solve(r, r_min)?;
                let f0 = self.land.problem.f0();
                let value = self
                    .eps
                    .epsilon
                    .iter()
                    .zip(sol.f.iter().zip(f0))
                    .map(|(&e, (&f, &g))| e * (f - g))
                    .sum::<T>()
                    / n;
                let gap = ((r - sol.tau) * (r + sol.tau)).abs() / (lit::<T>(2.0) * sol.beta);
                Ok(SupCorrelation {
                    value,
                    beta: sol.beta,
                    duality_gap: gap,
                })
            }
        }
    }

    pub fn m_n(&self, r: T) -> Result<T> {
        self.sup_correlation(r).map(|s| s.value)
    }

    pub fn h_n(&self, r: T) -> Result<T> {
        Ok(self.m_n(r)? - r * r * lit(0.5))
    }

    /// `R*` from `R*² = R_min² + εᵀA⁻¹ε/n²`; quadratic penalties only.
    pub fn r_star_closed_form(&self) -> Option<T> {
        match &self.kind {
            DrawKind::Quadratic { q } => {
                let n = lit::<T>(self.land.problem.n() as f64);
                let r = self.land.r_min;
                Some((r * r + *q / (n * n)).sqrt())
            }
            DrawKind::Tv(_) => None,
        }
    }

    /// Golden-section maximizer of `H_n` on `[R_min, upper]`.
    pub fn r_star(&self, upper: T) -> Result<(T, T)> {
        let r_min = self.land.r_min;
        let tol = lit::<T>(R_STAR_TOL);
        let (r, h) = golden_section_max(|r| self.h_n(r), r_min, upper, tol)?;
        let reach = tol.max(T::epsilon() * lit(16.0) * upper.abs()) * lit(2.0);
        if upper > r_min && r >= upper - reach {
            return Err(Error::GridTooNarrow {
                upper: to_f64(upper),
            });
        }
        Ok((r, h))
    }

    /// Right end of an interval that contains `R*`, found by doubling.
    pub fn bracket_upper(&self) -> Result<T> {
        let r_min = self.land.r_min;
        let mut step = lit::<T>(1e-3) * (T::one() + r_min);
        let mut prev = self.h_n(r_min)?;
        for _ in 0..200 {
            let h = self.h_n(r_min + step)?;
            if h < prev {
                return Ok(r_min + step);
            }
            prev = h;
            step *= lit(2.0);
        }
        Err(Error::Convergence {
            solver: "radius bracketing",
            iterations: 200,
            residual: to_f64(step),
        })
    }

    /// Samples `M_n`, `H_n` on `radii` and locates `R*` on `[R_min, radii.last]`.
    pub fn curve(&self, radii: &[T]) -> Result<LandscapeCurve<T>> {
        check_radii(radii, self.land.r_min)?;
        let mut m_values = Vec::with_capacity(radii.len());
        let mut h_values = Vec::with_capacity(radii.len());
        for &r in radii {
            let m = self.m_n(r)?;
            m_values.push(m);
            h_values.push(m - r * r * lit(0.5));
        }
        let upper = *radii.last().expect("non-empty radii");
        let (r_star, h_at_r_star) = self.r_star(upper)?;
        if let Some(closed) = self.r_star_closed_form() {
            let tol = lit::<T>(1e-7).max(T::epsilon() * lit(1e3)) * closed.max(T::one());
            if (closed - r_star).abs() > tol {
                return Err(Error::Convergence {
                    solver: "golden-section search",
                    iterations: 0,
                    residual: to_f64((closed - r_star).abs()),
                });
            }
        }
        Ok(LandscapeCurve {
            radii: radii.to_vec(),
            m_values,
            h_values,
            r_star,
            h_at_r_star,
        })
    }
}

fn check_radii<T: Scalar>(radii: &[T], r_min: T) -> Result<()> {
    if radii.len() < 2 {
        return Err(Error::InvalidArgument("radius grid needs at least two points".into()));
    }
    if radii.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("radii must be strictly increasing".into()));
    }
    if !(radii[0] >= r_min - lit::<T>(FEASIBILITY_SLACK)) {
        return Err(Error::InfeasibleRadius {
            radius: to_f64(radii[0]),
            r_min: to_f64(r_min),
        });
    }
    Ok(())
}

/// `M_n(R)` for one problem and noise vector.
pub fn sup_correlation<T: Scalar>(p: &Problem<T>, eps: &NoiseDraw<T>, r: T) -> Result<SupCorrelation<T>> {
    let land = Landscape::new(p)?;
    let draw = land.draw(eps)?;
    draw.sup_correlation(r)
}

/// Landscape curve for one problem and noise vector.
pub fn landscape_curve<T: Scalar>(
    p: &Problem<T>,
    eps: &NoiseDraw<T>,
    radii: &[T],
) -> Result<LandscapeCurve<T>> {
    let land = Landscape::new(p)?;
    let draw = land.draw(eps)?;
    draw.curve(radii)
}

/// `τ(f̂)` and `R*` computed independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport<T = f64> {
    pub tau: T,
    pub r_star: T,
    pub abs_diff: T,
}

/// Fits `Y = f⁰ + ε` and maximizes `H_n` separately, reporting both.
pub fn verify_tau_equals_rstar<T: Scalar>(p: &Problem<T>, eps: &NoiseDraw<T>) -> Result<IdentityReport<T>> {
    let land = Landscape::new(p)?;
    let draw = land.draw(eps)?;
    identity_for_draw(&draw)
}

pub(crate) fn identity_for_draw<T: Scalar>(draw: &DrawLandscape<'_, T>) -> Result<IdentityReport<T>> {
    let p = draw.land.problem;
    let y = response(p, draw.eps);
    let tau = fit(p, &y)?.tau;
    let upper = draw.bracket_upper()?;
    let (r_star, _) = draw.r_star(upper)?;
    Ok(IdentityReport {
        tau,
        r_star,
        abs_diff: (tau - r_star).abs(),
    })
}

pub(crate) fn response<T: Scalar>(p: &Problem<T>, eps: &NoiseDraw<T>) -> Vec<T> {
    p.f0().iter().zip(&eps.epsilon).map(|(&a, &e)| a + e).collect()
}

/// `size` radii: `R_min` followed by `R_min + offset` with offsets spaced
/// geometrically from `10⁻⁶·span` to `span`.
pub fn default_radii<T: Scalar>(r_min: T, span: T, size: usize) -> Result<Vec<T>> {
    if size < 3 {
        return Err(Error::InvalidArgument("radius grid needs at least three points".into()));
    }
    if !(span > T::zero()) {
        return Err(Error::InvalidArgument("radius span must be positive".into()));
    }
    let steps = (size - 2) as f64;
    let mut radii = Vec::with_capacity(size);
    radii.push(r_min);
    for j in 0..size - 1 {
        let offset = lit::<T>(10f64.powf(-6.0 * (1.0 - j as f64 / steps))) * span;
        radii.push(r_min + offset);
    }
    Ok(radii)
}

/// Monte-Carlo landscape summary over independent noise draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary<T = f64> {
    pub reps: usize,
    pub r_min: T,
    pub radii: Vec<T>,
    pub h_mean: Vec<T>,
    pub h_stderr: Vec<T>,
    /// Maximizer of the interpolated `h_mean`.
    pub r0_hat: T,
    /// Jackknife standard error of `r0_hat`.
    pub r0_stderr: T,
    pub r_star_samples: Vec<T>,
    pub tau_samples: Vec<T>,
    pub fit_error_samples: Vec<T>,
    pub penalty_samples: Vec<T>,
    /// `H_n` per repetition and radius, repetition-major.
    pub h_samples: Vec<Vec<T>>,
}

struct RepOutcome<T> {
    curve: LandscapeCurve<T>,
    tau: T,
    fit_error: T,
    penalty: T,
}

/// Averages `H_n` over `reps` draws keyed by `master_seed` and maximizes the mean.
pub fn estimate_r0<T: Scalar>(
    p: &Problem<T>,
    reps: usize,
    radii: &[T],
    master_seed: u64,
) -> Result<MonteCarloSummary<T>> {
    if reps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 repetitions, got {reps}")));
    }
    let n = p.n();
    let draws: Vec<NoiseDraw<T>> = (0..reps as u64)
        .into_par_iter()
        .map(|i| NoiseDraw::generate(n, master_seed, i))
        .collect();
    estimate_r0_from_draws(p, &draws, radii)
}

/// [`estimate_r0`] on caller-supplied draws.
pub fn estimate_r0_from_draws<T: Scalar>(
    p: &Problem<T>,
    draws: &[NoiseDraw<T>],
    radii: &[T],
) -> Result<MonteCarloSummary<T>> {
    let reps = draws.len();
    if reps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 repetitions, got {reps}")));
    }
    let land = Landscape::new(p)?;
    check_radii(radii, land.r_min)?;
    let outcomes: Vec<RepOutcome<T>> = draws
        .par_iter()
        .map(|eps| {
            let draw = land.draw(eps)?;
            let curve = draw.curve(radii)?;
            let fitted = fit(p, &response(p, eps))?;
            Ok(RepOutcome {
                curve,
                tau: fitted.tau,
                fit_error: fitted.fit_error,
                penalty: fitted.penalty,
            })
        })
        .collect::<Result<_>>()?;

    let k = radii.len();
    let rt = lit::<T>(reps as f64);
    let mut sums = vec![T::zero(); k];
    for o in &outcomes {
        for (s, &h) in sums.iter_mut().zip(&o.curve.h_values) {
            *s += h;
        }
    }
    let h_mean: Vec<T> = sums.iter().map(|&s| s / rt).collect();
    let h_stderr: Vec<T> = (0..k)
        .map(|j| {
            let ss: T = outcomes
                .iter()
                .map(|o| {
                    let d = o.curve.h_values[j] - h_mean[j];
                    d * d
                })
                .sum();
            (ss / (rt - T::one()) / rt).sqrt()
        })
        .collect();
    let r0_hat = maximize_mean(radii, &h_mean)?;

    // Jackknife over repetitions.
    let mut loo = Vec::with_capacity(reps);
    for o in &outcomes {
        let h: Vec<T> = sums
            .iter()
            .zip(&o.curve.h_values)
            .map(|(&s, &v)| (s - v) / (rt - T::one()))
            .collect();
        loo.push(maximize_mean(radii, &h)?);
    }
    let loo_mean = loo.iter().copied().sum::<T>() / rt;
    let ss: T = loo.iter().map(|&v| (v - loo_mean) * (v - loo_mean)).sum();
    let r0_stderr = ((rt - T::one()) / rt * ss).sqrt();

    Ok(MonteCarloSummary {
        reps,
        r_min: land.r_min,
        radii: radii.to_vec(),
        h_mean,
        h_stderr,
        r0_hat,
        r0_stderr,
        r_star_samples: outcomes.iter().map(|o| o.curve.r_star).collect(),
        tau_samples: outcomes.iter().map(|o| o.tau).collect(),
        fit_error_samples: outcomes.iter().map(|o| o.fit_error).collect(),
        penalty_samples: outcomes.iter().map(|o| o.penalty).collect(),
        h_samples: outcomes.into_iter().map(|o| o.curve.h_values).collect(),
    })
}

/// Maximizer of sampled values, refined on a natural cubic spline in
/// `t = ln(R − radii[0])`.
fn maximize_mean<T: Scalar>(radii: &[T], h: &[T]) -> Result<T> {
    let last = radii.len() - 1;
    let mut best = 0;
    for j in 1..=last {
        if h[j] > h[best] {
            best = j;
        }
    }
    if best == 0 || best == last {
        return Err(Error::GridTooNarrow {
            upper: to_f64(radii[last]),
        });
    }
    let base = radii[0];
    let t: Vec<T> = radii[1..].iter().map(|&r| (r - base).ln()).collect();
    let spline = NaturalCubicSpline::new(t.clone(), h[1..].to_vec())?;
    // Indices into `t` are shifted by one relative to `radii`.
    let lo = t[best.saturating_sub(2)];
    let hi = t[(best).min(t.len() - 1)];
    let tol = lit::<T>(1e-12) * (T::one() + hi.abs());
    let (tm, _) = golden_section_max(|x| Ok(spline.eval(x)), lo, hi, tol)?;
    Ok(base + tm.exp())
}
