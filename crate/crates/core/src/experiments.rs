//! Monte-Carlo audits of the concentration, rate and landscape results.
//!
//! Experiments run in `f64`; each is a deterministic function of its
//! configuration and master seed.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bounds::{self, EntropyParams};
use crate::error::{Error, Result};
use crate::estimator::Problem;
use crate::landscape::{
    default_radii, estimate_r0, identity_for_draw, Landscape, MonteCarloSummary, NoiseDraw,
};
use crate::penalty::{spline_penalty_form, DesignGrid, Seminorm};

/// Concavity tolerance for quadratic penalties.
pub const CONCAVITY_TOL_QUADRATIC: f64 = 1e-9;
/// Concavity tolerance for total variation.
pub const CONCAVITY_TOL_TV: f64 = 1e-6;
/// `|τ(f̂) − R*|` tolerance for quadratic penalties.
pub const IDENTITY_TOL_QUADRATIC: f64 = 1e-6;
/// `|τ(f̂) − R*|` tolerance for total variation.
pub const IDENTITY_TOL_TV: f64 = 1e-4;
/// Minimum repetitions for the tail and rate experiments.
pub const MIN_REPS: usize = 50;
/// Allowed distance between fitted and target log-log slopes.
pub const SLOPE_TOL: f64 = 0.08;
/// Largest allowed ratio of median `I(f̂)` across sample sizes.
pub const PENALTY_SPREAD_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Order-`m` smoothing spline penalty.
    Spline { m: usize },
    Tv,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Spline { .. } => "spline_m",
            Scenario::Tv => "tv",
        }
    }

    /// Entropy exponent: `1/m` for splines, `1` for total variation.
    pub fn default_alpha(&self) -> f64 {
        match self {
            Scenario::Spline { m } => 1.0 / *m as f64,
            Scenario::Tv => 1.0,
        }
    }

    /// Tuning-parameter scale used when none is given.
    pub fn default_lambda_scale(&self) -> f64 {
        match self {
            Scenario::Spline { .. } => DEFAULT_SPLINE_LAMBDA_SCALE,
            Scenario::Tv => DEFAULT_TV_LAMBDA_SCALE,
        }
    }

    pub fn default_f0(&self) -> TrueFunction {
        match self {
            Scenario::Spline { .. } => TrueFunction::Sin2Pi,
            Scenario::Tv => TrueFunction::Step3,
        }
    }
}

pub const DEFAULT_SPLINE_LAMBDA_SCALE: f64 = 0.05;
pub const DEFAULT_TV_LAMBDA_SCALE: f64 = 0.3;
pub const DEFAULT_N_LIST: [usize; 7] = [128, 256, 512, 1024, 2048, 4096, 8192];
pub const DEFAULT_REPS: usize = 100;
pub const DEFAULT_RADIUS_GRID_SIZE: usize = 64;
pub const DEFAULT_SEED: u64 = 20240601;

/// Named regression functions on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueFunction {
    /// `sin(2πx)`.
    Sin2Pi,
    /// `(2x − 1)³`.
    Poly3,
    /// `0`, `1`, `½` on the thirds of `[0, 1]`.
    Step3,
    /// `2x + 1`.
    Linear,
}

impl TrueFunction {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sin2pi" => Some(Self::Sin2Pi),
            "poly3" => Some(Self::Poly3),
            "step3" | "step" => Some(Self::Step3),
            "linear" => Some(Self::Linear),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sin2Pi => "sin2pi",
            Self::Poly3 => "poly3",
            Self::Step3 => "step3",
            Self::Linear => "linear",
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Sin2Pi => (2.0 * std::f64::consts::PI * x).sin(),
            Self::Poly3 => (2.0 * x - 1.0).powi(3),
            Self::Step3 => {
                if 3.0 * x < 1.0 {
                    0.0
                } else if 3.0 * x < 2.0 {
                    1.0
                } else {
                    0.5
                }
            }
            Self::Linear => 2.0 * x + 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub f0: TrueFunction,
    pub n_list: Vec<usize>,
    pub lambda_scale: f64,
    pub alpha: f64,
    pub reps: usize,
    pub master_seed: u64,
    pub radius_grid_size: usize,
}

impl ExperimentConfig {
    /// Defaults for a scenario.
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            f0: scenario.default_f0(),
            n_list: DEFAULT_N_LIST.to_vec(),
            lambda_scale: scenario.default_lambda_scale(),
            alpha: scenario.default_alpha(),
            reps: DEFAULT_REPS,
            master_seed: DEFAULT_SEED,
            radius_grid_size: DEFAULT_RADIUS_GRID_SIZE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Scenario::Spline { m } = self.scenario {
            if m < 2 {
                return Err(Error::InvalidArgument(format!("m must be at least 2, got {m}")));
            }
        }
        if self.n_list.is_empty() {
            return Err(Error::InvalidArgument("n_list is empty".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("n_list must be strictly increasing".into()));
        }
        let min_n = match self.scenario {
            Scenario::Spline { m } => m + 1,
            Scenario::Tv => 3,
        };
        if self.n_list[0] < min_n.max(3) {
            return Err(Error::InvalidArgument(format!(
                "n_list entries must be at least {}",
                min_n.max(3)
            )));
        }
        if !(self.lambda_scale > 0.0 && self.lambda_scale.is_finite()) {
            return Err(Error::InvalidArgument("lambda_scale must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 2), got {}",
                self.alpha
            )));
        }
        if self.reps < 2 {
            return Err(Error::InvalidArgument("reps must be at least 2".into()));
        }
        if self.radius_grid_size < 3 {
            return Err(Error::InvalidArgument("radius_grid_size must be at least 3".into()));
        }
        Ok(())
    }

    pub fn entropy(&self) -> Result<EntropyParams<f64>> {
        EntropyParams::with_alpha(self.alpha)
    }

    /// `c · n^{−1/(2+α)}`.
    pub fn lambda(&self, n: usize) -> Result<f64> {
        bounds::rate_lambda(n, self.alpha, self.lambda_scale)
    }

    /// Problem on `n` equispaced points with the rate-optimal `λ`.
    pub fn problem(&self, n: usize) -> Result<Problem<f64>> {
        self.problem_with_lambda(n, self.lambda(n)?)
    }

    pub fn problem_with_lambda(&self, n: usize, lambda: f64) -> Result<Problem<f64>> {
        let grid = DesignGrid::uniform(n)?;
        let f0 = grid.sample(|x| self.f0.eval(x));
        let seminorm = match self.scenario {
            Scenario::Spline { m } => spline_penalty_form(&grid, m)?,
            Scenario::Tv => Seminorm::TotalVariation,
        };
        Problem::new(grid, f0, lambda, seminorm)
    }

    /// Default radius grid: span `8 K₂` above `R_min`.
    pub fn radii(&self, p: &Problem<f64>, r_min: f64) -> Result<Vec<f64>> {
        let (_, k2) = bounds::k_constants(&self.entropy()?, p.n(), p.lambda())?;
        default_radii(r_min, 8.0 * k2, self.radius_grid_size)
    }

    pub fn concavity_tol(&self) -> f64 {
        match self.scenario {
            Scenario::Spline { .. } => CONCAVITY_TOL_QUADRATIC,
            Scenario::Tv => CONCAVITY_TOL_TV,
        }
    }

    pub fn identity_tol(&self) -> f64 {
        match self.scenario {
            Scenario::Spline { .. } => IDENTITY_TOL_QUADRATIC,
            Scenario::Tv => IDENTITY_TOL_TV,
        }
    }
}

fn tolerance_for(p: &Problem<f64>, quadratic: f64, tv: f64) -> f64 {
    if p.seminorm().is_quadratic() {
        quadratic
    } else {
        tv
    }
}

/// Median of a sample (mean of the two central values for even sizes).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Least-squares line with a 95% Student-t interval for the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    let k = x.len();
    if y.len() != k {
        return Err(Error::Dimension {
            expected: k,
            got: y.len(),
        });
    }
    if k < 3 {
        return Err(Error::InvalidArgument(format!(
            "slope needs at least 3 points, got {k}"
        )));
    }
    let kf = k as f64;
    let mx = x.iter().sum::<f64>() / kf;
    let my = y.iter().sum::<f64>() / kf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidArgument("all abscissae are equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let stderr = (rss / (kf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, kf - 2.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
        ci_low: slope - t * stderr,
        ci_high: slope + t * stderr,
    })
}

/// One row of an empirical-versus-theoretical tail table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub x: f64,
    /// Frequency of exceeding `x`.
    pub empirical: f64,
    /// Frequency used for the gate, after allowing for the uncertainty of the
    /// centring estimate.
    pub empirical_adjusted: f64,
    pub bound: f64,
    /// Binomial standard error at the bound.
    pub stderr: f64,
    /// Whether the row is gated (`bound < gate_below`).
    pub gated: bool,
    pub pass: bool,
}

fn tail_row(x: f64, empirical: f64, adjusted: f64, bound: f64, reps: usize, gate_below: f64) -> TailRow {
    let stderr = (bound * (1.0 - bound) / reps as f64).sqrt();
    let gated = bound < gate_below;
    TailRow {
        x,
        empirical,
        empirical_adjusted: adjusted,
        bound,
        stderr,
        gated,
        pass: !gated || adjusted <= bound + 3.0 * stderr,
    }
}

fn exceed_frequency(dev: &[f64], x: f64) -> f64 {
    dev.iter().filter(|&&d| d >= x).count() as f64 / dev.len() as f64
}

/// `x` grid `0.05, 0.10, …, 1.00`.
pub fn concentration_x_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub lambda: f64,
    pub reps: usize,
    pub r_min: f64,
    pub r0_hat: f64,
    pub r0_stderr: f64,
    pub rows: Vec<TailRow>,
    pub identity_max_diff: f64,
    pub identity_pass: bool,
    pub pass: bool,
}

/// Tail of `|τ(f̂)/r̂₀ − 1|` against the concentration bound at `x = 0.05…1`.
pub fn concentration_experiment(cfg: &ExperimentConfig, n: usize) -> Result<ConcentrationReport> {
    let p = cfg.problem(n)?;
    concentration_for_problem(cfg, &p)
}

/// [`concentration_experiment`] for an explicit problem.
pub fn concentration_for_problem(cfg: &ExperimentConfig, p: &Problem<f64>) -> Result<ConcentrationReport> {
    cfg.validate()?;
    if cfg.reps < MIN_REPS {
        return Err(Error::InvalidArgument(format!(
            "concentration needs at least {MIN_REPS} repetitions, got {}",
            cfg.reps
        )));
    }
    let summary = monte_carlo(cfg, p)?;
    let r0 = summary.r0_hat;
    let dev: Vec<f64> = summary.tau_samples.iter().map(|t| (t / r0 - 1.0).abs()).collect();
    let rel = summary.r0_stderr / r0;
    let mut rows = Vec::new();
    for x in concentration_x_grid() {
        let bound = bounds::theorem1_tail(x, p.n(), r0)?;
        // A relative error η in r̂₀ moves the deviation by at most |η|(1 + x).
        let shift = 3.0 * rel * (1.0 + x);
        rows.push(tail_row(
            x,
            exceed_frequency(&dev, x),
            exceed_frequency(&dev, x + shift),
            bound,
            summary.reps,
            1.0,
        ));
    }
    let identity_max_diff = identity_gap(&summary);
    let identity_pass = identity_max_diff <= cfg.identity_tol();
    let pass = identity_pass && rows.iter().all(|r| r.pass);
    Ok(ConcentrationReport {
        n: p.n(),
        lambda: p.lambda(),
        reps: summary.reps,
        r_min: summary.r_min,
        r0_hat: r0,
        r0_stderr: summary.r0_stderr,
        rows,
        identity_max_diff,
        identity_pass,
        pass,
    })
}

fn identity_gap(s: &MonteCarloSummary<f64>) -> f64 {
    s.tau_samples
        .iter()
        .zip(&s.r_star_samples)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn monte_carlo(cfg: &ExperimentConfig, p: &Problem<f64>) -> Result<MonteCarloSummary<f64>> {
    let land = Landscape::new(p)?;
    let radii = cfg.radii(p, land.r_min())?;
    estimate_r0(p, cfg.reps, &radii, cfg.master_seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub lambda: f64,
    pub r_min: f64,
    /// `τ(f⁰) = λ I(f⁰)`.
    pub tau_f0: f64,
    /// `R_min / τ(f⁰)`.
    pub condition2_ratio: f64,
    pub r0_hat: f64,
    pub r0_stderr: f64,
    pub median_tau: f64,
    pub median_fit_error: f64,
    pub median_penalty: f64,
    pub identity_max_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateScanReport {
    pub target_slope: f64,
    pub rows: Vec<RateRow>,
    pub fit_r0: SlopeFit,
    pub fit_tau: SlopeFit,
    pub fit_fit_error: SlopeFit,
    pub fit_penalty: SlopeFit,
    /// Largest over smallest median `I(f̂)`.
    pub penalty_spread: f64,
    /// Largest over smallest `R_min / τ(f⁰)`.
    pub condition2_drift: f64,
    pub condition2_flag: bool,
    pub identity_pass: bool,
    /// Both `r̂₀` and median `τ(f̂)` slopes within [`SLOPE_TOL`] of the target.
    pub slope_pass: bool,
    pub penalty_pass: bool,
    pub pass: bool,
}

/// Log-log slopes of `r̂₀`, median `τ(f̂)`, median `‖f̂ − f⁰‖_n` and median
/// `I(f̂)` against `n`, with `λ = c n^{−1/(2+α)}`.
pub fn rate_scan(cfg: &ExperimentConfig) -> Result<RateScanReport> {
    cfg.validate()?;
    if cfg.reps < MIN_REPS {
        return Err(Error::InvalidArgument(format!(
            "rate scan needs at least {MIN_REPS} repetitions, got {}",
            cfg.reps
        )));
    }
    if cfg.n_list.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "rate scan needs at least 3 sample sizes, got {}",
            cfg.n_list.len()
        )));
    }
    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let p = cfg.problem(n)?;
        let s = monte_carlo(cfg, &p)?;
        let tau_f0 = p.tau(p.f0())?;
        rows.push(RateRow {
            n,
            lambda: p.lambda(),
            r_min: s.r_min,
            tau_f0,
            condition2_ratio: s.r_min / tau_f0,
            r0_hat: s.r0_hat,
            r0_stderr: s.r0_stderr,
            median_tau: median(&s.tau_samples),
            median_fit_error: median(&s.fit_error_samples),
            median_penalty: median(&s.penalty_samples),
            identity_max_diff: identity_gap(&s),
        });
    }
    let ln_n: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let slope = |f: &dyn Fn(&RateRow) -> f64| -> Result<SlopeFit> {
        let y: Vec<f64> = rows.iter().map(|r| f(r).ln()).collect();
        ols_slope(&ln_n, &y)
    };
    let fit_r0 = slope(&|r| r.r0_hat)?;
    let fit_tau = slope(&|r| r.median_tau)?;
    let fit_fit_error = slope(&|r| r.median_fit_error)?;
    let fit_penalty = slope(&|r| r.median_penalty)?;
    let spread = |f: &dyn Fn(&RateRow) -> f64| {
        let hi = rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let lo = rows.iter().map(f).fold(f64::INFINITY, f64::min);
        hi / lo
    };
    let penalty_spread = spread(&|r| r.median_penalty);
    let condition2_drift = spread(&|r| r.condition2_ratio);
    let identity_pass = rows.iter().all(|r| r.identity_max_diff <= cfg.identity_tol());
    let target_slope = bounds::rate_exponent(cfg.alpha);
    let slope_pass = (fit_r0.slope - target_slope).abs() <= SLOPE_TOL
        && (fit_tau.slope - target_slope).abs() <= SLOPE_TOL;
    let penalty_pass = penalty_spread < PENALTY_SPREAD_LIMIT;
    Ok(RateScanReport {
        target_slope,
        slope_pass,
        penalty_pass,
        pass: slope_pass && penalty_pass && identity_pass,
        rows,
        fit_r0,
        fit_tau,
        fit_fit_error,
        fit_penalty,
        penalty_spread,
        condition2_drift,
        condition2_flag: condition2_drift > 4.0,
        identity_pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavityAudit {
    /// Smallest `H_n(R_j) − [w H_n(R_{j−1}) + (1 − w) H_n(R_{j+1})]` over
    /// consecutive triples, with chord weights `w` for uneven spacing.
    pub worst_margin: f64,
    pub violations: usize,
    /// Whether `M_n` was non-decreasing along the grid.
    pub monotone: bool,
    pub tolerance: f64,
    pub pass: bool,
}

/// Chord margins of `h` on the grid `r`.
pub fn concavity_margins(r: &[f64], h: &[f64]) -> Vec<f64> {
    (1..r.len().saturating_sub(1))
        .map(|j| {
            let w = (r[j + 1] - r[j]) / (r[j + 1] - r[j - 1]);
            h[j] - (w * h[j - 1] + (1.0 - w) * h[j + 1])
        })
        .collect()
}

/// Concavity of `H_n` along `radii` for one noise vector.
pub fn concavity_audit(p: &Problem<f64>, eps: &NoiseDraw<f64>, radii: &[f64]) -> Result<ConcavityAudit> {
    let land = Landscape::new(p)?;
    let draw = land.draw(eps)?;
    let mut m = Vec::with_capacity(radii.len());
    for &r in radii {
        m.push(draw.m_n(r)?);
    }
    let h: Vec<f64> = m.iter().zip(radii).map(|(v, r)| v - 0.5 * r * r).collect();
    let tolerance = tolerance_for(p, CONCAVITY_TOL_QUADRATIC, CONCAVITY_TOL_TV);
    let margins = concavity_margins(radii, &h);
    let worst_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let violations = margins.iter().filter(|&&v| v < -tolerance).count();
    let monotone = m.windows(2).all(|w| w[1] >= w[0] - tolerance);
    Ok(ConcavityAudit {
        worst_margin,
        violations,
        monotone,
        tolerance,
        pass: violations == 0 && monotone,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavitySummary {
    pub draws: usize,
    pub worst_margin: f64,
    pub violations: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// [`concavity_audit`] over `reps` seeded draws on the default radius grid.
pub fn concavity_study(cfg: &ExperimentConfig, n: usize) -> Result<ConcavitySummary> {
    let p = cfg.problem(n)?;
    let land = Landscape::new(&p)?;
    let radii = cfg.radii(&p, land.r_min())?;
    let audits: Vec<ConcavityAudit> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|i| concavity_audit(&p, &NoiseDraw::generate(n, cfg.master_seed, i), &radii))
        .collect::<Result<_>>()?;
    let worst_margin = audits.iter().map(|a| a.worst_margin).fold(f64::INFINITY, f64::min);
    let violations = audits.iter().map(|a| a.violations).sum();
    Ok(ConcavitySummary {
        draws: audits.len(),
        worst_margin,
        violations,
        tolerance: cfg.concavity_tol(),
        pass: audits.iter().all(|a| a.pass),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityAudit {
    pub draws: usize,
    pub max_abs_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `|τ(f̂) − R*|` over `reps` seeded draws.
pub fn identity_audit(p: &Problem<f64>, reps: usize, master_seed: u64) -> Result<IdentityAudit> {
    let land = Landscape::new(p)?;
    let n = p.n();
    let diffs: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let eps = NoiseDraw::generate(n, master_seed, i);
            let draw = land.draw(&eps)?;
            identity_for_draw(&draw).map(|r| r.abs_diff)
        })
        .collect::<Result<_>>()?;
    let max_abs_diff = diffs.iter().copied().fold(0.0, f64::max);
    let tolerance = tolerance_for(p, IDENTITY_TOL_QUADRATIC, IDENTITY_TOL_TV);
    Ok(IdentityAudit {
        draws: reps,
        max_abs_diff,
        tolerance,
        pass: max_abs_diff <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichPoint {
    pub n: usize,
    pub lambda: f64,
    /// Largest `K` with `h_mean(R) ≥ K R − R²/2` on the grid.
    pub fitted_k1: f64,
    /// Smallest `K` with `h_mean(R) ≤ K R − R²/2` on the grid.
    pub fitted_k2: f64,
    pub theory_k1: f64,
    pub theory_k2: f64,
}

/// Fitted envelope constants for one sample size and tuning parameter.
pub fn sandwich_point(cfg: &ExperimentConfig, n: usize, lambda: f64) -> Result<SandwichPoint> {
    let p = cfg.problem_with_lambda(n, lambda)?;
    let s = monte_carlo(cfg, &p)?;
    let mut k1 = f64::INFINITY;
    let mut k2 = f64::NEG_INFINITY;
    for (&r, &h) in s.radii.iter().zip(&s.h_mean) {
        if r > 0.0 {
            let k = (h + 0.5 * r * r) / r;
            k1 = k1.min(k);
            k2 = k2.max(k);
        }
    }
    let (t1, t2) = bounds::k_constants(&cfg.entropy()?, n, lambda)?;
    Ok(SandwichPoint {
        n,
        lambda,
        fitted_k1: k1,
        fitted_k2: k2,
        theory_k1: t1,
        theory_k2: t2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    /// `λ = c n₀^{−1/(2+α)}` at the smallest sample size, shared by all rows.
    pub lambda: f64,
    pub points: Vec<SandwichPoint>,
    /// `K₂(n) / K₂(n₀) · (n/n₀)^{1/2}` per row; one under exact scaling.
    pub k2_scaling: Vec<f64>,
    pub max_relative_error: f64,
    pub ordered: bool,
    pub pass: bool,
}

/// Checks that the fitted `K₂` scales as `n^{−1/2}` at fixed `λ` (within 25%).
pub fn sandwich_audit(cfg: &ExperimentConfig) -> Result<SandwichReport> {
    cfg.validate()?;
    let lambda = cfg.lambda(cfg.n_list[0])?;
    let points: Vec<SandwichPoint> = cfg
        .n_list
        .iter()
        .map(|&n| sandwich_point(cfg, n, lambda))
        .collect::<Result<_>>()?;
    let base = &points[0];
    let k2_scaling: Vec<f64> = points
        .iter()
        .map(|pt| pt.fitted_k2 / base.fitted_k2 * (pt.n as f64 / base.n as f64).sqrt())
        .collect();
    let max_relative_error = k2_scaling.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let ordered = points.iter().all(|pt| pt.fitted_k1 <= pt.fitted_k2);
    Ok(SandwichReport {
        lambda,
        pass: ordered && max_relative_error <= 0.25,
        points,
        k2_scaling,
        max_relative_error,
        ordered,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HnTailReport {
    pub n: usize,
    pub radius: f64,
    pub reps: usize,
    /// Sample mean of `H_n(R)`.
    pub h_hat: f64,
    pub rows: Vec<TailRow>,
    pub pass: bool,
}

/// `t` grid `R (2/n)^{1/2} · {¼, ½, …, 4}`.
pub fn hn_t_grid(n: usize, r: f64) -> Vec<f64> {
    let unit = r * (2.0 / n as f64).sqrt();
    (1..=16).map(|k| unit * k as f64 * 0.25).collect()
}

/// Tail of `|H_n(R) − Ĥ(R)|` against the Gaussian concentration bound.
pub fn hn_tail_audit(p: &Problem<f64>, r: f64, reps: usize, master_seed: u64) -> Result<HnTailReport> {
    if reps < 2 {
        return Err(Error::InvalidArgument("need at least 2 repetitions".into()));
    }
    let land = Landscape::new(p)?;
    let n = p.n();
    let h: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let eps = NoiseDraw::generate(n, master_seed, i);
            land.draw(&eps)?.h_n(r)
        })
        .collect::<Result<_>>()?;
    let h_hat = h.iter().sum::<f64>() / reps as f64;
    let dev: Vec<f64> = h.iter().map(|v| (v - h_hat).abs()).collect();
    let mut rows = Vec::new();
    for t in hn_t_grid(n, r) {
        let bound = bounds::gaussian_hn_tail(t, n, r)?;
        let e = exceed_frequency(&dev, t);
        rows.push(tail_row(t, e, e, bound, reps, 0.5));
    }
    Ok(HnTailReport {
        n,
        radius: r,
        reps,
        h_hat,
        pass: rows.iter().all(|row| row.pass),
        rows,
    })
}
