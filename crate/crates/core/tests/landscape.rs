mod common;

use common::{cubic_energy_matrix, ellipsoid_sup, rng, tv3_sup, uniform_vec};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use tradeoff_core::estimator::{noiseless_fit, Problem};
use tradeoff_core::landscape::{
    default_radii, estimate_r0, estimate_r0_from_draws, landscape_curve, sup_correlation, verify_tau_equals_rstar,
    Landscape, MonteCarloSummary, NoiseDraw,
};
use tradeoff_core::penalty::{spline_penalty_form, DesignGrid, Seminorm};
use tradeoff_core::Error;

fn spline_problem(n: usize, lambda: f64, f0: impl Fn(f64) -> f64) -> Problem<f64> {
    let g = DesignGrid::<f64>::uniform(n).unwrap();
    let k = spline_penalty_form(&g, 2).unwrap();
    let v = g.sample(f0);
    Problem::new(g, v, lambda, k).unwrap()
}

fn tv_problem(n: usize, lambda: f64, f0: impl Fn(f64) -> f64) -> Problem<f64> {
    let g = DesignGrid::<f64>::uniform(n).unwrap();
    let v = g.sample(f0);
    Problem::new(g, v, lambda, Seminorm::TotalVariation).unwrap()
}

fn sine(x: f64) -> f64 {
    (2.0 * std::f64::consts::PI * x).sin()
}

fn step(x: f64) -> f64 {
    (3.0 * x).floor().min(2.0)
}

/// `A = I/n + λ²K` with `K` assembled from the energy oracle.
fn dense_a(p: &Problem<f64>) -> DMatrix<f64> {
    let n = p.n();
    let k = cubic_energy_matrix(p.grid().points());
    DMatrix::identity(n, n) / n as f64 + k * p.lambda().powi(2)
}

/// `(R_min², εᵀA⁻¹ε)` evaluated densely.
fn dense_landscape_terms(p: &Problem<f64>, a: &DMatrix<f64>, eps: &[f64]) -> (f64, f64) {
    let n = p.n() as f64;
    let f0 = DVector::from_row_slice(p.f0());
    let lu = a.clone().lu();
    // Minimizer of τ solves A f = f⁰/n.
    let f_min = lu.solve(&(&f0 / n)).unwrap();
    let d = &f_min - &f0;
    let r_min2 = d.norm_squared() / n + (&f_min.transpose() * (a - DMatrix::identity(p.n(), p.n()) / n) * &f_min)[0];
    let e = DVector::from_row_slice(eps);
    let q = e.dot(&lu.solve(&e).unwrap());
    (r_min2, q)
}

#[test]
fn quadratic_sup_matches_projected_gradient() {
    let mut r = rng(21);
    let x = [0.0, 0.3, 0.55, 1.0];
    let k = cubic_energy_matrix(&x);
    for _ in 0..5 {
        let f0 = uniform_vec(&mut r, 4, -1.0, 1.0);
        let eps = uniform_vec(&mut r, 4, -2.0, 2.0);
        let lambda = 0.3;
        let grid = DesignGrid::new(x.to_vec()).unwrap();
        let s = spline_penalty_form(&grid, 2).unwrap();
        let p = Problem::new(grid, f0.clone(), lambda, s).unwrap();
        let r_min = noiseless_fit(&p).unwrap().r_min;
        let radius = 2.0 * r_min + 0.1;
        let value = sup_correlation(&p, &NoiseDraw::from_values(eps.clone()), radius).unwrap().value;
        let oracle = ellipsoid_sup(&k, &f0, &eps, lambda, radius);
        assert!((value - oracle).abs() < 1e-6, "{value} vs {oracle}");
    }
}

#[test]
fn tv_sup_on_three_points_matches_pattern_enumeration() {
    let mut r = rng(22);
    for _ in 0..10 {
        let f0 = uniform_vec(&mut r, 3, -1.0, 1.0);
        let eps = uniform_vec(&mut r, 3, -2.0, 2.0);
        let lambda = 0.5;
        let p = Problem::new(DesignGrid::<f64>::uniform(3).unwrap(), f0.clone(), lambda, Seminorm::TotalVariation).unwrap();
        let land = Landscape::new(&p).unwrap();
        let draw_eps = NoiseDraw::from_values(eps.clone());
        let draw = land.draw(&draw_eps).unwrap();
        for radius in [land.r_min() + 0.05, 1.5 * land.r_min() + 0.3, land.r_min() + 2.0] {
            let sup = draw.sup_correlation(radius).unwrap();
            let oracle = tv3_sup(&f0, &eps, lambda, radius);
            assert!((sup.value - oracle).abs() < 1e-7, "R={radius}: {} vs {oracle}", sup.value);
            assert!(sup.duality_gap <= 1e-8);
        }
    }
}

#[test]
fn zero_noise_gives_a_flat_correlation_and_parabola() {
    for p in [spline_problem(30, 0.05, sine), tv_problem(30, 0.05, step)] {
        let land = Landscape::new(&p).unwrap();
        let radii = default_radii(land.r_min(), 1.0, 16).unwrap();
        let curve = landscape_curve(&p, &NoiseDraw::zeros(30), &radii).unwrap();
        assert!(curve.m_values.iter().all(|&m| m == 0.0));
        for (r, h) in curve.radii.iter().zip(&curve.h_values) {
            assert_eq!(*h, -0.5 * r * r);
        }
        assert_eq!(curve.r_star, land.r_min());
        let id = verify_tau_equals_rstar(&p, &NoiseDraw::zeros(30)).unwrap();
        assert!(id.abs_diff <= 1e-12 * (1.0 + id.tau));
    }
}

#[test]
fn correlation_at_the_minimal_radius_is_explicit() {
    for p in [spline_problem(40, 0.08, sine), tv_problem(40, 0.08, step)] {
        let land = Landscape::new(&p).unwrap();
        let eps = NoiseDraw::generate(40, 3, 1);
        let expected = eps
            .epsilon
            .iter()
            .zip(land.f_min().iter().zip(p.f0()))
            .map(|(e, (a, b))| e * (a - b))
            .sum::<f64>()
            / 40.0;
        let d = land.draw(&eps).unwrap();
        assert!((d.m_n(land.r_min()).unwrap() - expected).abs() <= 1e-10);
        let radii = default_radii(land.r_min(), 2.0, 20).unwrap();
        let curve = d.curve(&radii).unwrap();
        let r0 = curve.radii[0];
        assert_eq!(curve.h_values[0], curve.m_values[0] - 0.5 * r0 * r0);
    }
}

#[test]
fn radii_below_the_minimum_are_infeasible() {
    let p = spline_problem(20, 0.1, sine);
    let land = Landscape::new(&p).unwrap();
    let eps = NoiseDraw::generate(20, 1, 0);
    let d = land.draw(&eps).unwrap();
    assert!(matches!(d.m_n(land.r_min() * 0.5), Err(Error::InfeasibleRadius { .. })));
    assert!(d.m_n(land.r_min() - 1e-13).is_ok());
}

#[test]
fn narrow_grids_are_reported() {
    let p = spline_problem(50, 0.05, sine);
    let land = Landscape::new(&p).unwrap();
    let eps = NoiseDraw::generate(50, 8, 0);
    let radii = default_radii(land.r_min(), 1e-4, 10).unwrap();
    assert!(matches!(landscape_curve(&p, &eps, &radii), Err(Error::GridTooNarrow { .. })));
    let radii = default_radii(land.r_min(), 1e-4, 10).unwrap();
    assert!(matches!(estimate_r0(&p, 4, &radii, 1), Err(Error::GridTooNarrow { .. })));
}

#[test]
fn golden_section_maximizer_matches_dense_closed_form() {
    let p = spline_problem(50, 0.04, sine);
    let a = dense_a(&p);
    let land = Landscape::new(&p).unwrap();
    let radii = default_radii(land.r_min(), 3.0, 64).unwrap();
    for rep in 0..5 {
        let eps = NoiseDraw::generate(50, 11, rep);
        let curve = landscape_curve(&p, &eps, &radii).unwrap();
        let (r_min2, q) = dense_landscape_terms(&p, &a, &eps.epsilon);
        let closed = (r_min2 + q / 2500.0).sqrt();
        assert!((curve.r_star - closed).abs() <= 1e-7, "{} vs {closed}", curve.r_star);
        // Stationarity of H_n at the closed-form radius.
        let d = land.draw(&eps).unwrap();
        let h = 1e-6;
        let slope = (d.h_n(closed + h).unwrap() - d.h_n(closed - h).unwrap()) / (2.0 * h);
        assert!(slope.abs() < 1e-6, "{slope}");
    }
}

#[test]
fn quadratic_correlation_matches_dense_closed_form() {
    let p = spline_problem(30, 0.1, sine);
    let a = dense_a(&p);
    let land = Landscape::new(&p).unwrap();
    let eps = NoiseDraw::generate(30, 4, 2);
    let (r_min2, q) = dense_landscape_terms(&p, &a, &eps.epsilon);
    assert!((land.r_min().powi(2) - r_min2).abs() <= 1e-9 * r_min2);
    let d = land.draw(&eps).unwrap();
    for radius in [land.r_min() + 0.01, land.r_min() + 1.0] {
        let expected = d.m_at_r_min() + (radius * radius - r_min2).sqrt() * q.sqrt() / 30.0;
        assert!((d.m_n(radius).unwrap() - expected).abs() <= 1e-9);
    }
}

#[test]
fn fitted_tau_equals_the_landscape_maximizer() {
    let p = spline_problem(100, 0.02, sine);
    let worst = (0..50)
        .map(|rep| verify_tau_equals_rstar(&p, &NoiseDraw::generate(100, 5, rep)).unwrap().abs_diff)
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
    let p = tv_problem(60, 0.05, step);
    let worst = (0..20)
        .map(|rep| verify_tau_equals_rstar(&p, &NoiseDraw::generate(60, 6, rep)).unwrap().abs_diff)
        .fold(0.0, f64::max);
    assert!(worst <= 1e-4, "{worst}");
}

#[test]
fn single_repetition_is_rejected() {
    let p = spline_problem(20, 0.1, sine);
    let radii = default_radii(noiseless_fit(&p).unwrap().r_min, 2.0, 16).unwrap();
    assert!(matches!(estimate_r0(&p, 1, &radii, 0), Err(Error::InvalidArgument(_))));
}

#[test]
fn identical_draws_have_zero_spread() {
    let p = tv_problem(30, 0.1, step);
    let radii = default_radii(noiseless_fit(&p).unwrap().r_min, 2.0, 24).unwrap();
    let eps = NoiseDraw::generate(30, 7, 0);
    let s = estimate_r0_from_draws(&p, &[eps.clone(), eps], &radii).unwrap();
    assert!(s.h_stderr.iter().all(|&v| v == 0.0));
    assert_eq!(s.r_star_samples[0], s.r_star_samples[1]);
}

#[test]
fn monte_carlo_maximizer_matches_the_averaged_closed_form() {
    let n = 50;
    let p = spline_problem(n, 0.04, sine);
    let a = dense_a(&p);
    let land = Landscape::new(&p).unwrap();
    let radii = default_radii(land.r_min(), 3.0, 64).unwrap();
    let reps = 200;
    let s = estimate_r0(&p, reps, &radii, 99).unwrap();
    let mut theta = 0.0;
    let mut r_min2 = 0.0;
    for rep in 0..reps as u64 {
        let eps = NoiseDraw::generate(n, 99, rep);
        let (rm2, q) = dense_landscape_terms(&p, &a, &eps.epsilon);
        theta += q.sqrt() / reps as f64;
        r_min2 = rm2;
    }
    let closed = (r_min2 + theta * theta / (n * n) as f64).sqrt();
    assert!(s.r0_stderr > 0.0);
    assert!((s.r0_hat - closed).abs() <= 3.0 * s.r0_stderr, "{} vs {closed} (se {})", s.r0_hat, s.r0_stderr);
    assert!(s.r0_hat > s.radii[0] && s.r0_hat < *s.radii.last().unwrap());
}

#[test]
fn random_part_shrinks_when_n_doubles() {
    let mut parts = Vec::new();
    for n in [64, 128] {
        let p = spline_problem(n, 0.05, sine);
        let r_min = noiseless_fit(&p).unwrap().r_min;
        let radii = default_radii(r_min, 3.0, 64).unwrap();
        let s = estimate_r0(&p, 100, &radii, 12).unwrap();
        parts.push(s.r0_hat.powi(2) - r_min * r_min);
    }
    assert!(parts[1] < parts[0], "{parts:?}");
}

#[test]
fn zero_minimal_radius_is_handled() {
    let p = spline_problem(40, 0.1, |x| 1.0 - 2.0 * x);
    let land = Landscape::new(&p).unwrap();
    assert!(land.r_min() < 1e-7);
    let p = tv_problem(40, 0.1, |_| 0.5);
    let land = Landscape::new(&p).unwrap();
    assert_eq!(land.r_min(), 0.0);
    let radii = default_radii(0.0, 2.0, 32).unwrap();
    let s = estimate_r0(&p, 20, &radii, 3).unwrap();
    assert!(s.r0_hat > 0.0);
    let eps = NoiseDraw::generate(40, 3, 0);
    let d = land.draw(&eps).unwrap();
    let id = verify_tau_equals_rstar(&p, &eps).unwrap();
    assert!(id.abs_diff <= 1e-4, "{id:?}");
    assert!(d.m_n(0.0).unwrap() == 0.0);
}

fn summary_in_pool(threads: usize, p: &Problem<f64>, radii: &[f64]) -> MonteCarloSummary<f64> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| estimate_r0(p, 40, radii, 2024).unwrap())
}

#[test]
fn monte_carlo_summaries_do_not_depend_on_thread_count() {
    for p in [spline_problem(64, 0.05, sine), tv_problem(64, 0.05, step)] {
        let radii = default_radii(noiseless_fit(&p).unwrap().r_min, 3.0, 32).unwrap();
        let one = summary_in_pool(1, &p, &radii);
        for threads in [2, 8] {
            assert_eq!(summary_in_pool(threads, &p, &radii), one);
        }
    }
}

#[test]
fn noise_draws_are_keyed_by_seed_and_index() {
    let a = NoiseDraw::<f64>::generate(100, 1, 0);
    assert_eq!(a, NoiseDraw::generate(100, 1, 0));
    assert_ne!(a.epsilon, NoiseDraw::<f64>::generate(100, 1, 1).epsilon);
    assert_ne!(a.epsilon, NoiseDraw::<f64>::generate(100, 2, 0).epsilon);
    let mean = a.epsilon.iter().sum::<f64>() / 100.0;
    assert!(mean.abs() < 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn curves_are_monotone_and_midpoint_concave(
        f0 in prop::collection::vec(-2.0f64..2.0, 12),
        lambda in 0.02f64..0.5,
        seed in any::<u64>(),
        tv in any::<bool>(),
    ) {
        let g = DesignGrid::<f64>::uniform(12).unwrap();
        let s = if tv { Seminorm::TotalVariation } else { spline_penalty_form(&g, 2).unwrap() };
        let p = Problem::new(g, f0, lambda, s).unwrap();
        let land = Landscape::new(&p).unwrap();
        let eps = NoiseDraw::generate(12, seed, 0);
        let d = land.draw(&eps).unwrap();
        let span = d.bracket_upper().unwrap() - land.r_min();
        let radii: Vec<f64> = (0..40).map(|j| land.r_min() + span * 1.5 * j as f64 / 39.0).collect();
        let m: Vec<f64> = radii.iter().map(|&r| d.m_n(r).unwrap()).collect();
        let h: Vec<f64> = radii.iter().zip(&m).map(|(r, v)| v - 0.5 * r * r).collect();
        for w in m.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10);
        }
        for w in h.windows(3) {
            prop_assert!(w[1] >= 0.5 * (w[0] + w[2]) - 1e-9);
        }
    }
}
