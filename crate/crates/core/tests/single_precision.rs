use tradeoff_core::estimator::{fit, noiseless_fit};
use tradeoff_core::landscape::{default_radii, estimate_r0, landscape_curve};
use tradeoff_core::penalty::{spline_penalty_form, Seminorm};
use tradeoff_core::{DesignGrid32, NoiseDraw32, Problem32, Problem64};

fn problems(n: usize) -> Vec<(Problem32, Problem64)> {
    let g32 = DesignGrid32::uniform(n).unwrap();
    let g64 = tradeoff_core::DesignGrid64::uniform(n).unwrap();
    let f32v = g32.sample(|x| (6.0 * x).sin());
    let f64v = g64.sample(|x| (6.0 * x).sin());
    vec![
        (
            Problem32::new(g32.clone(), f32v.clone(), 0.05, spline_penalty_form(&g32, 2).unwrap()).unwrap(),
            Problem64::new(g64.clone(), f64v.clone(), 0.05, spline_penalty_form(&g64, 2).unwrap()).unwrap(),
        ),
        (
            Problem32::new(g32, f32v, 0.05, Seminorm::TotalVariation).unwrap(),
            Problem64::new(g64, f64v, 0.05, Seminorm::TotalVariation).unwrap(),
        ),
    ]
}

#[test]
fn single_precision_tracks_double_precision() {
    for (p32, p64) in problems(40) {
        let eps = NoiseDraw32::generate(40, 3, 0);
        let y32: Vec<f32> = p32.f0().iter().zip(&eps.epsilon).map(|(a, b)| a + b).collect();
        let y64: Vec<f64> = y32.iter().map(|&v| v as f64).collect();
        let a = fit(&p32, &y32).unwrap();
        let b = fit(&p64, &y64).unwrap();
        assert!((a.tau as f64 - b.tau).abs() < 1e-3 * b.tau, "{} vs {}", a.tau, b.tau);
        let r32 = noiseless_fit(&p32).unwrap().r_min;
        let r64 = noiseless_fit(&p64).unwrap().r_min;
        assert!((r32 as f64 - r64).abs() < 1e-3 * r64.max(1e-3));
    }
}

#[test]
fn single_precision_landscape_runs() {
    for (p32, _) in problems(32) {
        let r_min = noiseless_fit(&p32).unwrap().r_min;
        let radii = default_radii(r_min, 2.0f32, 24).unwrap();
        let curve = landscape_curve(&p32, &NoiseDraw32::generate(32, 1, 0), &radii).unwrap();
        assert!(curve.r_star > r_min && curve.r_star.is_finite());
        let s = estimate_r0(&p32, 10, &radii, 4).unwrap();
        assert!(s.r0_hat.is_finite());
    }
}
