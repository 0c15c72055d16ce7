use kahler_lab::metric_models::{self, ConicalModelMetric, FibrewiseKind, FibrewiseModelMetric};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn point(n: usize, rmax: f64) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((1e-4f64..rmax, 0.0f64..std::f64::consts::TAU), n)
        .prop_map(|v| v.into_iter().map(|(r, t)| Complex64::from_polar(r, t)).collect())
}

/// Positive definiteness by leading principal minors, each real and positive.
/// "Real" is up to roundoff: LU error scales with the Hadamard bound, not with |det|.
fn minors_positive(g: &DMatrix<Complex64>) -> bool {
    (1..=g.nrows()).all(|k| {
        let m = g.view((0, 0), (k, k));
        let d = m.determinant();
        let hadamard: f64 = m.row_iter().map(|r| r.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()).product();
        d.re > 0.0 && d.im.abs() <= 64.0 * f64::EPSILON * hadamard
    })
}

fn hermitian(g: &DMatrix<Complex64>) -> bool {
    let scale = g.iter().fold(0.0f64, |m, x| m.max(x.norm()));
    g.iter().zip(g.adjoint().iter()).all(|(a, b)| (a - b).norm() <= 1e-12 * scale)
}

proptest! {
    #[test]
    fn conical_model_is_positive_with_exact_rate(beta in 0.05f64..0.95, n in 1usize..=3, seed in point(3, 2.0)) {
        let z = &seed[..n];
        let m = ConicalModelMetric::new(beta, n).unwrap();
        let g = metric_models::eval_conical_model(&m, z).unwrap().matrix;
        prop_assert!(hermitian(&g) && minors_positive(&g));
        let rate = g[(0, 0)].re * z[0].norm_sqr().powf(1.0 - beta);
        prop_assert!((rate - 1.0).abs() <= 1e-12, "{}", rate);
    }

    #[test]
    fn fibrewise_model_is_positive(n in 1usize..=3, seed in point(3, 0.9), t in 0.01f64..0.9, conical in any::<bool>()) {
        let z = &seed[..n];
        let kind = if conical { FibrewiseKind::Conical } else { FibrewiseKind::Poincare };
        let m = FibrewiseModelMetric { kind, n, t: [t, 0.0] };
        let Ok(s) = metric_models::eval_fibrewise_model(&m, z) else { return Ok(()) };
        prop_assert!(hermitian(&s.sample.matrix) && minors_positive(&s.sample.matrix));
    }

    #[test]
    fn correction_scales_as_inverse_square(n in 1usize..=2, seed in point(2, 0.9), t in 0.05f64..0.5) {
        let z = &seed[..n];
        let near = FibrewiseModelMetric { kind: FibrewiseKind::Conical, n, t: [t, 0.0] };
        let far = FibrewiseModelMetric { t: [t * t, 0.0], ..near };
        let (Ok(a), Ok(b)) = (metric_models::eval_fibrewise_model(&near, z), metric_models::eval_fibrewise_model(&far, z))
        else { return Ok(()) };
        let ratio = a.correction_scale / b.correction_scale;
        let expected = (b.log_ratio / a.log_ratio).powi(2);
        prop_assert!((ratio / expected - 1.0).abs() <= 1e-12);
        prop_assert!((a.correction_scale * a.log_ratio * a.log_ratio * std::f64::consts::PI - 1.0).abs() <= 1e-12);
        // The off-diagonal part is exactly the correction times 1/(z_j z̄_k).
        if n == 2 {
            let off = a.sample.matrix[(0, 1)];
            let want = z[0].inv() * z[1].inv().conj() * a.correction_scale;
            prop_assert!((off - want).norm() <= 1e-12 * want.norm());
        }
    }
}

#[test]
fn halving_inverse_log_ratio_quarters_the_correction() {
    // L = log|t|² - log|z|²: with |z|² = e^{-1}, t = e^{-1} gives L = -1, t = e^{-3/2} gives L = -2.
    let z = [Complex64::new((-0.5f64).exp(), 0.0)];
    let at = |lt: f64| {
        let m = FibrewiseModelMetric { kind: FibrewiseKind::Conical, n: 1, t: [(lt / 2.0).exp(), 0.0] };
        metric_models::eval_fibrewise_model(&m, &z).unwrap()
    };
    let (a, b) = (at(-2.0), at(-3.0));
    assert!((a.log_ratio + 1.0).abs() < 1e-15 && (b.log_ratio + 2.0).abs() < 1e-15);
    assert!((b.correction_scale * 4.0 / a.correction_scale - 1.0).abs() < 1e-14);
}
