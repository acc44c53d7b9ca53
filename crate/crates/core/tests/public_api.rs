use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use contcat::oracle::{closed_form_k2, uniform_limit_log_c};
use contcat::{
    cc_mean, cc_nll, grad_cc_nll, log_norm_const, sample_cc, CcConfig, CcParams, NormalizerMethod,
    SimplexPoint,
};

fn lambda_strategy() -> impl Strategy<Value = Vec<f64>> {
    (2usize..=6).prop_flat_map(|k| prop::collection::vec(-3.0f64..3.0, k))
        .prop_map(|eta| eta.into_iter().map(f64::exp).collect())
}

fn point(k: usize, seed: u64) -> SimplexPoint {
    contcat::simplex::sample_uniform_simplex(k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn k2_matches_the_logarithmic_mean() {
    let params = CcParams::new(vec![0.8, 0.2]).unwrap();
    let (log_c, diag) = log_norm_const(&params).unwrap();
    let expected = -((0.8 - 0.2) / (0.8f64 / 0.2).ln()).ln();
    assert!((log_c - expected).abs() < 1e-14);
    assert!((closed_form_k2(&params).unwrap() - (-expected).exp()).abs() < 1e-14);
    assert!(!diag.near_centroid);
}

#[test]
fn centroid_gives_log_factorial() {
    for k in 2..=8 {
        let (log_c, diag) = log_norm_const(&CcParams::uniform(k).unwrap()).unwrap();
        assert!((log_c - uniform_limit_log_c(k)).abs() < 1e-12, "K={k}");
        assert!(diag.near_centroid);
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(CcParams::new(vec![0.5, -0.5]).is_err());
    assert!(CcParams::new(vec![0.5, f64::NAN]).is_err());
    assert!(CcParams::new(vec![1.0]).is_err());
    let params = CcParams::new(vec![0.2, 0.3, 0.5]).unwrap();
    assert!(cc_nll(&params, &SimplexPoint::new(vec![0.5, 0.5]).unwrap()).is_err());
}

#[test]
fn samples_have_finite_density() {
    let params = CcParams::new(vec![0.1, 0.3, 0.6]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let y = sample_cc(&params, &mut rng).unwrap();
        assert!(cc_nll(&params, &y).unwrap().is_finite());
    }
}

proptest! {
    #[test]
    fn scaling_shifts_log_c(lambda in lambda_strategy(), c in 0.01f64..100.0) {
        let (a, _) = log_norm_const(&CcParams::new(lambda.clone()).unwrap()).unwrap();
        let scaled: Vec<f64> = lambda.iter().map(|v| v * c).collect();
        let (b, _) = log_norm_const(&CcParams::new(scaled).unwrap()).unwrap();
        prop_assert!((b - (a - c.ln())).abs() < 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn permutation_leaves_log_c_unchanged(lambda in lambda_strategy(), shift in 0usize..6) {
        let (a, _) = log_norm_const(&CcParams::new(lambda.clone()).unwrap()).unwrap();
        let mut p = lambda;
        let n = p.len();
        p.rotate_right(shift % n);
        let (b, _) = log_norm_const(&CcParams::new(p).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn mean_lies_on_the_simplex(lambda in lambda_strategy()) {
        let (mean, _) = cc_mean(&CcParams::new(lambda).unwrap()).unwrap();
        prop_assert!(mean.iter().all(|&m| m > 0.0 && m < 1.0));
        prop_assert!((mean.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gradient_is_mean_minus_target(lambda in lambda_strategy(), seed in any::<u64>()) {
        let params = CcParams::new(lambda).unwrap();
        let y = point(params.dim(), seed);
        let grad = grad_cc_nll(&params, &y).unwrap();
        prop_assert!((grad.gradient.iter().sum::<f64>()).abs() < 1e-9);
        if !grad.zeroed {
            let (mean, _) = cc_mean(&params).unwrap();
            for ((g, m), t) in grad.gradient.iter().zip(&mean).zip(y.values()) {
                prop_assert!((g - (m - t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn routes_agree_when_well_conditioned(lambda in lambda_strategy()) {
        let params = CcParams::new(lambda).unwrap();
        let closed = CcConfig { method: NormalizerMethod::ClosedForm, ..CcConfig::default() };
        let diag = closed.diagnostics(&params);
        prop_assume!(!diag.near_centroid && diag.condition_number < 1e4);
        let (a, _) = log_norm_const(&params).unwrap();
        let (b, _) = closed.log_norm_const(&params).unwrap();
        prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
    }
}
