use gate_core::regate::{conditional_code_posterior, conditional_codes, RegressionHead};
use gate_core::rng::rng_from;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;

fn arb_head() -> impl Strategy<Value = RegressionHead> {
    (
        prop::collection::vec(-3.0..3.0f64, 1..6),
        -2.0..2.0f64,
        0.01..5.0f64,
    )
        .prop_map(|(beta, b, s2)| RegressionHead::from_values(&beta, b, s2).unwrap())
}

proptest! {
    #[test]
    fn covariance_spectrum(head in arb_head(), y in -3.0..3.0f64) {
        let law = conditional_code_posterior(y, &head);
        let k = head.latent_dim();
        let cov = DMatrix::from_fn(k, k, |i, j| law.covariance[[i, j]]);
        let eig = SymmetricEigen::new(cov.clone());
        for &e in eig.eigenvalues.iter() {
            prop_assert!(e > 0.0 && e <= 1.0 + 1e-12, "eigenvalue {}", e);
        }
        let beta = DMatrix::from_row_slice(k, 1, &head.beta());
        let bb = beta.norm_squared();
        prop_assume!(bb > 1e-9);
        let s2 = head.noise_var();
        let along = &cov * &beta;
        let expect = &beta * (s2 / (s2 + bb));
        for i in 0..k {
            prop_assert!((along[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_mean_is_affine(head in arb_head(), y1 in -3.0..3.0f64, y2 in -3.0..3.0f64) {
        let a = conditional_code_posterior(y1, &head);
        let b = conditional_code_posterior(y2, &head);
        let beta = head.beta();
        let s2 = head.noise_var();
        for i in 0..beta.len() {
            let sb: f64 = (0..beta.len()).map(|j| a.covariance[[i, j]] * beta[j]).sum();
            let expect = sb * (y2 - y1) / s2;
            prop_assert!((b.mean[i] - a.mean[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_prediction_is_analytic(head in arb_head(), y in -3.0..3.0f64) {
        let law = conditional_code_posterior(y, &head);
        let beta = head.beta();
        let bb: f64 = beta.iter().map(|b| b * b).sum();
        let s2 = head.noise_var();
        // βᵀμ_z(y) + b with μ_z(y) = β (y − b) / (σ² + βᵀβ)
        let expect = bb * (y - head.intercept()) / (s2 + bb) + head.intercept();
        prop_assert!((head.predict(&law.mean) - expect).abs() < 1e-12);
    }
}

#[test]
fn conditional_draws_follow_the_law() {
    let mut rng = rng_from(12);
    let beta: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let head = RegressionHead::from_values(&beta, 0.3, 0.4).unwrap();
    let law = conditional_code_posterior(1.2, &head);
    let n = 20_000;
    let z = conditional_codes(&law, n, 3, 0);
    for i in 0..4 {
        let mean = z.row(i).sum() / n as f64;
        let se = (law.covariance[[i, i]] / n as f64).sqrt();
        assert!((mean - law.mean[i]).abs() < 4.0 * se, "row {i}");
        for j in 0..4 {
            let cov = z
                .row(i)
                .iter()
                .zip(z.row(j))
                .map(|(a, b)| (a - law.mean[i]) * (b - law.mean[j]))
                .sum::<f64>()
                / n as f64;
            assert!((cov - law.covariance[[i, j]]).abs() < 0.03, "({i}, {j})");
        }
    }
}
