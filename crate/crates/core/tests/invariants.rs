mod common;

use common::*;
use ivcox::coxph::{fit_cox, CoxData, CoxOptions};
use ivcox::phi::isotonic_increasing;
use ivcox::sim::{rmse, SimReport};
use ivcox::{Dataset, Observation};
use proptest::prelude::*;

fn ok(c: Check) {
    if let Err(e) = c {
        panic!("{e}");
    }
}

#[test]
fn beran_reduces_to_kaplan_meier() {
    ok(check_beran_km());
}

#[test]
fn kernel_moments() {
    ok(check_kernel_moments());
}

#[test]
fn score_matches_finite_differences() {
    ok(check_score_fd());
}

#[test]
fn general_solver_reproduces_recursion() {
    ok(check_general_vs_triangular());
}

#[test]
fn u_tilde_follows_closed_form() {
    ok(check_u_tilde_law());
}

#[test]
fn phi_hat_is_monotone() {
    ok(check_phi_monotone());
}

#[test]
fn runs_are_bitwise_reproducible() {
    ok(check_determinism());
}

fn dataset_strategy() -> impl Strategy<Value = Dataset<f64>> {
    prop::collection::vec((1u32..40, any::<bool>()), 1..60).prop_map(|rows| {
        let obs = rows
            .into_iter()
            .map(|(t, d)| Observation { y: t as f64 * 0.125, delta: d, z: 0, x: 0.0, w: 0 })
            .collect();
        Dataset::binary(obs).unwrap()
    })
}

fn estimates_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 2..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beran_is_kaplan_meier(data in dataset_strategy()) {
        prop_assert!(beran_matches_km(&data).is_ok());
    }

    #[test]
    fn report_identities(est in estimates_strategy()) {
        let beta0 = [0.7, 0.3];
        let r = SimReport::from_estimates("p", "d", "20", 100, &est, &beta0, 0);
        let n = est.len() as f64;
        for j in 0..2 {
            let decomposed = r.bias[j].powi(2) + r.sd[j].powi(2) * (n - 1.0) / n;
            prop_assert!((r.mse[j] - decomposed).abs() < 1e-12);
        }
        prop_assert!((r.rmse.powi(2) - r.mse.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn rmse_ignores_replication_order(mut est in estimates_strategy()) {
        let a = rmse(&est, &[0.0, 0.0]);
        est.reverse();
        prop_assert!((a - rmse(&est, &[0.0, 0.0])).abs() < 1e-12);
    }

    #[test]
    fn isotonic_fit_is_monotone(v in prop::collection::vec(-5.0f64..5.0, 1..50)) {
        let fit = isotonic_increasing(&v);
        prop_assert_eq!(fit.len(), v.len());
        prop_assert!(fit.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        let total: f64 = v.iter().sum::<f64>() - fit.iter().sum::<f64>();
        prop_assert!(total.abs() < 1e-9);
    }

    #[test]
    fn cox_depends_only_on_time_ranks(seed in 0u64..1000, power in 0.3f64..3.0) {
        let mut r = rng(seed);
        let data = random_cox_data(&mut r, 60, 2, true);
        let warped = data.map_times(|t| t.powf(power) * 3.0).unwrap();
        let opts = CoxOptions::default();
        if let (Ok(a), Ok(b)) = (fit_cox(&data, None, &opts), fit_cox(&warped, None, &opts)) {
            for (x, y) in a.beta.iter().zip(&b.beta) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cox_shift_invariance(seed in 0u64..1000, shift in -2.0f64..2.0) {
        let mut r = rng(seed);
        let data = random_cox_data(&mut r, 50, 2, false);
        let rows: Vec<Vec<f64>> = (0..data.n()).map(|i| data.covariate(i).iter().map(|v| v + shift).collect()).collect();
        let shifted = CoxData::new(data.times().to_vec(), data.events().to_vec(), rows).unwrap();
        let opts = CoxOptions::default();
        if let (Ok(a), Ok(b)) = (fit_cox(&data, None, &opts), fit_cox(&shifted, None, &opts)) {
            for (x, y) in a.beta.iter().zip(&b.beta) {
                prop_assert!((x - y).abs() < 1e-7);
            }
        }
    }
}
