mod common;

use common::*;
use ivcox::coxph::{fit_cox, log_partial_likelihood, CoxData, CoxOptions};

#[test]
fn matches_reference_fits() {
    if let Err(e) = check_cox_parity() {
        panic!("{e}");
    }
}

/// Direct O(n²) Breslow log partial likelihood.
fn brute_loglik(data: &CoxData<f64>, beta: &[f64]) -> f64 {
    let eta: Vec<f64> = (0..data.n()).map(|i| data.covariate(i).iter().zip(beta).map(|(x, b)| x * b).sum()).collect();
    (0..data.n())
        .filter(|&i| data.events()[i])
        .map(|i| {
            let risk: f64 = (0..data.n()).filter(|&j| data.times()[j] >= data.times()[i]).map(|j| eta[j].exp()).sum();
            eta[i] - risk.ln()
        })
        .sum()
}

#[test]
fn loglik_matches_direct_sum() {
    let mut r = rng(21);
    for ties in [false, true] {
        for _ in 0..10 {
            let data = random_cox_data(&mut r, 40, 3, ties);
            for beta in [[0.0, 0.0, 0.0], [0.5, -1.0, 0.25], [-1.2, 0.3, 0.8]] {
                let a = log_partial_likelihood(&data, &beta).unwrap();
                let b = brute_loglik(&data, &beta);
                assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn fitted_beta_maximises_direct_loglik() {
    let mut r = rng(22);
    let data = random_cox_data(&mut r, 80, 2, true);
    let fit = fit_cox(&data, None, &CoxOptions::default()).unwrap();
    let best = brute_loglik(&data, &fit.beta);
    for d in [[1e-3, 0.0], [-1e-3, 0.0], [0.0, 1e-3], [0.0, -1e-3]] {
        let b = [fit.beta[0] + d[0], fit.beta[1] + d[1]];
        assert!(brute_loglik(&data, &b) < best);
    }
}
