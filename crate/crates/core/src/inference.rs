//! Bootstrap standard errors and normal-approximation intervals.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::pipeline::{estimate, PipelineConfig};
use crate::rng::{derive_seed, purpose, stream_rng};
use crate::scalar::Scalar;
use crate::sim::{run_monte_carlo, Censoring, MonteCarloOptions, SimDesign};

/// Fraction of failed bootstrap resamples tolerated.
pub const BOOTSTRAP_FAILURE_CAP: f64 = 0.1;

/// Row indices of resample `r`, drawn with replacement.
pub fn bootstrap_indices(n: usize, seed: u64, r: usize) -> Vec<usize> {
    let mut rng = stream_rng(derive_seed(seed, r as u64), purpose::BOOTSTRAP);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult<T> {
    pub sd: Vec<T>,
    /// Estimates of the successful resamples, in resample order.
    pub estimates: Vec<Vec<T>>,
    pub failed: usize,
}

/// Sample standard deviation (divisor `B − 1`) of the full estimator over `b`
/// row resamples; every resample draws fresh proxies.
pub fn bootstrap_sd<T: Scalar>(data: &Dataset<T>, cfg: &PipelineConfig<T>, b: usize, seed: u64) -> Result<BootstrapResult<T>> {
    if b < 2 {
        return Err(Error::InvalidInput("the bootstrap needs at least two resamples".into()));
    }
    let n = data.n();
    let index_seed = derive_seed(seed, purpose::BOOTSTRAP);
    let proxy_seed = derive_seed(seed, purpose::PROXY);
    let plans: Vec<(Vec<usize>, u64)> =
        (0..b).map(|r| (bootstrap_indices(n, index_seed, r), derive_seed(proxy_seed, r as u64))).collect();
    bootstrap_with_plans(data, cfg, &plans)
}

/// Bootstrap over explicit `(row indices, estimator seed)` plans.
pub fn bootstrap_with_plans<T: Scalar>(data: &Dataset<T>, cfg: &PipelineConfig<T>, plans: &[(Vec<usize>, u64)]) -> Result<BootstrapResult<T>> {
    if plans.len() < 2 {
        return Err(Error::InvalidInput("the bootstrap needs at least two resamples".into()));
    }
    let outcomes: Vec<Result<Vec<T>>> =
        plans.par_iter().map(|(idx, s)| estimate(&data.resample(idx), cfg, *s).map(|e| e.beta)).collect();
    let total = outcomes.len();
    let estimates: Vec<Vec<T>> = outcomes.into_iter().filter_map(Result::ok).collect();
    let failed = total - estimates.len();
    if failed as f64 > BOOTSTRAP_FAILURE_CAP * total as f64 || estimates.len() < 2 {
        return Err(Error::FailureBudget { failed, total, cap: BOOTSTRAP_FAILURE_CAP });
    }
    Ok(BootstrapResult { sd: column_sd(&estimates), estimates, failed })
}

fn column_sd<T: Scalar>(rows: &[Vec<T>]) -> Vec<T> {
    let n = T::from_count(rows.len());
    (0..rows[0].len())
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<T>() / n;
            (rows.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<T>() / (n - T::one())).sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiMethod {
    Naive,
    WarpSpeed,
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Naive => "naive",
            Self::WarpSpeed => "warp-speed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiReport {
    pub beta_hat: Vec<f64>,
    pub sd: Vec<f64>,
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resamples: usize,
    pub method: CiMethod,
}

/// `z_{1 − α/2}` for a two-sided interval at `level`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("confidence level {level} must lie in (0, 1)")));
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(std.inverse_cdf(0.5 + level / 2.0))
}

/// `β̂ ± z_{1 − α/2} · sd`.
pub fn normal_ci(beta_hat: &[f64], sd: &[f64], level: f64) -> Result<CiReport> {
    if beta_hat.len() != sd.len() {
        return Err(Error::InvalidInput("β̂ and sd differ in length".into()));
    }
    if let Some(component) = sd.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::DegenerateSd { component });
    }
    let z = normal_quantile(level)?;
    Ok(CiReport {
        beta_hat: beta_hat.to_vec(),
        sd: sd.to_vec(),
        level,
        lower: beta_hat.iter().zip(sd).map(|(b, s)| b - z * s).collect(),
        upper: beta_hat.iter().zip(sd).map(|(b, s)| b + z * s).collect(),
        resamples: 0,
        method: CiMethod::Naive,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpSpeedReport {
    /// Pooled standard deviation of `β̂* − β̂` across replications.
    pub sd: Vec<f64>,
    pub coverage: Vec<f64>,
}

/// Coverage of `β̂_r ± z·sd` for `β₀`, with `sd` taken from one bootstrap
/// estimate `β̂*_r` per replication.
pub fn warp_speed(estimates: &[Vec<f64>], boot: &[Vec<f64>], beta0: &[f64], level: f64) -> Result<WarpSpeedReport> {
    if estimates.len() != boot.len() || estimates.len() < 2 {
        return Err(Error::InvalidInput("warp-speed needs one bootstrap draw for each of at least two replications".into()));
    }
    let z = normal_quantile(level)?;
    let diffs: Vec<Vec<f64>> =
        estimates.iter().zip(boot).map(|(e, b)| b.iter().zip(e).map(|(b, e)| b - e).collect()).collect();
    let sd = column_sd(&diffs);
    let n = estimates.len() as f64;
    let coverage = (0..beta0.len())
        .map(|j| estimates.iter().filter(|e| (e[j] - beta0[j]).abs() <= z * sd[j]).count() as f64 / n)
        .collect();
    Ok(WarpSpeedReport { sd, coverage })
}

/// Warp-speed coverage of the proposed estimator on a simulation design.
pub fn warp_speed_coverage(
    design: SimDesign,
    censoring: Censoring,
    n: usize,
    reps: usize,
    level: f64,
    seed: u64,
    cfg: &PipelineConfig<f64>,
) -> Result<Vec<f64>> {
    let opts = MonteCarloOptions { reps, seed, warp_speed: true, level, ..MonteCarloOptions::default() };
    let result = run_monte_carlo(design, censoring, n, cfg, &opts)?;
    Ok(result.proposed.cp95.expect("warp-speed requested"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_interval() {
        let ci = normal_ci(&[0.0], &[1.0], 0.95).unwrap();
        assert!((ci.lower[0] + 1.959964).abs() < 1e-6);
        assert!((ci.upper[0] - 1.959964).abs() < 1e-6);
    }

    #[test]
    fn application_row() {
        // inputs are rounded to 3 decimals: ±0.0005 + 1.96 · 0.0005
        let ci = normal_ci(&[0.910], &[0.327], 0.95).unwrap();
        assert!((ci.lower[0] - 0.270).abs() < 1.5e-3);
        assert!((ci.upper[0] - 1.550).abs() < 1.5e-3);
    }

    #[test]
    fn zero_sd_is_rejected() {
        assert_eq!(normal_ci(&[0.5, 0.1], &[0.2, 0.0], 0.95), Err(Error::DegenerateSd { component: 1 }));
    }

    #[test]
    fn width_scales_with_sd() {
        let a = normal_ci(&[1.0], &[0.1], 0.9).unwrap();
        let b = normal_ci(&[1.0], &[0.3], 0.9).unwrap();
        assert!(((b.upper[0] - b.lower[0]) - 3.0 * (a.upper[0] - a.lower[0])).abs() < 1e-12);
    }

    #[test]
    fn warp_speed_is_order_free() {
        let est = vec![vec![0.6], vec![0.8], vec![0.75], vec![0.4]];
        let boot = vec![vec![0.7], vec![0.7], vec![0.8], vec![0.5]];
        let a = warp_speed(&est, &boot, &[0.7], 0.95).unwrap();
        let mut e2 = est.clone();
        let mut b2 = boot.clone();
        e2.reverse();
        b2.reverse();
        let b = warp_speed(&e2, &b2, &[0.7], 0.95).unwrap();
        assert!((a.sd[0] - b.sd[0]).abs() < 1e-15);
        assert_eq!(a.coverage, b.coverage);
    }

    #[test]
    fn indices_are_reproducible() {
        assert_eq!(bootstrap_indices(50, 3, 7), bootstrap_indices(50, 3, 7));
        assert_ne!(bootstrap_indices(50, 3, 7), bootstrap_indices(50, 3, 8));
        assert!(bootstrap_indices(50, 3, 7).iter().all(|&i| i < 50));
    }
}
