//! Monte Carlo designs and metrics.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use crate::coxph::naive_cox;
use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::inference::{bootstrap_indices, warp_speed};
use crate::pipeline::{estimate, estimate_attached, PipelineConfig};
use crate::rng::{derive_seed, purpose, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimDesign {
    /// `X ~ Beta(2, 5)`.
    ContinuousBeta,
    /// `X ~ U(-0.5, 0.5)`.
    ContinuousUniform,
    /// `X ~ B(0.5)`.
    DiscreteBernoulli,
    /// `Z = W` with `X ~ B(0.5)`: no confounding, so the naive fit is consistent.
    Exogenous,
    /// Three arms with the zero pattern of a two-offer encouragement trial:
    /// `Z ∈ {control, offer 1, offer 2}`, offer `k` only taken up under `W = k`.
    ThreeArm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Censoring {
    Twenty,
    Forty,
}

impl FromStr for Censoring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().trim_end_matches('%') {
            "20" => Ok(Self::Twenty),
            "40" => Ok(Self::Forty),
            other => Err(Error::InvalidInput(format!("censoring level must be 20 or 40, got `{other}`"))),
        }
    }
}

impl fmt::Display for Censoring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Twenty => "20",
            Self::Forty => "40",
        })
    }
}

impl SimDesign {
    pub const ALL: [SimDesign; 5] =
        [Self::ContinuousBeta, Self::ContinuousUniform, Self::DiscreteBernoulli, Self::Exogenous, Self::ThreeArm];

    pub fn name(self) -> &'static str {
        match self {
            Self::ContinuousBeta => "continuous-beta",
            Self::ContinuousUniform => "continuous-uniform",
            Self::DiscreteBernoulli => "discrete-bernoulli",
            Self::Exogenous => "exogenous",
            Self::ThreeArm => "three-arm",
        }
    }

    /// `(Z coefficients..., β_x)`.
    pub fn beta0(self) -> Vec<f64> {
        match self {
            Self::ContinuousBeta | Self::ContinuousUniform => vec![0.7, 0.3],
            Self::DiscreteBernoulli | Self::Exogenous => vec![0.7, 0.7],
            Self::ThreeArm => vec![0.9, 0.9, 0.06],
        }
    }

    /// Rate of the exponential censoring variable.
    pub fn censoring_rate(self, level: Censoring) -> f64 {
        match (self, level) {
            (Self::ContinuousBeta, Censoring::Twenty) => 0.33,
            (Self::ContinuousBeta, Censoring::Forty) => 0.87,
            (Self::ContinuousUniform, Censoring::Twenty) => 0.30,
            (Self::ContinuousUniform, Censoring::Forty) => 0.82,
            (Self::DiscreteBernoulli, Censoring::Twenty) => 0.43,
            (Self::DiscreteBernoulli, Censoring::Forty) => 1.15,
            (Self::Exogenous, Censoring::Twenty) => 0.46,
            (Self::Exogenous, Censoring::Forty) => 1.30,
            (Self::ThreeArm, Censoring::Twenty) => 0.33,
            (Self::ThreeArm, Censoring::Forty) => 0.88,
        }
    }

    /// `(c₀, c₁)` of the selection rule `I(W=1) I(0.5U - W + c₀ + c₁X + 0.5ε ≥ 0)`.
    fn selection(self) -> (f64, f64) {
        match self {
            Self::ContinuousBeta => (0.45, 1.0),
            Self::ContinuousUniform => (0.8, 1.0),
            Self::DiscreteBernoulli => (0.65, 0.3),
            Self::Exogenous => (0.0, 0.0),
            Self::ThreeArm => (0.75, 0.5),
        }
    }

    pub fn levels(self) -> usize {
        if self == Self::ThreeArm {
            3
        } else {
            2
        }
    }
}

impl fmt::Display for SimDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimDesign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown design `{s}`")))
    }
}

/// `n` iid rows of a design; rows are drawn sequentially from one stream of `seed`.
pub fn generate_design(design: SimDesign, censoring: Censoring, n: usize, seed: u64) -> Result<Dataset<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let mut rng = stream_rng(seed, purpose::SIMULATION);
    let beta = design.beta0();
    let (c0, c1) = design.selection();
    let cens = Exp::new(design.censoring_rate(censoring)).expect("positive rate");
    let beta_x = Beta::new(2.0, 5.0).expect("valid shape");
    let levels = design.levels();
    let mut obs = Vec::with_capacity(n);
    for _ in 0..n {
        let w = rng.random_range(0..levels);
        let x = match design {
            SimDesign::ContinuousBeta => beta_x.sample(&mut rng),
            SimDesign::ContinuousUniform | SimDesign::ThreeArm => rng.random::<f64>() - 0.5,
            SimDesign::DiscreteBernoulli | SimDesign::Exogenous => f64::from(u8::from(rng.random::<bool>())),
        };
        let u: f64 = rng.random();
        let eps: f64 = StandardNormal.sample(&mut rng);
        let z = match design {
            SimDesign::Exogenous => w,
            SimDesign::ThreeArm => {
                // refusal depends on the rank, offer 2 is taken up less often
                let shift = if w == 2 { -0.2 } else { 0.0 };
                if w > 0 && 0.5 * u - 1.0 + c0 + shift + c1 * x + 0.5 * eps >= 0.0 {
                    w
                } else {
                    0
                }
            }
            _ => usize::from(w == 1 && 0.5 * u - w as f64 + c0 + c1 * x + 0.5 * eps >= 0.0),
        };
        let mut lin = beta[beta.len() - 1] * x;
        if z > 0 {
            lin += beta[z - 1];
        }
        let t = -(1.0 - u).ln() / lin.exp();
        let c = cens.sample(&mut rng);
        obs.push(Observation { y: t.min(c), delta: t <= c, z, x, w });
    }
    if levels == 2 {
        return Dataset::binary(obs);
    }
    let codebook = (0..levels).map(|z| (1..levels).map(|j| if j == z { 1.0 } else { 0.0 }).collect()).collect();
    let z_labels = vec!["control".to_string(), "offer1".to_string(), "offer2".to_string()];
    let w_labels = vec!["none".to_string(), "offer1".to_string(), "offer2".to_string()];
    Dataset::new(obs, codebook, z_labels, w_labels)
}

/// `√(N⁻¹ Σ ‖β̂⁽ʲ⁾ − β₀‖²)`.
pub fn rmse(estimates: &[Vec<f64>], beta0: &[f64]) -> f64 {
    let n = estimates.len() as f64;
    let total: f64 = estimates.iter().map(|b| b.iter().zip(beta0).map(|(e, t)| (e - t).powi(2)).sum::<f64>()).sum();
    (total / n).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub estimator: String,
    pub design: String,
    pub censoring: String,
    pub n: usize,
    /// Successful replications.
    pub reps: usize,
    pub failed: usize,
    pub beta0: Vec<f64>,
    pub bias: Vec<f64>,
    /// Sample standard deviation (divisor `N − 1`); 0 when `N = 1`.
    pub sd: Vec<f64>,
    pub mse: Vec<f64>,
    pub rmse: f64,
    pub cp95: Option<Vec<f64>>,
    pub sd_undefined: bool,
}

impl SimReport {
    pub fn from_estimates(estimator: &str, design: &str, censoring: &str, n: usize, estimates: &[Vec<f64>], beta0: &[f64], failed: usize) -> Self {
        let reps = estimates.len();
        let p = beta0.len();
        let nf = reps as f64;
        let mean: Vec<f64> = (0..p).map(|j| estimates.iter().map(|b| b[j]).sum::<f64>() / nf).collect();
        let bias: Vec<f64> = mean.iter().zip(beta0).map(|(m, t)| m - t).collect();
        let sd_undefined = reps < 2;
        let sd: Vec<f64> = (0..p)
            .map(|j| {
                if sd_undefined {
                    0.0
                } else {
                    (estimates.iter().map(|b| (b[j] - mean[j]).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
                }
            })
            .collect();
        let mse = (0..p).map(|j| estimates.iter().map(|b| (b[j] - beta0[j]).powi(2)).sum::<f64>() / nf).collect();
        Self {
            estimator: estimator.to_string(),
            design: design.to_string(),
            censoring: censoring.to_string(),
            n,
            reps,
            failed,
            beta0: beta0.to_vec(),
            bias,
            sd,
            mse,
            rmse: rmse(estimates, beta0),
            cp95: None,
            sd_undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloOptions {
    pub reps: usize,
    pub seed: u64,
    /// One bootstrap resample per replication for coverage.
    pub warp_speed: bool,
    pub level: f64,
    /// Fraction of failed replications tolerated.
    pub failure_cap: f64,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        Self { reps: 100, seed: 0, warp_speed: false, level: 0.95, failure_cap: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub proposed: Vec<f64>,
    pub naive: Vec<f64>,
    pub proposed_boot: Option<Vec<f64>>,
    pub naive_boot: Option<Vec<f64>>,
    /// Warp-speed resamples that failed and were redrawn.
    pub boot_failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub proposed: SimReport,
    pub naive: SimReport,
    pub replications: Vec<Replication>,
    /// `(replication, error)` for every failed replication.
    pub failures: Vec<(usize, String)>,
}

/// Resamples tried per replication before the replication counts as failed.
const WARP_ATTEMPTS: usize = 10;

fn replicate(
    design: SimDesign,
    censoring: Censoring,
    n: usize,
    r: usize,
    cfg: &PipelineConfig<f64>,
    opts: &MonteCarloOptions,
) -> Result<Replication> {
    let data_seed = derive_seed(opts.seed, r as u64);
    let data = generate_design(design, censoring, n, data_seed)?;
    let est_seed = derive_seed(data_seed, 1);
    let proposed = estimate(&data, cfg, est_seed)?.beta;
    let naive = naive_cox(&data, &cfg.cox)?.beta;
    let mut boot_failures = 0;
    let (proposed_boot, naive_boot) = if opts.warp_speed {
        // A failed resample is replaced by the next one, as the bootstrap drops
        // failures. Resampled rows keep their proxy draws: with fresh draws the
        // difference β̂* − β̂ would carry the proxy noise twice.
        let boot_seed = derive_seed(data_seed, 2);
        let mut last_err = None;
        let mut draws = None;
        for attempt in 0..WARP_ATTEMPTS {
            let idx = bootstrap_indices(n, boot_seed, attempt);
            let fitted = estimate_attached(&data, &idx, cfg, derive_seed(boot_seed, attempt as u64 + 1), est_seed)
                .and_then(|pb| Ok((pb.beta, naive_cox(&data.resample(&idx), &cfg.cox)?.beta)));
            match fitted {
                Ok(d) => {
                    draws = Some(d);
                    break;
                }
                Err(e) => {
                    boot_failures += 1;
                    last_err = Some(e);
                }
            }
        }
        match draws {
            Some((pb, nb)) => (Some(pb), Some(nb)),
            None => return Err(last_err.expect("at least one attempt")),
        }
    } else {
        (None, None)
    };
    Ok(Replication { index: r, proposed, naive, proposed_boot, naive_boot, boot_failures })
}

/// Paired proposed/naive comparison over `opts.reps` replications; replication
/// `r` draws its data from `derive_seed(opts.seed, r)`.
pub fn run_monte_carlo(
    design: SimDesign,
    censoring: Censoring,
    n: usize,
    cfg: &PipelineConfig<f64>,
    opts: &MonteCarloOptions,
) -> Result<MonteCarloResult> {
    if opts.reps == 0 {
        return Err(Error::InvalidInput("at least one replication is required".into()));
    }
    let outcomes: Vec<Result<Replication>> =
        (0..opts.reps).into_par_iter().map(|r| replicate(design, censoring, n, r, cfg, opts)).collect();
    let mut replications = Vec::new();
    let mut failures = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(rep) => replications.push(rep),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    let failed = failures.len();
    if failed as f64 > opts.failure_cap * opts.reps as f64 || replications.is_empty() {
        return Err(Error::FailureBudget { failed, total: opts.reps, cap: opts.failure_cap });
    }
    let beta0 = design.beta0();
    let proposed_est: Vec<Vec<f64>> = replications.iter().map(|r| r.proposed.clone()).collect();
    let naive_est: Vec<Vec<f64>> = replications.iter().map(|r| r.naive.clone()).collect();
    let (d, c) = (design.name(), censoring.to_string());
    let mut proposed = SimReport::from_estimates("proposed", d, &c, n, &proposed_est, &beta0, failed);
    let mut naive = SimReport::from_estimates("naive", d, &c, n, &naive_est, &beta0, failed);
    if opts.warp_speed {
        let pb: Vec<Vec<f64>> = replications.iter().map(|r| r.proposed_boot.clone().expect("drawn")).collect();
        let nb: Vec<Vec<f64>> = replications.iter().map(|r| r.naive_boot.clone().expect("drawn")).collect();
        proposed.cp95 = Some(warp_speed(&proposed_est, &pb, &beta0, opts.level)?.coverage);
        naive.cp95 = Some(warp_speed(&naive_est, &nb, &beta0, opts.level)?.coverage);
    }
    Ok(MonteCarloResult { proposed, naive, replications, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[vec![0.7, 0.3]], &[0.7, 0.3]), 0.0);
        assert_eq!(rmse(&[vec![1.0, 0.0]], &[0.0, 0.0]), 1.0);
        assert!((rmse(&[vec![1.0], vec![0.0]], &[0.0]) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_replication_report() {
        let r = SimReport::from_estimates("p", "d", "20", 10, &[vec![0.9, 0.1]], &[0.7, 0.3], 0);
        assert!((r.bias[0] - 0.2).abs() < 1e-15 && (r.bias[1] + 0.2).abs() < 1e-15);
        assert_eq!(r.sd, vec![0.0, 0.0]);
        assert!(r.sd_undefined);
    }

    #[test]
    fn mse_decomposes() {
        let est = vec![vec![0.5, 0.1], vec![0.9, 0.4], vec![0.65, 0.2], vec![0.8, 0.35]];
        let r = SimReport::from_estimates("p", "d", "20", 10, &est, &[0.7, 0.3], 0);
        let nf = est.len() as f64;
        for j in 0..2 {
            let decomposed = r.bias[j].powi(2) + r.sd[j].powi(2) * (nf - 1.0) / nf;
            assert!((r.mse[j] - decomposed).abs() < 1e-12);
        }
        let total: f64 = r.mse.iter().sum();
        assert!((r.rmse.powi(2) - total).abs() < 1e-12);
    }

    #[test]
    fn designs_parse() {
        for d in SimDesign::ALL {
            assert_eq!(d.name().parse::<SimDesign>().unwrap(), d);
        }
        assert!("nope".parse::<SimDesign>().is_err());
        assert_eq!("40".parse::<Censoring>().unwrap(), Censoring::Forty);
        assert!("30".parse::<Censoring>().is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_design(SimDesign::ContinuousBeta, Censoring::Twenty, 200, 9).unwrap();
        let b = generate_design(SimDesign::ContinuousBeta, Censoring::Twenty, 200, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_sided_noncompliance_holds() {
        for d in [SimDesign::ContinuousBeta, SimDesign::ContinuousUniform, SimDesign::DiscreteBernoulli] {
            let data = generate_design(d, Censoring::Twenty, 2000, 1).unwrap();
            assert_eq!(data.cell_counts()[1][0], 0, "{d}");
        }
        let three = generate_design(SimDesign::ThreeArm, Censoring::Twenty, 3000, 1).unwrap();
        let c = three.cell_counts();
        assert_eq!((c[1][0], c[2][0], c[1][2], c[2][1]), (0, 0, 0, 0));
    }
}
