//! The three estimation steps chained together.

use std::fmt;
use std::str::FromStr;

use crate::coxph::{fit_cox, CoxData, CoxFit, CoxOptions};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::CellKey;
use crate::phi::{detect_triangular, FirstStage, FirstStageConfig, GeneralOptions, LevelOrder, QuantileMap, QuantileMapConfig, SolverMode};
use crate::proxy::{make_proxies, make_proxies_from_draws, row_draw, ProxyConfig, ProxyDataset, SaturationPolicy};
use crate::rng::{derive_seed, purpose};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    /// Triangular recursion when a level order exists, general solver otherwise.
    #[default]
    Auto,
    Triangular,
    General,
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Triangular => "triangular",
            Self::General => "general",
        })
    }
}

impl FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "triangular" => Ok(Self::Triangular),
            "general" => Ok(Self::General),
            other => Err(Error::InvalidInput(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig<T> {
    pub first_stage: FirstStageConfig<T>,
    pub ubar: T,
    pub grid_points: usize,
    pub solver: SolverChoice,
    /// Largest empirical `P(Z = z | W = w)` treated as a structural zero.
    pub triangular_tol: f64,
    pub general: GeneralOptions,
    pub tau: f64,
    pub max_drop_fraction: f64,
    pub saturation_policy: SaturationPolicy,
    /// Independent proxy sets whose estimates are averaged.
    pub replicates: usize,
    pub cox: CoxOptions,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            first_stage: FirstStageConfig::default(),
            ubar: T::lit(0.9),
            grid_points: 101,
            solver: SolverChoice::Auto,
            triangular_tol: 0.0,
            general: GeneralOptions::default(),
            tau: 0.0,
            max_drop_fraction: 0.05,
            saturation_policy: SaturationPolicy::Drop,
            replicates: 1,
            cox: CoxOptions::default(),
        }
    }
}

impl<T: Scalar> PipelineConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.ubar > T::zero() && self.ubar < T::one()) {
            return Err(Error::InvalidInput(format!("Ū = {} must lie in (0, 1)", self.ubar)));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidInput("at least one proxy replicate is required".into()));
        }
        self.proxy_config(0).validate()
    }

    pub fn proxy_config(&self, seed: u64) -> ProxyConfig {
        ProxyConfig {
            ubar: self.ubar.as_f64(),
            tau: self.tau,
            seed,
            max_drop_fraction: self.max_drop_fraction,
            policy: self.saturation_policy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthRecord<T> {
    pub key: CellKey,
    /// Bandwidth at the sample mean of `X`.
    pub h: T,
}

/// What the pipeline decided along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Audit<T> {
    pub seed: u64,
    pub tbar: T,
    pub order: Option<LevelOrder>,
    pub solver: SolverChoice,
    pub bandwidths: Vec<BandwidthRecord<T>>,
    pub bandwidth_fallbacks: Vec<String>,
    pub widened: usize,
    pub proxies: usize,
    pub dropped: usize,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<T> {
    /// Averaged over proxy replicates.
    pub beta: Vec<T>,
    /// Fit on the first proxy set.
    pub fit: CoxFit<T>,
    pub audit: Audit<T>,
}

/// First stage plus the `φ̂` solver, ready for proxy generation.
pub fn build_map<T: Scalar>(data: &Dataset<T>, cfg: &PipelineConfig<T>, seed: u64) -> Result<(QuantileMap<T>, Option<LevelOrder>, SolverChoice)> {
    cfg.validate()?;
    let stage = FirstStage::new(data, cfg.first_stage.clone())?;
    let order = detect_triangular(data, cfg.triangular_tol);
    let general = || SolverMode::General(GeneralOptions { seed: derive_seed(seed, purpose::RESTARTS), ..cfg.general.clone() });
    let (mode, used) = match (cfg.solver, &order) {
        (SolverChoice::Auto | SolverChoice::Triangular, Some(o)) => (SolverMode::Triangular(o.clone()), SolverChoice::Triangular),
        (SolverChoice::Triangular, None) => {
            return Err(Error::InvalidInput("no level order makes the system triangular".into()));
        }
        (SolverChoice::Auto | SolverChoice::General, _) => (general(), SolverChoice::General),
    };
    let map = QuantileMap::new(stage, QuantileMapConfig { ubar: cfg.ubar, grid_points: cfg.grid_points, mode })?;
    Ok((map, order, used))
}

/// Where the `(Ũ, Δ)` draws of each row come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxyDraws<'a> {
    /// Fresh draws keyed by the estimation seed and the row's position.
    Fresh,
    /// Rows of a resample reuse the draws their source rows received in the
    /// estimate made with `source_seed`.
    Attached { indices: &'a [usize], source_seed: u64 },
}

fn proxy_seed(seed: u64, r: usize) -> u64 {
    derive_seed(derive_seed(seed, purpose::PROXY), r as u64)
}

/// Proxy dataset for replicate `r`.
pub fn proxies_for<T: Scalar>(
    data: &Dataset<T>,
    map: &QuantileMap<T>,
    cfg: &PipelineConfig<T>,
    seed: u64,
    r: usize,
    draws: ProxyDraws<'_>,
) -> Result<ProxyDataset<T>> {
    match draws {
        ProxyDraws::Fresh => make_proxies(data, map, &cfg.proxy_config(proxy_seed(seed, r))),
        ProxyDraws::Attached { indices, source_seed } => {
            let source = cfg.proxy_config(proxy_seed(source_seed, r));
            let d: Vec<(f64, bool)> = indices.iter().map(|&i| row_draw(&source, i)).collect();
            make_proxies_from_draws(data, map, &d, &cfg.proxy_config(proxy_seed(seed, r)))
        }
    }
}

/// Full estimator on one dataset.
pub fn estimate<T: Scalar>(data: &Dataset<T>, cfg: &PipelineConfig<T>, seed: u64) -> Result<Estimate<T>> {
    let (map, order, solver) = build_map(data, cfg, seed)?;
    estimate_with_map(data, &map, order, solver, cfg, seed, ProxyDraws::Fresh)
}

/// Full estimator on the rows `indices` of `data`, each row keeping the proxy
/// draw it received in the estimate on `data` made with `source_seed`.
pub fn estimate_attached<T: Scalar>(
    data: &Dataset<T>,
    indices: &[usize],
    cfg: &PipelineConfig<T>,
    seed: u64,
    source_seed: u64,
) -> Result<Estimate<T>> {
    let resample = data.resample(indices);
    let (map, order, solver) = build_map(&resample, cfg, seed)?;
    estimate_with_map(&resample, &map, order, solver, cfg, seed, ProxyDraws::Attached { indices, source_seed })
}

pub fn estimate_with_map<T: Scalar>(
    data: &Dataset<T>,
    map: &QuantileMap<T>,
    order: Option<LevelOrder>,
    solver: SolverChoice,
    cfg: &PipelineConfig<T>,
    seed: u64,
    draws: ProxyDraws<'_>,
) -> Result<Estimate<T>> {
    let mut fits = Vec::with_capacity(cfg.replicates);
    let mut proxies = 0;
    let mut dropped = 0;
    for r in 0..cfg.replicates {
        let px = proxies_for(data, map, cfg, seed, r, draws)?;
        proxies += px.len();
        dropped += px.dropped();
        fits.push(fit_cox(&CoxData::from_proxies(&px)?, None, &cfg.cox)?);
    }
    let p = fits[0].beta.len();
    let reps = T::from_count(fits.len());
    let beta = (0..p).map(|j| fits.iter().map(|f| f.beta[j]).sum::<T>() / reps).collect();

    let stage = map.stage();
    let xs: Vec<T> = data.covariates().collect();
    let x_mean = xs.iter().copied().sum::<T>() / T::from_count(xs.len());
    let mut bandwidths = Vec::new();
    for w in 0..data.levels() {
        let key = CellKey::Instrument { w };
        if let Some(h) = stage.bandwidth(key, x_mean) {
            bandwidths.push(BandwidthRecord { key, h });
        }
    }
    for z in 0..data.levels() {
        for w in 0..data.levels() {
            let key = CellKey::Joint { z, w };
            if let Some(h) = stage.bandwidth(key, x_mean) {
                bandwidths.push(BandwidthRecord { key, h });
            }
        }
    }
    let rank_deficient = map.cached_slices().iter().any(|s| s.rank_deficient);
    let audit = Audit {
        seed,
        tbar: stage.tbar(),
        order,
        solver,
        bandwidths,
        bandwidth_fallbacks: stage.fallbacks().to_vec(),
        widened: stage.widened(),
        proxies,
        dropped,
        rank_deficient,
    };
    Ok(Estimate { beta, fit: fits.swap_remove(0), audit })
}
