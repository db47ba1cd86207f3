//! Step 1.1 estimates assembled per covariate value.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::beran::{product_limit, smooth_cdf, SmoothSubCdf, StepCdf, WeightedTime};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{rule_of_thumb, BandwidthPlan, CellBandwidth, CellKey, KernelSpec};
use crate::scalar::Scalar;

/// Maximum number of bandwidth doublings tried when a window holds no mass.
const MAX_WIDENINGS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct FirstStageConfig<T> {
    /// Covariate kernel `K`.
    pub kernel: KernelSpec<T>,
    /// Time kernel `K̃`.
    pub time_kernel: KernelSpec<T>,
    /// Time-smoothing bandwidth; 0 disables smoothing.
    pub epsilon: T,
    pub bandwidth: BandwidthPlan<T>,
    /// `T̄`; defaults to the largest uncensored duration.
    pub tbar: Option<T>,
}

impl<T: Scalar> Default for FirstStageConfig<T> {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::epanechnikov(),
            time_kernel: KernelSpec::epanechnikov(),
            epsilon: T::zero(),
            bandwidth: BandwidthPlan::default(),
            tbar: None,
        }
    }
}

/// `F̂(·, z_l | x, w_k)` for every `(l, k)` at one covariate value.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCdfBundle<T> {
    /// Indexed `[treatment level][instrument level]`.
    entries: Vec<Vec<SmoothSubCdf<T>>>,
    ubar: T,
    tbar: T,
    x: T,
}

impl<T: Scalar> CellCdfBundle<T> {
    pub fn new(entries: Vec<Vec<SmoothSubCdf<T>>>, ubar: T, tbar: T, x: T) -> Result<Self> {
        let l = entries.len();
        if l == 0 || entries.iter().any(|row| row.len() != l) {
            return Err(Error::InvalidInput("bundle must be a square L x L array".into()));
        }
        if !(ubar > T::zero() && ubar < T::one()) {
            return Err(Error::InvalidInput("Ū must lie in (0, 1)".into()));
        }
        if entries.iter().flatten().any(|e| e.upper_limit() != tbar) {
            return Err(Error::InvalidInput("all entries must share T̄".into()));
        }
        Ok(Self { entries, ubar, tbar, x })
    }

    pub fn levels(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, level: usize, instrument: usize) -> &SmoothSubCdf<T> {
        &self.entries[level][instrument]
    }

    pub fn ubar(&self) -> T {
        self.ubar
    }

    pub fn tbar(&self) -> T {
        self.tbar
    }

    pub fn x(&self) -> T {
        self.x
    }

    /// True when every non-zero entry is a step function.
    pub fn is_stepwise(&self) -> bool {
        self.entries.iter().flatten().any(|e| !e.is_zero() && e.is_step())
    }
}

#[derive(Debug, Clone)]
struct CellRow<T> {
    y: T,
    delta: bool,
    x: T,
}

/// Bandwidths and sorted cell data, ready to produce bundles at any `x`.
#[derive(Debug)]
pub struct FirstStage<T> {
    cfg: FirstStageConfig<T>,
    tbar: T,
    levels: usize,
    /// `[z][w]`, in product-limit order.
    cells: Vec<Vec<Vec<CellRow<T>>>>,
    /// `[w]`: `(z, x)`.
    instruments: Vec<Vec<(usize, T)>>,
    joint_h: Vec<Vec<Option<CellBandwidth<T>>>>,
    instrument_h: Vec<Option<CellBandwidth<T>>>,
    fallbacks: Vec<String>,
    widened: AtomicUsize,
}

impl<T: Scalar> FirstStage<T> {
    pub fn new(data: &Dataset<T>, cfg: FirstStageConfig<T>) -> Result<Self> {
        let levels = data.levels();
        let tbar = cfg.tbar.unwrap_or_else(|| data.max_event_time());
        if !(tbar > T::zero()) || !tbar.is_finite() {
            return Err(Error::InvalidInput("T̄ must be positive and finite".into()));
        }
        if cfg.epsilon < T::zero() {
            return Err(Error::InvalidInput("ε must be nonnegative".into()));
        }
        let mut cells = vec![vec![Vec::new(); levels]; levels];
        let mut instruments = vec![Vec::new(); levels];
        for o in data.observations() {
            cells[o.z][o.w].push(CellRow { y: o.y, delta: o.delta, x: o.x });
            instruments[o.w].push((o.z, o.x));
        }
        for row in cells.iter_mut().flatten() {
            row.sort_by(|a, b| {
                a.y.partial_cmp(&b.y).expect("finite").then_with(|| b.delta.cmp(&a.delta))
            });
        }

        let all_x: Vec<T> = data.covariates().collect();
        let global = rule_of_thumb(&all_x).unwrap_or_else(|_| T::one());
        let mut fallbacks = Vec::new();
        let mut instrument_h = Vec::with_capacity(levels);
        for w in 0..levels {
            if instruments[w].is_empty() {
                instrument_h.push(None);
                continue;
            }
            let key = CellKey::Instrument { w };
            let h = match CellBandwidth::resolve(data, key, &cfg.bandwidth, &cfg.kernel) {
                Ok(h) => h,
                Err(Error::InsufficientData(why)) => {
                    fallbacks.push(format!("instrument {w}: {why}; using whole-sample bandwidth"));
                    CellBandwidth::constant(global)
                }
                Err(e) => return Err(e),
            };
            instrument_h.push(Some(h));
        }
        let mut joint_h = vec![vec![None; levels]; levels];
        for z in 0..levels {
            for w in 0..levels {
                if cells[z][w].is_empty() {
                    continue;
                }
                let key = CellKey::Joint { z, w };
                let h = match CellBandwidth::resolve(data, key, &cfg.bandwidth, &cfg.kernel) {
                    Ok(h) => h,
                    Err(Error::InsufficientData(why)) => {
                        fallbacks.push(format!("cell ({z}, {w}): {why}; using instrument bandwidth"));
                        instrument_h[w].clone().unwrap_or_else(|| CellBandwidth::constant(global))
                    }
                    Err(e) => return Err(e),
                };
                joint_h[z][w] = Some(h);
            }
        }
        Ok(Self {
            cfg,
            tbar,
            levels,
            cells,
            instruments,
            joint_h,
            instrument_h,
            fallbacks,
            widened: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &FirstStageConfig<T> {
        &self.cfg
    }

    pub fn tbar(&self) -> T {
        self.tbar
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Bandwidth of a cell at `x`, if the cell has observations.
    pub fn bandwidth(&self, key: CellKey, x: T) -> Option<T> {
        match key {
            CellKey::Joint { z, w } => self.joint_h[z][w].as_ref().map(|h| h.at(x)),
            CellKey::Instrument { w } => self.instrument_h[w].as_ref().map(|h| h.at(x)),
        }
    }

    pub fn fallbacks(&self) -> &[String] {
        &self.fallbacks
    }

    /// Number of times a bandwidth had to be widened because its window was empty.
    pub fn widened(&self) -> usize {
        self.widened.load(Ordering::Relaxed)
    }

    /// `p̂_{z,x,w}` for every `z` at one instrument level.
    fn treatment_probabilities(&self, w: usize, x: T) -> Vec<T> {
        let mut probs = vec![T::zero(); self.levels];
        let Some(bw) = &self.instrument_h[w] else { return probs };
        let kernel = &self.cfg.kernel;
        let mut h = bw.at(x);
        for attempt in 0..=MAX_WIDENINGS {
            let mut den = T::zero();
            probs.iter_mut().for_each(|p| *p = T::zero());
            for &(z, xi) in &self.instruments[w] {
                let k = kernel.eval((x - xi) / h);
                den = den + k;
                probs[z] = probs[z] + k;
            }
            if den > T::zero() {
                probs.iter_mut().for_each(|p| *p = (*p / den).min(T::one()));
                return probs;
            }
            if attempt < MAX_WIDENINGS {
                self.widened.fetch_add(1, Ordering::Relaxed);
                h = h * T::lit(2.0);
            }
        }
        probs
    }

    fn conditional_cdf(&self, z: usize, w: usize, x: T) -> Result<StepCdf<T>> {
        let rows = &self.cells[z][w];
        let bw = self.joint_h[z][w].as_ref().ok_or(Error::EmptyCell { z, w })?;
        let kernel = &self.cfg.kernel;
        let mut h = bw.at(x);
        for attempt in 0..=MAX_WIDENINGS {
            let items: Vec<WeightedTime<T>> = rows
                .iter()
                .map(|r| WeightedTime { y: r.y, delta: r.delta, weight: kernel.eval((x - r.x) / h) })
                .collect();
            if items.iter().any(|i| i.weight > T::zero()) {
                return Ok(product_limit(&items, self.tbar));
            }
            if attempt < MAX_WIDENINGS {
                self.widened.fetch_add(1, Ordering::Relaxed);
                h = h * T::lit(2.0);
            }
        }
        Err(Error::ZeroMass { x: x.as_f64() })
    }

    /// All `F̂(·, z_l | x, w_k)` at covariate value `x`.
    pub fn bundle_at(&self, x: T, ubar: T) -> Result<CellCdfBundle<T>> {
        let l = self.levels;
        let zero = SmoothSubCdf::zero(self.tbar, self.cfg.time_kernel.clone());
        let mut entries = vec![vec![zero; l]; l];
        for w in 0..l {
            let probs = self.treatment_probabilities(w, x);
            for z in 0..l {
                if probs[z] <= T::zero() {
                    continue;
                }
                let step = self.conditional_cdf(z, w, x)?;
                entries[z][w] = smooth_cdf(step, probs[z], self.cfg.epsilon, &self.cfg.time_kernel);
            }
        }
        CellCdfBundle::new(entries, ubar, self.tbar, x)
    }
}
