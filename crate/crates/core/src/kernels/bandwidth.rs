use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::KernelSpec;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthMethod<T> {
    /// `1.06 σ̂ n^{-1/5}` on the covariate values of the cell.
    RuleOfThumb,
    /// One-stage direct plug-in: pilot rule-of-thumb bandwidth for the
    /// curvature functional, then the AMISE-optimal bandwidth for the kernel.
    PlugIn,
    /// Fixed bandwidth in covariate units.
    Fixed(T),
}

impl<T: Scalar> fmt::Display for BandwidthMethod<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandwidthMethod::RuleOfThumb => f.write_str("rule-of-thumb"),
            BandwidthMethod::PlugIn => f.write_str("plug-in"),
            BandwidthMethod::Fixed(h) => write!(f, "fixed({h})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandwidthScope {
    /// One bandwidth per cell.
    #[default]
    PerCell,
    /// Cell bandwidth rescaled by the pilot density at the query point.
    PerQuery,
}

impl FromStr for BandwidthScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "per-cell" | "cell" => Ok(BandwidthScope::PerCell),
            "per-query" | "query" => Ok(BandwidthScope::PerQuery),
            other => Err(Error::InvalidInput(format!("unknown bandwidth scope '{other}'"))),
        }
    }
}

/// Subsample a bandwidth is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CellKey {
    /// Observations with `Z = z` and `W = w` (Beran weights).
    Joint { z: usize, w: usize },
    /// Observations with `W = w` (treatment probability).
    Instrument { w: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthPlan<T> {
    pub method: BandwidthMethod<T>,
    pub scope: BandwidthScope,
    pub overrides: BTreeMap<CellKey, T>,
}

impl<T: Scalar> Default for BandwidthPlan<T> {
    fn default() -> Self {
        Self { method: BandwidthMethod::RuleOfThumb, scope: BandwidthScope::PerCell, overrides: BTreeMap::new() }
    }
}

impl<T: Scalar> BandwidthPlan<T> {
    pub fn fixed(h: T) -> Self {
        Self { method: BandwidthMethod::Fixed(h), ..Self::default() }
    }

    pub fn plug_in() -> Self {
        Self { method: BandwidthMethod::PlugIn, ..Self::default() }
    }

    pub fn parse_method(name: &str, value: Option<T>) -> Result<BandwidthMethod<T>> {
        match name.trim().to_ascii_lowercase().as_str() {
            "rule-of-thumb" | "rot" | "silverman" => Ok(BandwidthMethod::RuleOfThumb),
            "plug-in" | "plugin" | "dpi" => Ok(BandwidthMethod::PlugIn),
            "fixed" => match value {
                Some(h) if h > T::zero() && h.is_finite() => Ok(BandwidthMethod::Fixed(h)),
                _ => Err(Error::InvalidInput("fixed bandwidth needs a positive value".into())),
            },
            other => Err(Error::InvalidInput(format!("unknown bandwidth method '{other}'"))),
        }
    }
}

/// Density rescaling used by the per-query scope.
#[derive(Debug, Clone, PartialEq)]
struct LocalScale<T> {
    xs: Vec<T>,
    pilot: T,
    geo_mean: T,
}

impl<T: Scalar> LocalScale<T> {
    fn new(xs: &[T], pilot: T) -> Self {
        let mut s = Self { xs: xs.to_vec(), pilot, geo_mean: T::one() };
        let logs: T = xs.iter().map(|&x| s.density(x).max(T::min_positive_value()).ln()).sum();
        s.geo_mean = (logs / T::from_count(xs.len())).exp();
        s
    }

    fn density(&self, x: T) -> T {
        let sum: T = self.xs.iter().map(|&xi| gaussian((x - xi) / self.pilot)).sum();
        sum / (T::from_count(self.xs.len()) * self.pilot)
    }

    fn factor(&self, x: T) -> T {
        let ratio = self.density(x).max(T::min_positive_value()) / self.geo_mean;
        ratio.powf(T::lit(-0.2)).max(T::lit(0.25)).min(T::lit(4.0))
    }
}

/// Bandwidth resolved for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellBandwidth<T> {
    base: T,
    local: Option<LocalScale<T>>,
}

impl<T: Scalar> CellBandwidth<T> {
    pub fn constant(h: T) -> Self {
        Self { base: h, local: None }
    }

    pub fn base(&self) -> T {
        self.base
    }

    pub fn at(&self, x: T) -> T {
        match &self.local {
            Some(local) => self.base * local.factor(x),
            None => self.base,
        }
    }

    /// Resolves the bandwidth of a cell under `plan`.
    pub fn resolve(
        data: &Dataset<T>,
        key: CellKey,
        plan: &BandwidthPlan<T>,
        kernel: &KernelSpec<T>,
    ) -> Result<Self> {
        if let Some(&h) = plan.overrides.get(&key) {
            return Ok(Self::constant(h));
        }
        let xs: Vec<T> = data
            .observations()
            .iter()
            .filter(|o| match key {
                CellKey::Joint { z, w } => o.z == z && o.w == w,
                CellKey::Instrument { w } => o.w == w,
            })
            .map(|o| o.x)
            .collect();
        if xs.is_empty() {
            let (z, w) = match key {
                CellKey::Joint { z, w } => (z, w),
                CellKey::Instrument { w } => (usize::MAX, w),
            };
            return Err(Error::EmptyCell { z, w });
        }
        let base = match plan.method {
            BandwidthMethod::Fixed(h) => {
                if !(h > T::zero() && h.is_finite()) {
                    return Err(Error::InvalidInput("fixed bandwidth must be positive".into()));
                }
                return Ok(Self::constant(h));
            }
            BandwidthMethod::RuleOfThumb => rule_of_thumb(&xs)?,
            BandwidthMethod::PlugIn => plug_in(&xs, kernel)?,
        };
        let local = match plan.scope {
            BandwidthScope::PerCell => None,
            BandwidthScope::PerQuery => Some(LocalScale::new(&xs, rule_of_thumb(&xs)?)),
        };
        Ok(Self { base, local })
    }
}

/// Bandwidth for the `(z, w)` cell at covariate value `x`.
pub fn select_bandwidth<T: Scalar>(
    data: &Dataset<T>,
    cell: (usize, usize),
    x: T,
    plan: &BandwidthPlan<T>,
    kernel: &KernelSpec<T>,
) -> Result<T> {
    let key = CellKey::Joint { z: cell.0, w: cell.1 };
    Ok(CellBandwidth::resolve(data, key, plan, kernel)?.at(x))
}

fn mean_sd<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = T::from_count(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    let ss: T = xs.iter().map(|&x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - T::one())).sqrt())
}

/// `1.06 σ̂ n^{-1/5}`.
pub fn rule_of_thumb<T: Scalar>(xs: &[T]) -> Result<T> {
    if xs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "bandwidth needs at least 2 observations, got {}",
            xs.len()
        )));
    }
    let (_, sd) = mean_sd(xs);
    if !(sd > T::zero()) {
        return Err(Error::InsufficientData("covariate has zero spread in cell".into()));
    }
    Ok(T::lit(1.06) * sd * T::from_count(xs.len()).powf(T::lit(-0.2)))
}

fn plug_in<T: Scalar>(xs: &[T], kernel: &KernelSpec<T>) -> Result<T> {
    let pilot = rule_of_thumb(xs)?;
    let nu = kernel.order();
    let n = T::from_count(xs.len());
    // R(f^(ν)) = (-1)^ν ψ_{2ν}, ψ estimated with Gaussian derivative kernels.
    let r = 2 * nu;
    let mut acc = T::zero();
    for &a in xs {
        for &b in xs {
            acc = acc + gaussian_derivative(r, (a - b) / pilot);
        }
    }
    let psi = acc / (n * n * pilot.powi(r as i32 + 1));
    let curvature = if nu.is_multiple_of(2) { psi } else { -psi };
    let mu = kernel.leading_moment();
    if !(curvature > T::zero()) || !curvature.is_finite() || mu == T::zero() {
        return Ok(pilot);
    }
    let fact = (1..=nu).fold(T::one(), |acc, k| acc * T::from_count(k));
    let num = kernel.roughness() * fact * fact;
    let den = T::from_count(2 * nu) * mu * mu * curvature * n;
    let h = (num / den).powf(T::one() / T::from_count(2 * nu + 1));
    if h.is_finite() && h > T::zero() {
        Ok(h)
    } else {
        Ok(pilot)
    }
}

fn gaussian<T: Scalar>(x: T) -> T {
    (-(x * x) / T::lit(2.0)).exp() / T::lit((2.0 * std::f64::consts::PI).sqrt())
}

/// `d^r/dx^r φ(x) = (-1)^r He_r(x) φ(x)`.
fn gaussian_derivative<T: Scalar>(r: usize, x: T) -> T {
    let (mut prev, mut cur) = (T::one(), x);
    if r == 0 {
        cur = T::one();
    }
    for k in 1..r {
        let next = x * cur - T::from_count(k) * prev;
        prev = cur;
        cur = next;
    }
    let sign = if r.is_multiple_of(2) { T::one() } else { -T::one() };
    sign * cur * gaussian(x)
}
