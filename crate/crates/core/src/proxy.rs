//! Exogenous proxy observations: artificial uniform durations and censoring
//! variables mapped through `φ̂`.

use rand::Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::phi::QuantileMap;
use crate::rng::{purpose, row_rng};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SaturationPolicy {
    /// Drop the row and count it against `max_drop_fraction`.
    #[default]
    Drop,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyConfig {
    pub ubar: f64,
    /// Width of the support `[Ū - τ, Ū]` of the generated censoring variable.
    pub tau: f64,
    pub seed: u64,
    pub max_drop_fraction: f64,
    pub policy: SaturationPolicy,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self { ubar: 0.9, tau: 0.0, seed: 0, max_drop_fraction: 0.05, policy: SaturationPolicy::Drop }
    }
}

impl ProxyConfig {
    pub fn new(ubar: f64, tau: f64, seed: u64) -> Result<Self> {
        let cfg = Self { ubar, tau, seed, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ubar > 0.0 && self.ubar < 1.0) {
            return Err(Error::InvalidInput(format!("Ū = {} must lie in (0, 1)", self.ubar)));
        }
        if !(self.tau >= 0.0 && self.tau <= self.ubar) {
            return Err(Error::InvalidInput(format!("τ = {} must lie in [0, Ū]", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.max_drop_fraction) {
            return Err(Error::InvalidInput("proxy drop cap must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// `(Ũ, Δ)` from two uniforms: `U_g = a` and `U_g^c = Ū - τ + τ b`.
pub fn u_tilde_from_uniforms(cfg: &ProxyConfig, a: f64, b: f64) -> (f64, bool) {
    let censor = cfg.ubar - cfg.tau + cfg.tau * b;
    if a <= censor {
        (a, true)
    } else {
        (censor, false)
    }
}

pub fn draw_u_tilde<R: Rng + ?Sized>(cfg: &ProxyConfig, rng: &mut R) -> (f64, bool) {
    let a: f64 = rng.random();
    let b: f64 = rng.random();
    u_tilde_from_uniforms(cfg, a, b)
}

/// The draw used for row `row`; independent of every other row.
pub fn row_draw(cfg: &ProxyConfig, row: usize) -> (f64, bool) {
    draw_u_tilde(cfg, &mut row_rng(cfg.seed, purpose::PROXY, row))
}

/// `(P(Ũ ≤ u), P(Ũ ≤ u, Δ = 1))`.
pub fn u_tilde_cdf(u: f64, cfg: &ProxyConfig) -> (f64, f64) {
    let (ubar, tau) = (cfg.ubar, cfg.tau);
    if u < 0.0 {
        return (0.0, 0.0);
    }
    if u >= ubar {
        let events = if tau > 0.0 { (ubar * ubar - (ubar - tau).powi(2)) / (2.0 * tau) } else { ubar };
        // the τ > 0 branch simplifies to Ū - τ/2
        return (1.0, events);
    }
    if u < ubar - tau {
        return (u, u);
    }
    let all = (1.0 - ubar / tau) + u * (1.0 / tau + ubar / tau) - u * u / tau;
    let events = -u * u / (2.0 * tau) + u * ubar / tau - (ubar - tau).powi(2) / (2.0 * tau);
    (all, events)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyRow<T> {
    pub y: T,
    pub delta: bool,
    pub u_tilde: T,
    pub z: usize,
    pub x: T,
    /// Index of the source observation.
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyDataset<T> {
    rows: Vec<ProxyRow<T>>,
    z_codebook: Vec<Vec<T>>,
    dropped: usize,
    source_n: usize,
    seed: u64,
}

impl<T: Scalar> ProxyDataset<T> {
    pub fn rows(&self) -> &[ProxyRow<T>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows removed because `φ̂` saturated.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn source_n(&self) -> usize {
        self.source_n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `(Z dummies, X)` for a row.
    pub fn design_vector(&self, row: &ProxyRow<T>) -> Vec<T> {
        let mut v = self.z_codebook[row.z].clone();
        v.push(row.x);
        v
    }
}

/// One proxy per observation using the row-keyed draws of `cfg.seed`.
pub fn make_proxies<T: Scalar>(data: &Dataset<T>, map: &QuantileMap<T>, cfg: &ProxyConfig) -> Result<ProxyDataset<T>> {
    cfg.validate()?;
    let draws: Vec<(f64, bool)> = (0..data.n()).map(|i| row_draw(cfg, i)).collect();
    make_proxies_from_draws(data, map, &draws, cfg)
}

/// As [`make_proxies`] with caller-supplied `(Ũ_i, Δ_i)`.
pub fn make_proxies_from_draws<T: Scalar>(
    data: &Dataset<T>,
    map: &QuantileMap<T>,
    draws: &[(f64, bool)],
    cfg: &ProxyConfig,
) -> Result<ProxyDataset<T>> {
    cfg.validate()?;
    if draws.len() != data.n() {
        return Err(Error::InvalidInput("one draw per observation is required".into()));
    }
    let mapped: Vec<Result<Option<ProxyRow<T>>>> = data
        .observations()
        .par_iter()
        .zip(draws.par_iter())
        .enumerate()
        .map(|(i, (o, &(u, delta)))| {
            let u = T::lit(u);
            match map.phi_hat(o.z, o.x, u) {
                Ok(y) => Ok(Some(ProxyRow { y, delta, u_tilde: u, z: o.z, x: o.x, source: i })),
                Err(Error::Saturated { level }) => match cfg.policy {
                    SaturationPolicy::Drop => Ok(None),
                    SaturationPolicy::Error => Err(Error::Saturated { level }),
                },
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(data.n());
    let mut dropped = 0;
    for r in mapped {
        match r? {
            Some(row) => rows.push(row),
            None => dropped += 1,
        }
    }
    let total = data.n();
    if dropped as f64 > cfg.max_drop_fraction * total as f64 {
        return Err(Error::SaturationBudgetExceeded { dropped, total, cap: cfg.max_drop_fraction });
    }
    Ok(ProxyDataset {
        rows,
        z_codebook: data.z_codebook().to_vec(),
        dropped,
        source_n: total,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_censoring_draws() {
        let cfg = ProxyConfig::new(0.9, 0.0, 1).unwrap();
        assert_eq!(u_tilde_from_uniforms(&cfg, 0.95, 0.4), (0.9, false));
        assert_eq!(u_tilde_from_uniforms(&cfg, 0.3, 0.4), (0.3, true));
    }

    #[test]
    fn cdf_branches() {
        let cfg = ProxyConfig::new(0.9, 0.2, 1).unwrap();
        assert_eq!(u_tilde_cdf(-0.1, &cfg), (0.0, 0.0));
        assert_eq!(u_tilde_cdf(0.5, &cfg), (0.5, 0.5));
        let (all, ev) = u_tilde_cdf(0.9, &cfg);
        assert_eq!(all, 1.0);
        assert!((ev - (0.81 - 0.49) / 0.4).abs() < 1e-15);
        // continuity at both ends of the quadratic branch
        let left = u_tilde_cdf(0.7 - 1e-12, &cfg);
        let right = u_tilde_cdf(0.7, &cfg);
        assert!((left.0 - right.0).abs() < 1e-9 && (left.1 - right.1).abs() < 1e-9);
        let below = u_tilde_cdf(0.9 - 1e-12, &cfg);
        assert!((below.0 - 1.0).abs() < 1e-9 && (below.1 - ev).abs() < 1e-9);
    }

    #[test]
    fn cdf_is_ordered_and_monotone() {
        for tau in [0.0, 0.1, 0.5, 0.9] {
            let cfg = ProxyConfig::new(0.9, tau, 0).unwrap();
            let mut prev = (0.0, 0.0);
            for i in 0..=200 {
                let u = -0.05 + 1.0 * i as f64 / 200.0;
                let cur = u_tilde_cdf(u, &cfg);
                assert!(cur.0 >= cur.1 - 1e-15);
                assert!(cur.0 >= prev.0 - 1e-15 && cur.1 >= prev.1 - 1e-15);
                prev = cur;
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(ProxyConfig::new(1.0, 0.0, 0).is_err());
        assert!(ProxyConfig::new(0.5, 0.6, 0).is_err());
        assert!(ProxyConfig::new(0.5, -0.1, 0).is_err());
    }

    #[test]
    fn row_draws_are_stable() {
        let cfg = ProxyConfig::new(0.9, 0.3, 77).unwrap();
        let a: Vec<_> = (0..50).map(|i| row_draw(&cfg, i)).collect();
        let b: Vec<_> = (0..50).rev().map(|i| row_draw(&cfg, i)).collect();
        assert!(a.iter().eq(b.iter().rev()));
        assert!(a.iter().all(|&(u, d)| (0.0..=0.9).contains(&u) && (!d || u <= 0.9)));
    }
}
