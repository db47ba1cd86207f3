//! Grid evaluation of `φ̂(z, x, ·)` with monotone projection and interpolation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::general::{solve_general, GeneralOptions};
use super::order::LevelOrder;
use super::stage::FirstStage;
use super::triangular::{eval_a, solve_triangular_partial};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum SolverMode {
    Triangular(LevelOrder),
    General(GeneralOptions),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileMapConfig<T> {
    pub ubar: T,
    /// Number of grid points on `[0, Ū]`.
    pub grid_points: usize,
    pub mode: SolverMode,
}

/// `φ̂` on the `u` grid at one covariate value.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSlice<T> {
    pub x: T,
    pub grid: Vec<T>,
    /// Solver output before projection, `[level][grid index]`; `None` once saturated.
    pub raw: Vec<Vec<Option<T>>>,
    /// Monotone projection of the valid prefix of `raw`, `[level][grid index]`.
    pub phi: Vec<Vec<T>>,
    /// `‖A(θ̂)(u)‖∞` per grid point, when every level was solved.
    pub residual: Vec<Option<T>>,
    /// General solver reported a rank-deficient Jacobian somewhere on the grid.
    pub rank_deficient: bool,
}

impl<T: Scalar> QuantileSlice<T> {
    /// Largest grid value of `u` for which `level` was solved.
    pub fn valid_up_to(&self, level: usize) -> Option<T> {
        let n = self.phi[level].len();
        (n > 0).then(|| self.grid[n - 1])
    }
}

/// Lazily evaluated `φ̂`, cached per distinct covariate value.
#[derive(Debug)]
pub struct QuantileMap<T> {
    stage: FirstStage<T>,
    cfg: QuantileMapConfig<T>,
    cache: Mutex<HashMap<u64, Arc<QuantileSlice<T>>>>,
}

impl<T: Scalar> QuantileMap<T> {
    pub fn new(stage: FirstStage<T>, cfg: QuantileMapConfig<T>) -> Result<Self> {
        if !(cfg.ubar > T::zero() && cfg.ubar < T::one()) {
            return Err(Error::InvalidInput("Ū must lie in (0, 1)".into()));
        }
        if cfg.grid_points < 2 {
            return Err(Error::InvalidInput("the u grid needs at least two points".into()));
        }
        if let SolverMode::Triangular(order) = &cfg.mode {
            if order.levels() != stage.levels() {
                return Err(Error::InvalidInput("level order does not match the data".into()));
            }
        }
        Ok(Self { stage, cfg, cache: Mutex::new(HashMap::new()) })
    }

    pub fn stage(&self) -> &FirstStage<T> {
        &self.stage
    }

    pub fn config(&self) -> &QuantileMapConfig<T> {
        &self.cfg
    }

    pub fn grid(&self) -> Vec<T> {
        let g = self.cfg.grid_points;
        (0..g).map(|j| self.cfg.ubar * T::from_count(j) / T::from_count(g - 1)).collect()
    }

    pub fn slice(&self, x: T) -> Result<Arc<QuantileSlice<T>>> {
        let key = x.as_f64().to_bits();
        if let Some(s) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(s));
        }
        let slice = Arc::new(self.compute_slice(x)?);
        let mut cache = self.cache.lock().expect("cache lock");
        Ok(Arc::clone(cache.entry(key).or_insert(slice)))
    }

    fn compute_slice(&self, x: T) -> Result<QuantileSlice<T>> {
        let bundle = self.stage.bundle_at(x, self.cfg.ubar)?;
        let l = bundle.levels();
        let grid = self.grid();
        let mut raw = vec![Vec::with_capacity(grid.len()); l];
        let mut residual = Vec::with_capacity(grid.len());
        let mut rank_deficient = false;
        let mut warm: Option<Vec<T>> = None;
        for (j, &u) in grid.iter().enumerate() {
            let theta: Vec<Option<T>> = match &self.cfg.mode {
                SolverMode::Triangular(order) => solve_triangular_partial(&bundle, order, u).0,
                SolverMode::General(opts) => {
                    let opts = GeneralOptions { seed: derive_seed(opts.seed, j as u64), ..opts.clone() };
                    match solve_general(&bundle, u, &opts, warm.as_deref()) {
                        Ok(sol) => {
                            rank_deficient |= sol.rank_deficient;
                            warm = Some(sol.theta.clone());
                            sol.theta.into_iter().map(Some).collect()
                        }
                        Err(e) if e.is_numerical() => vec![None; l],
                        Err(e) => return Err(e),
                    }
                }
            };
            residual.push(if theta.iter().all(Option::is_some) {
                let full: Vec<T> = theta.iter().map(|t| t.expect("solved")).collect();
                Some(eval_a(&full, &bundle, u).iter().map(|v| v.abs()).fold(T::zero(), T::max))
            } else {
                None
            });
            for (level, t) in theta.into_iter().enumerate() {
                raw[level].push(t);
            }
        }
        let tbar = bundle.tbar();
        let phi = raw
            .iter()
            .map(|col| {
                let prefix: Vec<T> = col.iter().map_while(|t| *t).map(|t| t.max(T::zero()).min(tbar)).collect();
                isotonic_increasing(&prefix)
            })
            .collect();
        Ok(QuantileSlice { x, grid, raw, phi, residual, rank_deficient })
    }

    /// `φ̂(z, x, u)` by linear interpolation on the projected grid.
    pub fn phi_hat(&self, z: usize, x: T, u: T) -> Result<T> {
        if z >= self.stage.levels() {
            return Err(Error::InvalidInput(format!("treatment level {z} out of range")));
        }
        let ubar = self.cfg.ubar;
        if !(u >= T::zero()) || u > ubar * (T::one() + T::lit(1e-12)) {
            return Err(Error::InvalidInput("u must lie in [0, Ū]".into()));
        }
        let slice = self.slice(x)?;
        interpolate(&slice.phi[z], u.min(ubar) / ubar, self.cfg.grid_points).ok_or(Error::Saturated { level: z })
    }

    /// Every slice computed so far, ordered by covariate value.
    pub fn cached_slices(&self) -> Vec<Arc<QuantileSlice<T>>> {
        let mut v: Vec<_> = self.cache.lock().expect("cache lock").values().cloned().collect();
        v.sort_by(|a, b| a.x.partial_cmp(&b.x).expect("finite"));
        v
    }
}

pub fn phi_hat<T: Scalar>(map: &QuantileMap<T>, z: usize, x: T, u: T) -> Result<T> {
    map.phi_hat(z, x, u)
}

/// Interpolates `values` (a prefix of a grid with `points` nodes on `[0, 1]`) at `s`.
fn interpolate<T: Scalar>(values: &[T], s: T, points: usize) -> Option<T> {
    let pos = s * T::from_count(points - 1);
    let j = pos.floor().to_usize().unwrap_or(0).min(points - 2);
    let frac = pos - T::from_count(j);
    if j + 1 < values.len() {
        Some(values[j] + frac * (values[j + 1] - values[j]))
    } else if frac == T::zero() && j < values.len() {
        Some(values[j])
    } else {
        None
    }
}

/// Least-squares nondecreasing fit (pool adjacent violators).
pub fn isotonic_increasing<T: Scalar>(values: &[T]) -> Vec<T> {
    // blocks of (mean, size)
    let mut blocks: Vec<(T, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            let mean = (m1 * T::from_count(n1) + m2 * T::from_count(n2)) / T::from_count(n);
            *blocks.last_mut().expect("nonempty") = (mean, n);
        }
    }
    blocks.into_iter().flat_map(|(m, n)| std::iter::repeat_n(m, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pava_pools_violators() {
        let fit = isotonic_increasing(&[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(fit, vec![1.0, 2.5, 2.5, 4.0]);
        let fit = isotonic_increasing(&[3.0, 2.0, 1.0]);
        assert_eq!(fit, vec![2.0, 2.0, 2.0]);
        assert!(isotonic_increasing::<f64>(&[]).is_empty());
    }

    #[test]
    fn interpolation_respects_valid_prefix() {
        let v = [0.0, 1.0, 2.0];
        assert_eq!(interpolate(&v, 0.125, 5), Some(0.5));
        assert_eq!(interpolate(&v, 0.5, 5), Some(2.0));
        assert_eq!(interpolate(&v, 0.6, 5), None);
        assert_eq!(interpolate(&[0.0, 1.0, 2.0, 3.0, 4.0], 1.0, 5), Some(4.0));
    }
}
