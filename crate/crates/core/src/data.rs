//! Censored observations with a discrete treatment and a discrete instrument.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<T> {
    /// Observed duration `min(T, C)`.
    pub y: T,
    /// `true` when the duration is an event (uncensored).
    pub delta: bool,
    /// Treatment level, `0..L`.
    pub z: usize,
    pub x: T,
    /// Instrument level, `0..L`.
    pub w: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    observations: Vec<Observation<T>>,
    /// Dummy vector for each treatment level.
    z_codebook: Vec<Vec<T>>,
    z_labels: Vec<String>,
    w_labels: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        observations: Vec<Observation<T>>,
        z_codebook: Vec<Vec<T>>,
        z_labels: Vec<String>,
        w_labels: Vec<String>,
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidInput("dataset has no observations".into()));
        }
        let levels = z_codebook.len();
        if levels == 0 {
            return Err(Error::InvalidInput("treatment codebook is empty".into()));
        }
        if w_labels.len() != levels {
            return Err(Error::InvalidInput(format!(
                "treatment has {levels} levels but instrument has {}; the model needs the same number of modalities",
                w_labels.len()
            )));
        }
        if z_labels.len() != levels {
            return Err(Error::InvalidInput("one label per treatment level is required".into()));
        }
        let d_z = z_codebook[0].len();
        if z_codebook.iter().any(|d| d.len() != d_z) {
            return Err(Error::InvalidInput("treatment dummy vectors differ in length".into()));
        }
        for i in 0..levels {
            for j in 0..i {
                if z_codebook[i] == z_codebook[j] {
                    return Err(Error::InvalidInput(format!(
                        "treatment levels {j} and {i} share a dummy vector"
                    )));
                }
            }
        }
        for (i, o) in observations.iter().enumerate() {
            if !o.y.is_finite() || o.y < T::zero() {
                return Err(Error::InvalidInput(format!("row {i}: duration must be finite and >= 0")));
            }
            if !o.x.is_finite() {
                return Err(Error::InvalidInput(format!("row {i}: covariate must be finite")));
            }
            if o.z >= levels || o.w >= levels {
                return Err(Error::InvalidInput(format!("row {i}: level index out of range")));
            }
        }
        Ok(Self { observations, z_codebook, z_labels, w_labels })
    }

    /// Binary treatment and instrument coded 0/1 with the dummy `z`.
    pub fn binary(observations: Vec<Observation<T>>) -> Result<Self> {
        Self::new(
            observations,
            vec![vec![T::zero()], vec![T::one()]],
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
        )
    }

    pub fn observations(&self) -> &[Observation<T>] {
        &self.observations
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    /// Number of treatment (and instrument) levels.
    pub fn levels(&self) -> usize {
        self.z_codebook.len()
    }

    pub fn d_z(&self) -> usize {
        self.z_codebook[0].len()
    }

    /// Dimension of `V = (z dummies, x)`.
    pub fn d_v(&self) -> usize {
        self.d_z() + 1
    }

    pub fn z_codebook(&self) -> &[Vec<T>] {
        &self.z_codebook
    }

    pub fn z_labels(&self) -> &[String] {
        &self.z_labels
    }

    pub fn w_labels(&self) -> &[String] {
        &self.w_labels
    }

    /// `V = (z dummies, x)` for a treatment level and covariate.
    pub fn design_vector(&self, z: usize, x: T) -> Vec<T> {
        let mut v = self.z_codebook[z].clone();
        v.push(x);
        v
    }

    /// Counts indexed `[z][w]`.
    pub fn cell_counts(&self) -> Vec<Vec<usize>> {
        let l = self.levels();
        let mut counts = vec![vec![0; l]; l];
        for o in &self.observations {
            counts[o.z][o.w] += 1;
        }
        counts
    }

    /// Largest uncensored duration, or the largest duration when nothing is uncensored.
    pub fn max_event_time(&self) -> T {
        let events = self.observations.iter().filter(|o| o.delta).map(|o| o.y);
        let max = events.fold(T::neg_infinity(), T::max);
        if max.is_finite() {
            max
        } else {
            self.observations.iter().map(|o| o.y).fold(T::zero(), T::max)
        }
    }

    /// Rows picked by index (with repetition), same codebooks.
    pub fn resample(&self, indices: &[usize]) -> Self {
        Self {
            observations: indices.iter().map(|&i| self.observations[i]).collect(),
            z_codebook: self.z_codebook.clone(),
            z_labels: self.z_labels.clone(),
            w_labels: self.w_labels.clone(),
        }
    }

    pub fn covariates(&self) -> impl Iterator<Item = T> + '_ {
        self.observations.iter().map(|o| o.x)
    }

    /// Same rows with `x` mapped through `f`.
    pub fn map_covariate(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        for o in &mut out.observations {
            o.x = f(o.x);
        }
        out
    }
}
