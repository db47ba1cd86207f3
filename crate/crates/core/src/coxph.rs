//! Cox proportional hazards fit by partial likelihood (Breslow ties).

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SquareMatrix};
use crate::proxy::ProxyDataset;
use crate::scalar::Scalar;

/// Right-censored durations with a fixed covariate vector per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxData<T> {
    times: Vec<T>,
    events: Vec<bool>,
    /// Row-major `n × p`.
    covariates: Vec<T>,
    p: usize,
    /// Row indices by decreasing time.
    order: Vec<usize>,
}

impl<T: Scalar> CoxData<T> {
    pub fn new(times: Vec<T>, events: Vec<bool>, covariates: Vec<Vec<T>>) -> Result<Self> {
        let n = times.len();
        if n == 0 || events.len() != n || covariates.len() != n {
            return Err(Error::InvalidInput("times, events and covariates must have the same nonzero length".into()));
        }
        let p = covariates[0].len();
        if p == 0 || covariates.iter().any(|c| c.len() != p) {
            return Err(Error::InvalidInput("every row needs the same nonzero number of covariates".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || covariates.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("times and covariates must be finite".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| times[b].partial_cmp(&times[a]).expect("finite"));
        Ok(Self { times, events, covariates: covariates.into_iter().flatten().collect(), p, order })
    }

    /// Raw `(Y, δ, V)`; the naive comparator.
    pub fn from_dataset(data: &Dataset<T>) -> Result<Self> {
        let obs = data.observations();
        Self::new(
            obs.iter().map(|o| o.y).collect(),
            obs.iter().map(|o| o.delta).collect(),
            obs.iter().map(|o| data.design_vector(o.z, o.x)).collect(),
        )
    }

    pub fn from_proxies(proxies: &ProxyDataset<T>) -> Result<Self> {
        let rows = proxies.rows();
        Self::new(
            rows.iter().map(|r| r.y).collect(),
            rows.iter().map(|r| r.delta).collect(),
            rows.iter().map(|r| proxies.design_vector(r)).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn covariate(&self, row: usize) -> &[T] {
        &self.covariates[row * self.p..(row + 1) * self.p]
    }

    /// Same rows with times mapped through `f`.
    pub fn map_times(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(
            self.times.iter().map(|&t| f(t)).collect(),
            self.events.clone(),
            (0..self.n()).map(|i| self.covariate(i).to_vec()).collect(),
        )
    }

    fn means(&self) -> Vec<T> {
        let n = T::from_count(self.n());
        (0..self.p).map(|j| (0..self.n()).map(|i| self.covariate(i)[j]).sum::<T>() / n).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxOptions {
    /// Sup-norm of the score at which the fit is accepted.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxFit<T> {
    pub beta: Vec<T>,
    pub score_norm: T,
    pub observed_information: SquareMatrix<T>,
    pub log_likelihood: T,
    pub iterations: usize,
    pub converged: bool,
    pub n_events: usize,
}

struct Derivatives<T> {
    loglik: T,
    score: Vec<T>,
    information: SquareMatrix<T>,
}

/// Log partial likelihood and its first two derivatives. Covariates are
/// centred and linear predictors shifted by their maximum; neither changes
/// the values.
fn derivatives<T: Scalar>(data: &CoxData<T>, beta: &[T], second: bool) -> Result<Derivatives<T>> {
    if beta.len() != data.p {
        return Err(Error::InvalidInput(format!("β has length {} but the design has {} columns", beta.len(), data.p)));
    }
    if data.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    let p = data.p;
    let means = data.means();
    let centred = |i: usize| -> Vec<T> { data.covariate(i).iter().zip(&means).map(|(&v, &m)| v - m).collect() };
    let eta: Vec<T> = (0..data.n()).map(|i| centred(i).iter().zip(beta).map(|(&v, &b)| v * b).sum()).collect();
    let shift = eta.iter().copied().fold(T::neg_infinity(), T::max);

    let mut s0 = T::zero();
    let mut s1 = vec![T::zero(); p];
    let mut s2 = SquareMatrix::<T>::zeros(if second { p } else { 0 });
    let mut loglik = T::zero();
    let mut score = vec![T::zero(); p];
    let mut info = SquareMatrix::zeros(p);
    let order = &data.order;
    let mut start = 0;
    while start < order.len() {
        // tied block: every member is at risk for every event in it
        let t = data.times[order[start]];
        let mut end = start;
        while end < order.len() && data.times[order[end]] == t {
            let i = order[end];
            let v = centred(i);
            let r = (eta[i] - shift).exp();
            s0 = s0 + r;
            for a in 0..p {
                s1[a] = s1[a] + r * v[a];
                if second {
                    for b in 0..p {
                        s2[(a, b)] = s2[(a, b)] + r * v[a] * v[b];
                    }
                }
            }
            end += 1;
        }
        for &i in &order[start..end] {
            if !data.events[i] {
                continue;
            }
            let v = centred(i);
            loglik = loglik + eta[i] - shift - s0.ln();
            for a in 0..p {
                score[a] = score[a] + v[a] - s1[a] / s0;
                if second {
                    for b in 0..p {
                        info[(a, b)] = info[(a, b)] + s2[(a, b)] / s0 - (s1[a] / s0) * (s1[b] / s0);
                    }
                }
            }
        }
        start = end;
    }
    Ok(Derivatives { loglik, score, information: info })
}

/// Standard Cox log partial likelihood with Breslow ties.
pub fn log_partial_likelihood<T: Scalar>(data: &CoxData<T>, beta: &[T]) -> Result<T> {
    Ok(derivatives(data, beta, false)?.loglik)
}

/// Gradient of [`log_partial_likelihood`].
pub fn score<T: Scalar>(data: &CoxData<T>, beta: &[T]) -> Result<Vec<T>> {
    Ok(derivatives(data, beta, false)?.score)
}

/// Negative Hessian of [`log_partial_likelihood`].
pub fn observed_information<T: Scalar>(data: &CoxData<T>, beta: &[T]) -> Result<SquareMatrix<T>> {
    Ok(derivatives(data, beta, true)?.information)
}

fn sup<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|x| x.abs()).fold(T::zero(), T::max)
}

/// Newton–Raphson with step halving, started at `init` (zero by default).
pub fn fit_cox<T: Scalar>(data: &CoxData<T>, init: Option<&[T]>, opts: &CoxOptions) -> Result<CoxFit<T>> {
    let p = data.p();
    let mut beta = match init {
        Some(b) if b.len() == p => b.to_vec(),
        Some(_) => return Err(Error::InvalidInput("initial β has the wrong length".into())),
        None => vec![T::zero(); p],
    };
    let tol = T::lit(opts.tol);
    let chol_tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    let mut cur = derivatives(data, &beta, true)?;
    if Cholesky::new(&cur.information, chol_tol).is_none() {
        return Err(Error::Collinear);
    }
    let mut iterations = 0;
    while sup(&cur.score) > tol {
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence(format!(
                "Cox fit: score norm {} after {} iterations",
                sup(&cur.score),
                iterations
            )));
        }
        iterations += 1;
        let chol = Cholesky::new(&cur.information, T::zero()).ok_or(Error::Collinear)?;
        let step = chol.solve(&cur.score);
        let mut scale = T::one();
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<T> = beta.iter().zip(&step).map(|(&b, &s)| b + scale * s).collect();
            let next = derivatives(data, &trial, true)?;
            let slack = T::lit(1e-12) * (T::one() + cur.loglik.abs());
            if next.loglik.is_finite()
                && next.loglik >= cur.loglik - slack
                && Cholesky::new(&next.information, T::zero()).is_some()
            {
                accepted = Some((trial, next));
                break;
            }
            scale = scale / T::lit(2.0);
        }
        let Some((trial, next)) = accepted else {
            return Err(Error::NoConvergence(format!(
                "Cox fit: no ascent step at iteration {iterations}, score norm {}",
                sup(&cur.score)
            )));
        };
        beta = trial;
        cur = next;
    }
    Ok(CoxFit {
        beta,
        score_norm: sup(&cur.score),
        observed_information: cur.information,
        log_likelihood: cur.loglik,
        iterations,
        converged: true,
        n_events: data.n_events(),
    })
}

/// Cox fit on the raw `(Y, δ, V)`, ignoring endogeneity.
pub fn naive_cox<T: Scalar>(data: &Dataset<T>, opts: &CoxOptions) -> Result<CoxFit<T>> {
    fit_cox(&CoxData::from_dataset(data)?, None, opts)
}
