//! Conditional product-limit (Beran) estimation of `F(t, z | x, w)`.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::scalar::Scalar;

/// Right-continuous nondecreasing step function on `[0, ∞)` starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCdf<T> {
    jump_times: Vec<T>,
    values: Vec<T>,
    upper_limit: T,
}

impl<T: Scalar> StepCdf<T> {
    /// `jump_times` strictly increasing, `values` nondecreasing in `[0, 1]`.
    pub fn new(jump_times: Vec<T>, values: Vec<T>, upper_limit: T) -> Result<Self> {
        if jump_times.len() != values.len() {
            return Err(Error::InvalidInput("jump times and values differ in length".into()));
        }
        if jump_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("jump times must be strictly increasing".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0])
            || values.iter().any(|&v| v < T::zero() || v > T::one())
        {
            return Err(Error::InvalidInput("values must be nondecreasing within [0, 1]".into()));
        }
        Ok(Self { jump_times, values, upper_limit })
    }

    pub fn zero(upper_limit: T) -> Self {
        Self { jump_times: Vec::new(), values: Vec::new(), upper_limit }
    }

    pub fn jump_times(&self) -> &[T] {
        &self.jump_times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn upper_limit(&self) -> T {
        self.upper_limit
    }

    pub fn with_upper_limit(mut self, upper_limit: T) -> Self {
        self.upper_limit = upper_limit;
        self
    }

    #[inline]
    pub fn eval(&self, t: T) -> T {
        let idx = self.jump_times.partition_point(|&s| s <= t);
        if idx == 0 {
            T::zero()
        } else {
            self.values[idx - 1]
        }
    }

    /// Value strictly before `t`.
    #[inline]
    pub fn eval_left(&self, t: T) -> T {
        let idx = self.jump_times.partition_point(|&s| s < t);
        if idx == 0 {
            T::zero()
        } else {
            self.values[idx - 1]
        }
    }

    /// Limit at `+∞`.
    pub fn total(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }

    /// `(time, mass)` of each jump.
    pub fn jumps(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.jump_times.iter().zip(&self.values).scan(T::zero(), |prev, (&t, &v)| {
            let d = v - *prev;
            *prev = v;
            Some((t, d))
        })
    }
}

/// Observation entering a product-limit computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedTime<T> {
    pub y: T,
    pub delta: bool,
    pub weight: T,
}

/// Sort order used by the product limit: nondecreasing `y`, events before
/// censored observations at tied times.
pub fn sort_for_product_limit<T: Scalar>(items: &mut [WeightedTime<T>]) {
    items.sort_by(|a, b| {
        a.y.partial_cmp(&b.y).expect("finite durations").then_with(|| b.delta.cmp(&a.delta))
    });
}

/// Weighted product-limit CDF over items already in product-limit order.
///
/// Each event multiplies the survival by `1 - b_j / R_j`, where `R_j` is the
/// weight still at risk. Processing tied events one at a time with the
/// at-risk weight reduced in between gives the usual `1 - d/R` factor per
/// distinct time. Weights need not be normalised.
pub fn product_limit<T: Scalar>(sorted: &[WeightedTime<T>], upper_limit: T) -> StepCdf<T> {
    let mut at_risk = vec![T::zero(); sorted.len() + 1];
    for i in (0..sorted.len()).rev() {
        at_risk[i] = at_risk[i + 1] + sorted[i].weight;
    }
    let mut survival = T::one();
    let mut times: Vec<T> = Vec::new();
    let mut values: Vec<T> = Vec::new();
    for (i, item) in sorted.iter().enumerate() {
        if !item.delta || item.weight <= T::zero() {
            continue;
        }
        let risk = at_risk[i];
        if risk <= T::zero() {
            // at-risk mass exhausted: freeze what remains
            break;
        }
        let factor = (T::one() - item.weight / risk).max(T::zero());
        survival = survival * factor;
        let value = (T::one() - survival).min(T::one()).max(T::zero());
        match times.last() {
            Some(&last) if last == item.y => *values.last_mut().expect("paired") = value,
            _ => {
                times.push(item.y);
                values.push(value);
            }
        }
    }
    // guard against rounding making the sequence dip
    for i in 1..values.len() {
        if values[i] < values[i - 1] {
            values[i] = values[i - 1];
        }
    }
    StepCdf { jump_times: times, values, upper_limit }
}

/// Nadaraya–Watson weights `B_h^{z,w}(x - X_k, Z_k, W_k)` over all rows.
pub fn nw_weights<T: Scalar>(
    data: &Dataset<T>,
    z: usize,
    w: usize,
    x: T,
    h: T,
    kernel: &KernelSpec<T>,
) -> Result<Vec<T>> {
    if !(h > T::zero()) {
        return Err(Error::InvalidInput("bandwidth must be positive".into()));
    }
    let raw: Vec<T> = data
        .observations()
        .iter()
        .map(|o| if o.z == z && o.w == w { kernel.eval((x - o.x) / h) } else { T::zero() })
        .collect();
    let total: T = raw.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::ZeroMass { x: x.as_f64() });
    }
    Ok(raw.into_iter().map(|k| k / total).collect())
}

/// Beran estimate of `F(t | z, x, w)`.
pub fn beran_cdf<T: Scalar>(
    data: &Dataset<T>,
    z: usize,
    w: usize,
    x: T,
    h: T,
    kernel: &KernelSpec<T>,
    upper_limit: T,
) -> Result<StepCdf<T>> {
    let weights = nw_weights(data, z, w, x, h, kernel)?;
    let mut items: Vec<WeightedTime<T>> = data
        .observations()
        .iter()
        .zip(weights)
        .filter(|(_, b)| *b > T::zero())
        .map(|(o, b)| WeightedTime { y: o.y, delta: o.delta, weight: b })
        .collect();
    sort_for_product_limit(&mut items);
    Ok(product_limit(&items, upper_limit))
}

/// Kernel estimate of `P(Z = z | X = x, W = w)`.
pub fn estimate_p<T: Scalar>(
    data: &Dataset<T>,
    z: usize,
    w: usize,
    x: T,
    h: T,
    kernel: &KernelSpec<T>,
) -> Result<T> {
    if !(h > T::zero()) {
        return Err(Error::InvalidInput("bandwidth must be positive".into()));
    }
    let (mut num, mut den) = (T::zero(), T::zero());
    for o in data.observations().iter().filter(|o| o.w == w) {
        let k = kernel.eval((x - o.x) / h);
        den = den + k;
        if o.z == z {
            num = num + k;
        }
    }
    if !(den > T::zero()) {
        return Err(Error::ZeroMass { x: x.as_f64() });
    }
    Ok((num / den).min(T::one()))
}

/// `p̂ · ∫ H((t - u)/ε) dF̃(u)`; the step function itself when `ε = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSubCdf<T> {
    base: StepCdf<T>,
    epsilon: T,
    kernel_tilde: KernelSpec<T>,
    scale: T,
}

impl<T: Scalar> SmoothSubCdf<T> {
    pub fn zero(upper_limit: T, kernel_tilde: KernelSpec<T>) -> Self {
        Self { base: StepCdf::zero(upper_limit), epsilon: T::zero(), kernel_tilde, scale: T::zero() }
    }

    pub fn base(&self) -> &StepCdf<T> {
        &self.base
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn kernel_tilde(&self) -> &KernelSpec<T> {
        &self.kernel_tilde
    }

    pub fn upper_limit(&self) -> T {
        self.base.upper_limit
    }

    pub fn is_step(&self) -> bool {
        self.epsilon == T::zero()
    }

    pub fn is_zero(&self) -> bool {
        self.scale == T::zero() || self.base.values.is_empty()
    }

    /// Values can only be trusted to be monotone for order-2 time kernels or `ε = 0`.
    pub fn is_monotone(&self) -> bool {
        self.is_step() || self.kernel_tilde.order() == 2
    }

    pub fn eval(&self, t: T) -> T {
        if self.is_zero() {
            return T::zero();
        }
        if self.is_step() {
            return self.scale * self.base.eval(t);
        }
        let eps = self.epsilon;
        // jumps at or below t - ε contribute fully
        let full = self.base.eval(t - eps);
        let lo = self.base.jump_times.partition_point(|&s| s <= t - eps);
        let hi = self.base.jump_times.partition_point(|&s| s < t + eps);
        let mut acc = full;
        let mut prev = if lo == 0 { T::zero() } else { self.base.values[lo - 1] };
        for j in lo..hi {
            let mass = self.base.values[j] - prev;
            prev = self.base.values[j];
            acc = acc + mass * self.kernel_tilde.integrated((t - self.base.jump_times[j]) / eps);
        }
        self.scale * acc
    }

    /// Left limit; equals `eval` when `ε > 0`.
    pub fn eval_left(&self, t: T) -> T {
        if self.is_step() {
            self.scale * self.base.eval_left(t)
        } else {
            self.eval(t)
        }
    }

    /// Time derivative for `ε > 0`; zero for step functions.
    pub fn density(&self, t: T) -> T {
        if self.is_step() || self.is_zero() {
            return T::zero();
        }
        let eps = self.epsilon;
        let lo = self.base.jump_times.partition_point(|&s| s <= t - eps);
        let hi = self.base.jump_times.partition_point(|&s| s < t + eps);
        let mut acc = T::zero();
        let mut prev = if lo == 0 { T::zero() } else { self.base.values[lo - 1] };
        for j in lo..hi {
            let mass = self.base.values[j] - prev;
            prev = self.base.values[j];
            acc = acc + mass * self.kernel_tilde.eval((t - self.base.jump_times[j]) / eps);
        }
        self.scale * acc / eps
    }

    /// `(t, value)` pairs for plotting: the jump corners of a step function, or
    /// an even grid on `[0, T̄]` for smoothed ones.
    pub fn points(&self, grid: usize) -> Vec<(T, T)> {
        if self.is_step() {
            let mut pts = vec![(T::zero(), self.eval(T::zero()))];
            for &t in &self.base.jump_times {
                pts.push((t, self.scale * self.base.eval_left(t)));
                pts.push((t, self.eval(t)));
            }
            pts.push((self.upper_limit(), self.eval(self.upper_limit())));
            pts
        } else {
            let g = grid.max(2);
            (0..g)
                .map(|i| {
                    let t = self.upper_limit() * T::from_count(i) / T::from_count(g - 1);
                    (t, self.eval(t))
                })
                .collect()
        }
    }
}

pub fn smooth_cdf<T: Scalar>(
    step: StepCdf<T>,
    p_hat: T,
    epsilon: T,
    kernel_tilde: &KernelSpec<T>,
) -> SmoothSubCdf<T> {
    SmoothSubCdf {
        base: step,
        epsilon: epsilon.max(T::zero()),
        kernel_tilde: kernel_tilde.clone(),
        scale: p_hat.max(T::zero()).min(T::one()),
    }
}

/// Result of a pseudo-inverse query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inverse<T> {
    pub time: T,
    /// `u` exceeds the value reached at `T̄`; `time` is then `T̄`.
    pub saturated: bool,
}

/// `inf { t ∈ [0, T̄] : f(t) ≥ u }`.
pub fn invert_subcdf<T: Scalar>(f: &SmoothSubCdf<T>, u: T) -> Inverse<T> {
    let tbar = f.upper_limit();
    let saturated = Inverse { time: tbar, saturated: true };
    if u <= T::zero() {
        return Inverse { time: T::zero(), saturated: false };
    }
    if f.is_zero() {
        return saturated;
    }
    if f.is_step() {
        let values = &f.base.values;
        let idx = values.partition_point(|&v| f.scale * v < u);
        return match f.base.jump_times.get(idx) {
            Some(&t) if t <= tbar => Inverse { time: t.max(T::zero()), saturated: false },
            _ => saturated,
        };
    }
    if f.eval(tbar) < u {
        return saturated;
    }
    if f.eval(T::zero()) >= u {
        return Inverse { time: T::zero(), saturated: false };
    }
    let (mut lo, mut hi) = if f.is_monotone() {
        (T::zero(), tbar)
    } else {
        // first grid cell where the value crosses u
        let steps = 2048;
        let mut prev = T::zero();
        let mut bracket = (T::zero(), tbar);
        for i in 1..=steps {
            let t = tbar * T::from_count(i) / T::from_count(steps);
            if f.eval(t) >= u {
                bracket = (prev, t);
                break;
            }
            prev = t;
        }
        bracket
    };
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if f.eval(mid) >= u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Inverse { time: hi, saturated: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;

    fn single_cell(ys: &[f64], deltas: &[bool]) -> Dataset<f64> {
        let obs = ys
            .iter()
            .zip(deltas)
            .map(|(&y, &delta)| Observation { y, delta, z: 0, x: 0.0, w: 0 })
            .collect();
        Dataset::<f64>::binary(obs).unwrap()
    }

    #[test]
    fn uniform_weights_when_bandwidth_covers_everything() {
        let d = single_cell(&[1.0, 2.0, 3.0, 4.0], &[true; 4]);
        let d = d.map_covariate(|_| 0.0);
        let w = nw_weights(&d, 0, 0, 0.0, 10.0, &KernelSpec::<f64>::epanechnikov()).unwrap();
        for wi in w {
            assert!((wi - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_at_zero_and_half_bandwidth() {
        let obs = vec![
            Observation { y: 1.0, delta: true, z: 0, x: 0.0, w: 0 },
            Observation { y: 1.0, delta: true, z: 0, x: 0.5, w: 0 },
            Observation { y: 1.0, delta: true, z: 1, x: 0.0, w: 0 },
        ];
        let d = Dataset::<f64>::binary(obs).unwrap();
        let w = nw_weights(&d, 0, 0, 0.0, 1.0, &KernelSpec::<f64>::epanechnikov()).unwrap();
        // 0.75 : 0.5625
        assert!((w[0] - 0.75 / 1.3125).abs() < 1e-15);
        assert!((w[1] - 0.5625 / 1.3125).abs() < 1e-15);
        assert_eq!(w[2], 0.0);
        assert!((w[0] - 0.571_428_571_428_571_4).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_outside_windows() {
        let d = single_cell(&[1.0], &[true]);
        let err = nw_weights(&d, 0, 0, 5.0, 0.5, &KernelSpec::<f64>::epanechnikov()).unwrap_err();
        assert!(matches!(err, Error::ZeroMass { .. }));
    }

    #[test]
    fn empirical_cdf_without_censoring() {
        let d = single_cell(&[1.0, 2.0, 3.0], &[true, true, true]);
        let f = beran_cdf(&d, 0, 0, 0.0, 1.0, &KernelSpec::<f64>::epanechnikov(), 3.0).unwrap();
        assert!((f.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((f.eval(1.999) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kaplan_meier_with_censoring() {
        let d = single_cell(&[1.0, 2.0, 3.0], &[true, false, true]);
        let f = beran_cdf(&d, 0, 0, 0.0, 1.0, &KernelSpec::<f64>::epanechnikov(), 3.0).unwrap();
        assert!((f.eval(1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.eval(2.5) - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.eval(3.0) - 1.0).abs() < 1e-15);
        assert_eq!(f.jump_times(), &[1.0, 3.0]);
    }

    #[test]
    fn all_censored_is_identically_zero() {
        let d = single_cell(&[1.0, 2.0], &[false, false]);
        let f = beran_cdf(&d, 0, 0, 0.0, 1.0, &KernelSpec::<f64>::epanechnikov(), 3.0).unwrap();
        assert_eq!(f.total(), 0.0);
        assert!(f.jump_times().is_empty());
    }

    #[test]
    fn ties_give_standard_product_limit_factor() {
        // two events and one censoring at t = 1 among 4 at risk: 1 - 2/4
        let d = single_cell(&[1.0, 1.0, 1.0, 2.0], &[true, false, true, true]);
        let f = beran_cdf(&d, 0, 0, 0.0, 1.0, &KernelSpec::<f64>::epanechnikov(), 3.0).unwrap();
        assert!((f.eval(1.0) - 0.5).abs() < 1e-15);
        assert!((f.eval(2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn treatment_probability() {
        let mut obs = vec![];
        for z in [0, 0, 0, 1] {
            obs.push(Observation { y: 1.0, delta: true, z, x: 0.0, w: 1 });
        }
        obs.push(Observation { y: 1.0, delta: true, z: 1, x: 0.0, w: 0 });
        let d = Dataset::<f64>::binary(obs).unwrap();
        let k = KernelSpec::<f64>::epanechnikov();
        assert!((estimate_p(&d, 0, 1, 0.0, 1.0, &k).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(estimate_p(&d, 1, 0, 0.0, 1.0, &k).unwrap(), 1.0);
        assert_eq!(estimate_p(&d, 0, 0, 0.0, 1.0, &k).unwrap(), 0.0);
        assert!(matches!(estimate_p(&d, 0, 0, 9.0, 1.0, &k), Err(Error::ZeroMass { .. })));
    }

    #[test]
    fn smoothing_cases() {
        let k = KernelSpec::<f64>::epanechnikov();
        let step = StepCdf::new(vec![1.0], vec![1.0], 5.0).unwrap();
        let s = smooth_cdf(step.clone(), 1.0, 0.0, &k);
        assert_eq!(s.eval(0.99), 0.0);
        assert_eq!(s.eval(1.0), 1.0);
        let s = smooth_cdf(step.clone(), 1.0, 0.5, &k);
        assert!((s.eval(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(s.eval(1.5), 1.0);
        let s = smooth_cdf(step, 0.4, 0.5, &k);
        assert!((s.eval(3.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn pseudo_inverse_of_step() {
        let k = KernelSpec::<f64>::epanechnikov();
        let step = StepCdf::new(vec![1.0, 2.0], vec![0.4, 0.8], 3.0).unwrap();
        let f = smooth_cdf(step, 1.0, 0.0, &k);
        assert_eq!(invert_subcdf(&f, 0.0), Inverse { time: 0.0, saturated: false });
        assert_eq!(invert_subcdf(&f, 0.4), Inverse { time: 1.0, saturated: false });
        assert_eq!(invert_subcdf(&f, 0.5), Inverse { time: 2.0, saturated: false });
        assert_eq!(invert_subcdf(&f, 0.9), Inverse { time: 3.0, saturated: true });
    }

    #[test]
    fn pseudo_inverse_respects_upper_limit() {
        let k = KernelSpec::<f64>::epanechnikov();
        let step = StepCdf::new(vec![1.0, 2.0], vec![0.4, 0.8], 1.5).unwrap();
        let f = smooth_cdf(step, 1.0, 0.0, &k);
        assert_eq!(invert_subcdf(&f, 0.5), Inverse { time: 1.5, saturated: true });
    }

    #[test]
    fn pseudo_inverse_of_smoothed() {
        let k = KernelSpec::<f64>::epanechnikov();
        let step = StepCdf::new(vec![1.0, 2.0], vec![0.4, 0.8], 4.0).unwrap();
        let f = smooth_cdf(step, 1.0, 0.3, &k);
        for u in [0.1, 0.2, 0.4, 0.6, 0.79] {
            let inv = invert_subcdf(&f, u);
            assert!(!inv.saturated);
            assert!(f.eval(inv.time) >= u - 1e-12);
            assert!(f.eval(inv.time - 1e-9) < u);
        }
        let o4 = KernelSpec::<f64>::constructed_order4();
        let f = smooth_cdf(StepCdf::new(vec![1.0, 2.0], vec![0.4, 0.8], 4.0).unwrap(), 1.0, 0.3, &o4);
        let inv = invert_subcdf(&f, 0.5);
        assert!(f.eval(inv.time) >= 0.5 - 1e-12);
    }

    #[test]
    fn density_matches_finite_difference() {
        let k = KernelSpec::<f64>::epanechnikov();
        let step = StepCdf::new(vec![1.0, 1.2, 2.0], vec![0.3, 0.5, 0.9], 4.0).unwrap();
        let f = smooth_cdf(step, 0.7, 0.4, &k);
        for t in [0.8, 1.1, 1.5, 2.2] {
            let fd = (f.eval(t + 1e-6) - f.eval(t - 1e-6)) / 2e-6;
            assert!((fd - f.density(t)).abs() < 1e-6);
        }
    }
}
