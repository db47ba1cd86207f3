//! Minimum-residual solver for `A(θ)(u) = 0` without a triangular structure.
//!
//! Each start first runs projected Levenberg–Marquardt with a trust region on
//! `[0, T̄]^L`, using the piecewise-linear interpolant through the jump
//! corners of every entry. The interpolant has a usable slope wherever the
//! estimate still has mass to place, which the exact Jacobian lacks (step
//! bundles are flat almost everywhere, smoothed ones outside the kernel
//! windows). The result is snapped onto jump times of the unsmoothed
//! estimates and polished by coordinate descent on the generalized residual,
//! which is zero exactly when `u` lies between `Σ F̂(θ_l⁻)` and `Σ F̂(θ_l)` in
//! every row. Smoothed bundles (`ε > 0`) are finally refined on the exact
//! functions with the analytic Jacobian `∂A_k/∂θ_l = f̂(θ_l, z_l | x, w_k)`;
//! when that stalls on a flat stretch, a coordinate sweep with a global
//! one-dimensional search over the kernel windows moves the stuck level and
//! the joint refinement is repeated.

use rand::seq::SliceRandom;
use rand::Rng;

use super::stage::CellCdfBundle;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SquareMatrix};
use crate::rng::{purpose, stream_rng};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralOptions {
    /// Number of starting points; the first is the warm start (or zero).
    pub restarts: usize,
    pub max_iter: usize,
    /// Residual sup-norm at which a start counts as converged.
    pub tol: f64,
    /// Seed for the Latin-hypercube restarts.
    pub seed: u64,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        Self { restarts: 8, max_iter: 200, tol: 1e-10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralSolution<T> {
    /// Natural level indexing.
    pub theta: Vec<T>,
    /// Euclidean norm of the (generalized, for step bundles) residual.
    pub residual_norm: T,
    /// `JᵀJ` at the solution is numerically singular.
    pub rank_deficient: bool,
    pub iterations: usize,
    pub converged_restarts: usize,
}

/// Piecewise-linear interpolant through `(t, v)` knots, flat after the last one.
struct Curve<T> {
    t: Vec<T>,
    v: Vec<T>,
}

struct Problem<'a, T> {
    bundle: &'a CellCdfBundle<T>,
    u: T,
    /// `[z][w]`
    curves: Vec<Vec<Curve<T>>>,
    stepwise: bool,
    /// Evaluate the exact entries instead of the interpolants.
    exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stop {
    Converged,
    Stalled,
    MaxIter,
}

impl<'a, T: Scalar> Problem<'a, T> {
    fn new(bundle: &'a CellCdfBundle<T>, u: T) -> Self {
        let l = bundle.levels();
        let stepwise = bundle.is_stepwise();
        let curves = (0..l)
            .map(|z| {
                (0..l)
                    .map(|w| {
                        let e = bundle.entry(z, w);
                        let mut t = vec![T::zero()];
                        let mut v = vec![T::zero()];
                        if !e.is_zero() {
                            for (&s, &f) in e.base().jump_times().iter().zip(e.base().values()) {
                                let val = e.scale() * f;
                                if s <= *t.last().expect("nonempty") {
                                    *v.last_mut().expect("nonempty") = val;
                                } else {
                                    t.push(s);
                                    v.push(val);
                                }
                            }
                        }
                        Curve { t, v }
                    })
                    .collect()
            })
            .collect();
        Self { bundle, u, curves, stepwise, exact: false }
    }

    fn levels(&self) -> usize {
        self.bundle.levels()
    }

    fn value_slope(&self, z: usize, w: usize, t: T) -> (T, T) {
        if self.exact {
            let e = self.bundle.entry(z, w);
            return (e.eval(t), e.density(t));
        }
        let Curve { t: ts, v } = &self.curves[z][w];
        let idx = ts.partition_point(|&s| s <= t);
        if idx == 0 {
            return (T::zero(), T::zero());
        }
        if idx == ts.len() {
            return (v[idx - 1], T::zero());
        }
        let slope = (v[idx] - v[idx - 1]) / (ts[idx] - ts[idx - 1]);
        (v[idx - 1] + slope * (t - ts[idx - 1]), slope)
    }

    fn residual(&self, theta: &[T]) -> Vec<T> {
        let l = self.levels();
        (0..l)
            .map(|w| (0..l).map(|z| self.value_slope(z, w, theta[z]).0).sum::<T>() - self.u)
            .collect()
    }

    /// `J[w][z] = ∂r_w / ∂θ_z`.
    fn jacobian(&self, theta: &[T]) -> SquareMatrix<T> {
        let l = self.levels();
        let mut j = SquareMatrix::zeros(l);
        for w in 0..l {
            for z in 0..l {
                j[(w, z)] = self.value_slope(z, w, theta[z]).1;
            }
        }
        j
    }

    fn clamp(&self, theta: &mut [T]) {
        let tbar = self.bundle.tbar();
        theta.iter_mut().for_each(|t| *t = t.max(T::zero()).min(tbar));
    }

    fn levenberg_marquardt(&self, start: &[T], radius: T, opts: &GeneralOptions) -> (Vec<T>, usize, Stop) {
        let l = self.levels();
        let tol = T::lit(opts.tol);
        let mut theta = start.to_vec();
        self.clamp(&mut theta);
        let mut r = self.residual(&theta);
        let mut cost = half_sq(&r);
        let mut mu = T::lit(1e-3);
        let mut radius = radius;
        let step_floor = T::lit(1e-15) * (T::one() + self.bundle.tbar());
        for it in 0..opts.max_iter {
            if sup(&r) <= tol {
                return (theta, it, Stop::Converged);
            }
            let j = self.jacobian(&theta);
            let mut g = vec![T::zero(); l];
            let mut h = SquareMatrix::zeros(l);
            for a in 0..l {
                for w in 0..l {
                    g[a] = g[a] + j[(w, a)] * r[w];
                }
                for b in 0..l {
                    h[(a, b)] = (0..l).map(|w| j[(w, a)] * j[(w, b)]).sum();
                }
            }
            let trace = (0..l).map(|a| h[(a, a)]).sum::<T>() / T::from_count(l);
            let ridge = if trace > T::zero() { trace } else { T::one() };
            loop {
                let mut damped = h.clone();
                for a in 0..l {
                    damped[(a, a)] = damped[(a, a)] + mu * (h[(a, a)] + ridge * T::lit(1e-6));
                }
                let Some(chol) = Cholesky::new(&damped, T::zero()) else {
                    mu = mu * T::lit(4.0);
                    if mu > T::lit(1e12) {
                        return (theta, it, Stop::Stalled);
                    }
                    continue;
                };
                let mut delta = chol.solve(&g);
                let longest = sup(&delta);
                if longest > radius {
                    delta.iter_mut().for_each(|d| *d = *d * radius / longest);
                }
                let mut next: Vec<T> = theta.iter().zip(&delta).map(|(&t, &d)| t - d).collect();
                self.clamp(&mut next);
                let moved = theta.iter().zip(&next).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max);
                if moved <= step_floor {
                    return (theta, it, Stop::Stalled);
                }
                let rn = self.residual(&next);
                let cn = half_sq(&rn);
                if cn < cost {
                    theta = next;
                    r = rn;
                    cost = cn;
                    mu = (mu / T::lit(3.0)).max(T::lit(1e-12));
                    radius = (radius * T::lit(2.0)).min(self.bundle.tbar());
                    break;
                }
                mu = mu * T::lit(2.0);
                radius = radius / T::lit(2.0);
                if mu > T::lit(1e12) || radius <= step_floor {
                    return (theta, it, Stop::Stalled);
                }
            }
        }
        let stop = if sup(&r) <= tol { Stop::Converged } else { Stop::MaxIter };
        (theta, opts.max_iter, stop)
    }

    /// Gauss–Seidel sweeps; each level moves to the best of `points[z]` and is
    /// then refined by golden section between the neighbouring points.
    fn coordinate_sweeps(&self, mut theta: Vec<T>, points: &[Vec<T>], tol: T) -> Vec<T> {
        let l = self.levels();
        let cost = |th: &[T]| half_sq(&self.residual(th));
        let mut current = cost(&theta);
        for _sweep in 0..20 {
            let before = current;
            for z in 0..l {
                let pts = &points[z];
                let mut trial = theta.clone();
                let mut best = (current, theta[z], None);
                for (i, &p) in pts.iter().enumerate() {
                    trial[z] = p;
                    let c = cost(&trial);
                    if c < best.0 {
                        best = (c, p, Some(i));
                    }
                }
                if let Some(i) = best.2 {
                    let lo = if i == 0 { pts[0] } else { pts[i - 1] };
                    let hi = pts.get(i + 1).copied().unwrap_or(pts[i]);
                    let f = |t: T| {
                        let mut th = theta.clone();
                        th[z] = t;
                        cost(&th)
                    };
                    let (t, c) = golden_section(f, lo, hi, best.1, best.0);
                    theta[z] = t;
                    current = c;
                }
            }
            if current <= tol * tol || current >= before {
                break;
            }
        }
        theta
    }

    fn rank_deficient(&self, theta: &[T]) -> bool {
        let l = self.levels();
        let j = self.jacobian(theta);
        let mut h = SquareMatrix::zeros(l);
        for a in 0..l {
            for b in 0..l {
                h[(a, b)] = (0..l).map(|w| j[(w, a)] * j[(w, b)]).sum();
            }
        }
        let rel = T::lit(1e-10).max(T::epsilon() * T::lit(64.0));
        match Cholesky::new(&h, rel) {
            Some(c) => c.pivot_ratio() < rel,
            None => true,
        }
    }
}

fn half_sq<T: Scalar>(r: &[T]) -> T {
    r.iter().map(|&v| v * v).sum::<T>() / T::lit(2.0)
}

fn sup<T: Scalar>(r: &[T]) -> T {
    r.iter().map(|v| v.abs()).fold(T::zero(), T::max)
}

/// Candidate times and the left/right values of every unsmoothed entry at
/// them, per level.
struct StepTable<T> {
    /// `[z][m]`
    times: Vec<Vec<T>>,
    /// `[z][m][w]`
    hi: Vec<Vec<Vec<T>>>,
    lo: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> StepTable<T> {
    fn new(bundle: &CellCdfBundle<T>) -> Self {
        let l = bundle.levels();
        let tbar = bundle.tbar();
        let mut times = Vec::with_capacity(l);
        let mut hi = Vec::with_capacity(l);
        let mut lo = Vec::with_capacity(l);
        for z in 0..l {
            let mut ts = vec![T::zero()];
            for w in 0..l {
                let e = bundle.entry(z, w);
                if !e.is_zero() {
                    ts.extend(e.base().jump_times().iter().copied().filter(|&t| t >= T::zero() && t <= tbar));
                }
            }
            ts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            ts.dedup();
            let right = |t: T, w: usize| {
                let e = bundle.entry(z, w);
                e.scale() * e.base().eval(t)
            };
            let left = |t: T, w: usize| {
                let e = bundle.entry(z, w);
                e.scale() * e.base().eval_left(t)
            };
            hi.push(ts.iter().map(|&t| (0..l).map(|w| right(t, w)).collect()).collect());
            lo.push(ts.iter().map(|&t| (0..l).map(|w| left(t, w)).collect()).collect());
            times.push(ts);
        }
        Self { times, hi, lo }
    }

    fn snap(&self, z: usize, t: T, slack: T) -> usize {
        let ts = &self.times[z];
        ts.partition_point(|&c| c < t - slack).min(ts.len() - 1)
    }

    /// Row sums over all levels except `skip`, accumulated in level order.
    fn partial_rows(&self, idx: &[usize], skip: Option<usize>) -> (Vec<T>, Vec<T>) {
        let l = idx.len();
        let mut hi = vec![T::zero(); l];
        let mut lo = vec![T::zero(); l];
        for z in (0..l).filter(|&z| Some(z) != skip) {
            for w in 0..l {
                hi[w] = hi[w] + self.hi[z][idx[z]][w];
                lo[w] = lo[w] + self.lo[z][idx[z]][w];
            }
        }
        (hi, lo)
    }

    fn generalized(&self, hi: &[T], lo: &[T], u: T) -> Vec<T> {
        hi.iter()
            .zip(lo)
            .map(|(&h, &l)| {
                if l - u > T::zero() {
                    l - u
                } else if h - u < T::zero() {
                    h - u
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    fn objective_with(&self, base: &(Vec<T>, Vec<T>), z: usize, m: usize, u: T) -> T {
        let hi: Vec<T> = base.0.iter().zip(&self.hi[z][m]).map(|(&a, &b)| a + b).collect();
        let lo: Vec<T> = base.1.iter().zip(&self.lo[z][m]).map(|(&a, &b)| a + b).collect();
        self.generalized(&hi, &lo, u).iter().map(|&r| r * r).sum()
    }

    fn residual(&self, idx: &[usize], u: T) -> Vec<T> {
        let (hi, lo) = self.partial_rows(idx, None);
        self.generalized(&hi, &lo, u)
    }

    /// Coordinate descent over candidate indices; ties go to the earlier time.
    fn polish(&self, idx: Vec<usize>, u: T) -> Vec<usize> {
        let all = vec![true; idx.len()];
        self.polish_over(idx, u, &all)
    }

    /// As [`Self::polish`], moving only the levels from `first` on.
    fn polish_from(&self, idx: Vec<usize>, u: T, first: usize) -> Vec<usize> {
        let movable: Vec<bool> = (0..idx.len()).map(|z| z >= first).collect();
        self.polish_over(idx, u, &movable)
    }

    fn polish_over(&self, mut idx: Vec<usize>, u: T, movable: &[bool]) -> Vec<usize> {
        let l = idx.len();
        for _sweep in 0..1000 {
            let mut changed = false;
            for z in (0..l).filter(|&z| movable[z]) {
                let base = self.partial_rows(&idx, Some(z));
                let current = self.objective_with(&base, z, idx[z], u);
                let mut best = (current, idx[z]);
                for m in 0..self.times[z].len() {
                    let obj = self.objective_with(&base, z, m, u);
                    if obj < best.0 || (obj == best.0 && m < best.1) {
                        best = (obj, m);
                    }
                }
                if best.1 != idx[z] {
                    idx[z] = best.1;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        idx
    }

    fn objective(&self, idx: &[usize], u: T) -> T {
        self.residual(idx, u).iter().map(|&r| r * r).sum()
    }

    /// States reached by pushing one level until an unsatisfied row holds,
    /// paired with the pushed level.
    fn pushes(&self, idx: &[usize], u: T) -> Vec<(usize, Vec<usize>)> {
        let l = idx.len();
        let res = self.residual(idx, u);
        let mut out = Vec::new();
        for k in (0..l).filter(|&k| res[k] != T::zero()) {
            for z in 0..l {
                let last = self.times[z].len() - 1;
                if self.hi[z][last][k] == T::zero() {
                    continue;
                }
                let mut trial = idx.to_vec();
                let row = |t: &[usize]| self.residual(t, u)[k];
                if res[k] > T::zero() {
                    while trial[z] > 0 && row(&trial) > T::zero() {
                        trial[z] -= 1;
                    }
                } else {
                    while trial[z] < last && row(&trial) < T::zero() {
                        trial[z] += 1;
                    }
                }
                if trial[z] != idx[z] {
                    out.push((z, trial));
                }
            }
        }
        out
    }

    /// Re-polishes around a pushed level, then everything.
    fn settle(&self, idx: Vec<usize>, pushed: usize, u: T) -> (T, Vec<usize>) {
        let others: Vec<bool> = (0..idx.len()).map(|j| j != pushed).collect();
        let idx = self.polish(self.polish_over(idx, u, &others), u);
        (self.objective(&idx, u), idx)
    }

    /// Escapes points where coordinate descent stalls because a row can only
    /// be fixed by moving several levels together. Tries single pushes first
    /// and longer chains of pushes only when no shorter one lowers the
    /// objective.
    fn repair(&self, mut idx: Vec<usize>, u: T) -> Vec<usize> {
        let l = idx.len();
        let mut obj = self.objective(&idx, u);
        for _round in 0..(10 * l * l) {
            if obj == T::zero() {
                break;
            }
            let mut frontier = vec![(0, idx.clone())];
            let mut best = None;
            for _depth in 0..l.min(MAX_PUSH_CHAIN) {
                frontier = frontier.iter().flat_map(|(_, t)| self.pushes(t, u)).collect();
                best = lowest(frontier.iter().map(|(z, t)| self.settle(t.clone(), *z, u)), obj);
                if best.is_some() || frontier.is_empty() {
                    break;
                }
            }
            match best {
                Some((o, t)) => {
                    obj = o;
                    idx = t;
                }
                None => break,
            }
        }
        idx
    }

    fn is_exact(&self, idx: &[usize], u: T) -> bool {
        self.residual(idx, u).iter().all(|&r| r == T::zero())
    }

    /// Step equations can hold on a whole box of `θ`. Walks an exact solution
    /// down to the lexicographically smallest one reachable by lowering one
    /// level at a time and re-polishing the levels after it.
    fn descend(&self, mut idx: Vec<usize>, u: T) -> Vec<usize> {
        for z in 0..idx.len() {
            while idx[z] > 0 {
                let mut trial = idx.clone();
                trial[z] -= 1;
                let trial = self.polish_from(trial, u, z + 1);
                if !self.is_exact(&trial, u) {
                    break;
                }
                idx = trial;
            }
        }
        idx
    }
}

/// Longest chain of pushes tried by the step-system repair.
const MAX_PUSH_CHAIN: usize = 3;

/// The candidate with the smallest objective below `bound`, earliest first on ties.
fn lowest<T: Scalar>(candidates: impl Iterator<Item = (T, Vec<usize>)>, bound: T) -> Option<(T, Vec<usize>)> {
    candidates.filter(|(o, _)| *o < bound).fold(None, |best, (o, t)| match best {
        Some((b, _)) if b <= o => best,
        _ => Some((o, t)),
    })
}

/// Minimum-norm solution of `A(θ)(u) = 0` over `[0, T̄]^L`.
///
/// Among starts reaching the same residual the lexicographically smallest
/// `θ` wins, so repeated calls return the same point.
pub fn solve_general<T: Scalar>(
    bundle: &CellCdfBundle<T>,
    u: T,
    opts: &GeneralOptions,
    warm: Option<&[T]>,
) -> Result<GeneralSolution<T>> {
    let l = bundle.levels();
    if let Some(w) = warm {
        if w.len() != l {
            return Err(Error::InvalidInput("warm start has the wrong length".into()));
        }
    }
    if !(u >= T::zero() && u < T::one()) {
        return Err(Error::InvalidInput("u must lie in [0, 1)".into()));
    }
    let mut problem = Problem::new(bundle, u);
    let mut exact = Problem::new(bundle, u);
    exact.exact = true;
    let table = StepTable::new(bundle);
    let tbar = bundle.tbar();
    let refine_radius = (tbar / T::lit(64.0)).max(T::lit(2.0) * max_epsilon(bundle));
    let windows = if problem.stepwise { Vec::new() } else { window_points(bundle, &table) };
    let starts = latin_starts(l, opts.restarts.max(1), tbar, warm, opts.seed);
    let tol = T::lit(opts.tol);
    let slack = T::lit(1e-12) * (T::one() + tbar);

    let mut best: Option<(T, Vec<T>)> = None;
    let mut iterations = 0;
    let mut converged = 0;
    let mut exhausted = 0;
    for start in &starts {
        let (theta, iters, mut stop) = problem.levenberg_marquardt(start, tbar / T::lit(4.0), opts);
        iterations += iters;
        let snapped: Vec<usize> = (0..l).map(|z| table.snap(z, theta[z], slack)).collect();
        let mut idx = table.repair(table.polish(snapped, u), u);
        if problem.stepwise && table.is_exact(&idx, u) {
            idx = table.descend(idx, u);
        }
        let theta: Vec<T> = (0..l).map(|z| table.times[z][idx[z]]).collect();
        let (theta, residual) = if problem.stepwise {
            (theta, table.residual(&idx, u))
        } else {
            let (mut refined, more, mut refined_stop) = exact.levenberg_marquardt(&theta, refine_radius, opts);
            iterations += more;
            if sup(&exact.residual(&refined)) > tol {
                let swept = exact.coordinate_sweeps(refined, &windows, tol);
                let (again, more, again_stop) = exact.levenberg_marquardt(&swept, refine_radius, opts);
                iterations += more;
                refined = again;
                refined_stop = again_stop;
            }
            stop = refined_stop;
            let r = exact.residual(&refined);
            (refined, r)
        };
        if sup(&residual) <= tol {
            converged += 1;
        } else if stop == Stop::MaxIter {
            exhausted += 1;
        }
        let obj = residual.iter().map(|&r| r * r).sum::<T>();
        let better = match &best {
            None => true,
            Some((b, t)) => {
                let close = (obj - *b).abs() <= tol * tol;
                (!close && obj < *b) || (close && lexicographically_less(&theta, t))
            }
        };
        if better {
            best = Some((obj, theta));
        }
    }
    if converged == 0 && exhausted == starts.len() {
        return Err(Error::NoConvergence(format!(
            "no start reached a stationary point within {} iterations",
            opts.max_iter
        )));
    }
    let (obj, theta) = best.expect("at least one start");
    problem.exact = !problem.stepwise;
    let rank_deficient = problem.rank_deficient(&theta);
    Ok(GeneralSolution { theta, residual_norm: obj.sqrt(), rank_deficient, iterations, converged_restarts: converged })
}

/// Minimizes `f` on `[lo, hi]`, never returning worse than `(x0, f0)`.
fn golden_section<T: Scalar>(f: impl Fn(T) -> T, mut lo: T, mut hi: T, x0: T, f0: T) -> (T, T) {
    let ratio = T::lit(0.618_033_988_749_894_8);
    let mut best = (x0, f0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..80 {
        if fa < best.1 {
            best = (a, fa);
        }
        if fb < best.1 {
            best = (b, fb);
        }
        if hi - lo <= T::epsilon() * (T::one() + hi.abs()) {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    best
}

/// Per level: points spread across every kernel window, plus `0` and `T̄`.
fn window_points<T: Scalar>(bundle: &CellCdfBundle<T>, table: &StepTable<T>) -> Vec<Vec<T>> {
    let eps = max_epsilon(bundle);
    let tbar = bundle.tbar();
    table
        .times
        .iter()
        .map(|ts| {
            let mut pts = vec![T::zero(), tbar];
            for &t in ts {
                for s in -4..=4 {
                    let p = t + eps * T::lit(s as f64 / 4.0);
                    if p >= T::zero() && p <= tbar {
                        pts.push(p);
                    }
                }
            }
            pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            pts.dedup();
            pts
        })
        .collect()
}

fn max_epsilon<T: Scalar>(bundle: &CellCdfBundle<T>) -> T {
    let l = bundle.levels();
    (0..l).flat_map(|z| (0..l).map(move |w| bundle.entry(z, w).epsilon())).fold(T::zero(), T::max)
}

fn lexicographically_less<T: Scalar>(a: &[T], b: &[T]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

fn latin_starts<T: Scalar>(l: usize, count: usize, tbar: T, warm: Option<&[T]>, seed: u64) -> Vec<Vec<T>> {
    let mut starts = vec![warm.map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); l])];
    let extra = count - 1;
    if extra == 0 {
        return starts;
    }
    let mut rng = stream_rng(seed, purpose::RESTARTS);
    let strata: Vec<Vec<usize>> = (0..l)
        .map(|_| {
            let mut s: Vec<usize> = (0..extra).collect();
            s.shuffle(&mut rng);
            s
        })
        .collect();
    for i in 0..extra {
        let point = (0..l)
            .map(|z| {
                let jitter: f64 = rng.random();
                tbar * T::lit((strata[z][i] as f64 + jitter) / extra as f64)
            })
            .collect();
        starts.push(point);
    }
    starts
}
