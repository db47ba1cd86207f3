use super::order::LevelOrder;
use super::stage::CellCdfBundle;
use crate::beran::invert_subcdf;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `A(θ)(u)_k = Σ_l F̂(θ_l, z_l | x, w_k) - u` in natural level indexing.
pub fn eval_a<T: Scalar>(theta: &[T], bundle: &CellCdfBundle<T>, u: T) -> Vec<T> {
    let l = bundle.levels();
    (0..l)
        .map(|k| (0..l).map(|z| bundle.entry(z, k).eval(theta[z])).sum::<T>() - u)
        .collect()
}

/// Triangular solve that keeps going as far as it can.
///
/// Returns the solved positions (natural level indexing, `None` past the
/// first saturated position) and the first saturated treatment level.
pub fn solve_triangular_partial<T: Scalar>(
    bundle: &CellCdfBundle<T>,
    order: &LevelOrder,
    u: T,
) -> (Vec<Option<T>>, Option<usize>) {
    let l = bundle.levels();
    let mut theta = vec![None; l];
    for k in 0..l {
        let (zk, wk) = (order.z[k], order.w[k]);
        let already: T = order.z[..k]
            .iter()
            .map(|&z| bundle.entry(z, wk).eval(theta[z].expect("solved")))
            .sum();
        let target = u - already;
        if target <= T::zero() {
            theta[zk] = Some(T::zero());
            continue;
        }
        let inv = invert_subcdf(bundle.entry(zk, wk), target);
        if inv.saturated {
            return (theta, Some(zk));
        }
        theta[zk] = Some(inv.time);
    }
    (theta, None)
}

/// Closed-form solution of `A(θ)(u) = 0` when the level order makes the
/// system triangular.
pub fn solve_triangular<T: Scalar>(bundle: &CellCdfBundle<T>, order: &LevelOrder, u: T) -> Result<Vec<T>> {
    if order.levels() != bundle.levels() {
        return Err(Error::InvalidInput("level order does not match the bundle".into()));
    }
    match solve_triangular_partial(bundle, order, u) {
        (theta, None) => Ok(theta.into_iter().map(|t| t.expect("solved")).collect()),
        (_, Some(level)) => Err(Error::Saturated { level }),
    }
}

/// Distance of `u` from `[Σ_l F̂(θ_l⁻, z_l | w_k), Σ_l F̂(θ_l, z_l | w_k)]` per row, signed
/// like `A`. Zero in every row exactly when `θ` solves the step system up to
/// the unavoidable jump overshoot; equal to `eval_a` for smoothed bundles.
pub fn generalized_residual<T: Scalar>(theta: &[T], bundle: &CellCdfBundle<T>, u: T) -> Vec<T> {
    let l = bundle.levels();
    (0..l)
        .map(|k| {
            let hi = (0..l).map(|z| bundle.entry(z, k).eval(theta[z])).sum::<T>() - u;
            let lo = (0..l).map(|z| bundle.entry(z, k).eval_left(theta[z])).sum::<T>() - u;
            if lo > T::zero() {
                lo
            } else if hi < T::zero() {
                hi
            } else {
                T::zero()
            }
        })
        .collect()
}
