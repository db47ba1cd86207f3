//! Compactly supported polynomial kernels on `[-1, 1]`.
//!
//! A kernel is stored as the coefficients of a polynomial on its support, so
//! the integrated kernel `H(t) = ∫_{-1}^{t} K` is another polynomial and is
//! evaluated exactly. Moment conditions are checked numerically when a kernel
//! is built and construction fails if they do not hold.

mod bandwidth;

pub use bandwidth::{
    rule_of_thumb, select_bandwidth, BandwidthMethod, BandwidthPlan, BandwidthScope, CellBandwidth,
    CellKey,
};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::scalar::Scalar;

/// Tolerance for the moment checks done at construction.
pub const MOMENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Epanechnikov,
    /// `(3/2)K̄(x) + (1/2)x K̄'(x)` with `K̄(x) = (693/512)(1 - x²)^5`; order 4.
    ConstructedOrder4,
    Custom,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::ConstructedOrder4 => "order4",
            KernelFamily::Custom => "custom",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(KernelFamily::Epanechnikov),
            "order4" | "constructed-order4" | "constructed" => Ok(KernelFamily::ConstructedOrder4),
            other => Err(Error::InvalidInput(format!("unknown kernel family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec<T> {
    family: KernelFamily,
    order: usize,
    /// Ascending powers of the polynomial on `[-1, 1]`.
    coeffs: Vec<T>,
    /// Antiderivative of `coeffs`, shifted so that it vanishes at -1.
    integral: Vec<T>,
    roughness: T,
    leading_moment: T,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn epanechnikov() -> Self {
        Self::from_polynomial(KernelFamily::Epanechnikov, &[0.75, 0.0, -0.75], 2)
            .expect("Epanechnikov kernel passes its moment checks")
    }

    /// The order-4 kernel `(3/2)K̄ + (1/2)xK̄'` built from `K̄ = (693/512)(1-x²)^5`.
    pub fn constructed_order4() -> Self {
        let c = 693.0 / 512.0;
        // (1 - x²)^5 = Σ C(5, i) (-1)^i x^{2i}
        let binom = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
        let mut bar = [0.0; 11];
        for (i, b) in binom.iter().enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            bar[2 * i] = c * b * sign;
        }
        // x K̄'(x) has coefficient k a_k on x^k.
        let coeffs: Vec<f64> =
            bar.iter().enumerate().map(|(k, a)| a * (1.5 + 0.5 * k as f64)).collect();
        Self::from_polynomial(KernelFamily::ConstructedOrder4, &coeffs, 4)
            .expect("constructed order-4 kernel passes its moment checks")
    }

    /// Arbitrary polynomial kernel on `[-1, 1]` claimed to have order `order`.
    pub fn custom_polynomial(coeffs: &[f64], order: usize) -> Result<Self> {
        Self::from_polynomial(KernelFamily::Custom, coeffs, order)
    }

    pub fn from_family(family: KernelFamily) -> Result<Self> {
        match family {
            KernelFamily::Epanechnikov => Ok(Self::epanechnikov()),
            KernelFamily::ConstructedOrder4 => Ok(Self::constructed_order4()),
            KernelFamily::Custom => Err(Error::InvalidInput(
                "custom kernels need explicit coefficients".into(),
            )),
        }
    }

    fn from_polynomial(family: KernelFamily, coeffs: &[f64], order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::KernelCheck(format!("order must be at least 2, got {order}")));
        }
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::KernelCheck("coefficients must be finite and non-empty".into()));
        }
        let coeffs: Vec<T> = coeffs.iter().map(|&c| T::lit(c)).collect();
        let mut integral = vec![T::zero(); coeffs.len() + 1];
        for (k, &a) in coeffs.iter().enumerate() {
            integral[k + 1] = a / T::from_count(k + 1);
        }
        integral[0] = -horner(&integral, -T::one());
        let mut spec = Self {
            family,
            order,
            coeffs,
            integral,
            roughness: T::zero(),
            leading_moment: T::zero(),
        };
        spec.verify()?;
        spec.roughness = spec.quad(|u| {
            let k = spec.eval(u);
            k * k
        });
        spec.leading_moment = spec.moment(order);
        Ok(spec)
    }

    fn quad<F: Fn(T) -> T>(&self, f: F) -> T {
        let tol = T::lit(1e-13).max(T::epsilon() * T::lit(16.0));
        adaptive_simpson(&f, -T::one(), T::one(), tol)
    }

    fn verify(&self) -> Result<()> {
        let tol = MOMENT_TOL.max(self.tolerance_floor());
        let mass = self.moment(0).as_f64();
        if (mass - 1.0).abs() > tol {
            return Err(Error::KernelCheck(format!("kernel integrates to {mass}, not 1")));
        }
        for j in 1..self.order {
            let m = self.moment(j).as_f64();
            if m.abs() > tol {
                return Err(Error::KernelCheck(format!(
                    "moment {j} is {m}, expected 0 for order {}",
                    self.order
                )));
            }
        }
        Ok(())
    }

    /// Checks in `f32` cannot reach 1e-6 once coefficients are in the thousands.
    fn tolerance_floor(&self) -> f64 {
        let scale: f64 = self.coeffs.iter().map(|c| c.as_f64().abs()).sum();
        T::epsilon().as_f64() * 64.0 * scale
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coeffs
    }

    /// `K(u)`, zero outside `[-1, 1]`.
    #[inline]
    pub fn eval(&self, u: T) -> T {
        if u.abs() > T::one() {
            T::zero()
        } else {
            horner(&self.coeffs, u)
        }
    }

    /// `H(t) = ∫_{-∞}^{t} K(u) du`.
    #[inline]
    pub fn integrated(&self, t: T) -> T {
        if t <= -T::one() {
            T::zero()
        } else if t >= T::one() {
            T::one()
        } else {
            horner(&self.integral, t)
        }
    }

    /// `∫ u^j K(u) du` by adaptive quadrature.
    pub fn moment(&self, j: usize) -> T {
        self.quad(|u| u.powi(j as i32) * self.eval(u))
    }

    /// `∫ K²`.
    pub fn roughness(&self) -> T {
        self.roughness
    }

    /// `∫ u^ν K(u) du` for the kernel order ν.
    pub fn leading_moment(&self) -> T {
        self.leading_moment
    }

    pub fn convert<U: Scalar>(&self) -> KernelSpec<U> {
        let conv = |v: &[T]| v.iter().map(|c| U::lit(c.as_f64())).collect();
        KernelSpec {
            family: self.family,
            order: self.order,
            coeffs: conv(&self.coeffs),
            integral: conv(&self.integral),
            roughness: U::lit(self.roughness.as_f64()),
            leading_moment: U::lit(self.leading_moment.as_f64()),
        }
    }
}

/// Convenience wrappers matching the operation names used across the crate.
pub fn eval_kernel<T: Scalar>(spec: &KernelSpec<T>, u: T) -> T {
    spec.eval(u)
}

pub fn integrated_kernel<T: Scalar>(spec: &KernelSpec<T>, t: T) -> T {
    spec.integrated(t)
}

pub fn build_constructed_kernel<T: Scalar>() -> KernelSpec<T> {
    KernelSpec::constructed_order4()
}

#[inline]
fn horner<T: Scalar>(coeffs: &[T], x: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
}
