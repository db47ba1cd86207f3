//! Presmoothing estimator for the Cox proportional hazards model with a
//! discrete endogenous treatment, a discrete instrument and right censoring.
//!
//! The pipeline has three steps:
//!
//! 1. [`phi`] estimates the quantile transformation `φ̂(z, x, u)` from Beran
//!    conditional distribution estimates ([`beran`]) by solving the
//!    instrumental moment system at each covariate value.
//! 2. [`proxy`] draws artificial uniform durations and censoring variables and
//!    maps them through `φ̂`, giving exogenous proxy observations.
//! 3. [`coxph`] fits an ordinary Cox model to the proxies.
//!
//! [`inference`] adds bootstrap standard errors and [`sim`] reproduces the
//! Monte Carlo designs used to validate the method.

// `!(x > 0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beran;
pub mod data;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod coxph;
pub mod phi;
pub mod proxy;
pub mod quadrature;
pub mod rng;
pub mod pipeline;
pub mod scalar;
pub mod sim;
pub mod inference;

pub use data::{Dataset, Observation};
pub use error::{Error, Result};
pub use kernels::{BandwidthPlan, KernelFamily, KernelSpec};
pub use scalar::Scalar;

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type KernelSpec32 = KernelSpec<f32>;
pub type StepCdf64 = beran::StepCdf<f64>;
pub type SmoothSubCdf64 = beran::SmoothSubCdf<f64>;
pub type QuantileMap64 = phi::QuantileMap<f64>;
pub type QuantileMap32 = phi::QuantileMap<f32>;
