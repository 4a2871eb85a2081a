//! Higher-order approximation of the null distribution of the batched-OLS
//! test statistic in multi-stage adaptive (bandit) experiments.
//!
//! The crate has two independent routes to the distribution of the
//! studentized statistic:
//!
//! * [`sim`] simulates complete batched trials and reads quantiles off the
//!   order statistics (the Monte Carlo oracle);
//! * [`engine`] evaluates a backward recursion over the stage-wise
//!   first-order Edgeworth signed densities of [`edgeworth`], enumerating
//!   the arm-count laws of [`policy`] exactly and integrating the stage
//!   vectors by importance sampling.
//!
//! [`quantile`] inverts either tail function and provides the normal
//! baseline. All numerics are generic over [`Scalar`] (`f32` or `f64`);
//! the `*64` aliases below are what the CLI uses.

// `!(a > b)` rejects NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod edgeworth;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod noise;
pub mod policy;
pub mod quadrature;
pub mod quantile;
pub mod rng;
pub mod sim;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub use design::{DesignConfig, ExpansionSettings, IsSettings, McSettings};
pub use edgeworth::{ExpansionMeasure, ExpansionOrder, HermiteIndex};
pub use engine::{StatWeights, TailEngine, TailEstimate};
pub use error::{Error, Result};
pub use noise::{MomentSet, NoiseFamily, NoiseModel};
pub use policy::{CountLaw, Policy, Strategy};
pub use quantile::{Method, QuantileResult};
pub use sim::StageOutcome;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Floating-point scalar the numerics are written against.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub(crate) fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub(crate) fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

pub type NoiseModel64 = NoiseModel<f64>;
pub type MomentSet64 = MomentSet<f64>;
pub type Policy64 = Policy<f64>;
pub type CountLaw64 = CountLaw<f64>;
pub type DesignConfig64 = DesignConfig<f64>;
pub type ExpansionMeasure64 = ExpansionMeasure<f64>;
pub type TailEngine64 = TailEngine<f64>;
pub type TailEstimate64 = TailEstimate<f64>;
pub type QuantileResult64 = QuantileResult<f64>;
pub type StageOutcome64 = StageOutcome<f64>;

pub type NoiseModel32 = NoiseModel<f32>;
pub type MomentSet32 = MomentSet<f32>;
pub type ExpansionMeasure32 = ExpansionMeasure<f32>;
