//! Real Monge-Ampère equations on the flat torus `X = Rⁿ/Zⁿ`.
//!
//! The crate solves `MA(φ) = e^{βφ} μ₀` by minimizing a convex functional over
//! c-convex grid functions, samples the β-deformed permanental point processes
//! whose empirical measures concentrate on `MA(φ*)`, and computes the optimal
//! transport quantities (c-transforms, Wasserstein costs, Kantorovich duals)
//! that make up the large deviation rate function.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the `F64`
//! aliases below are what the command line tool and the acceptance suite use.

// `!(x > 0)` style tests are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub mod ctransform;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod sampler;
pub mod solver;
pub mod theta;
pub mod torus;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};

/// Floating point scalar used throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Infallible for the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count or index.
    #[inline]
    fn of(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type TorusPointF64 = torus::TorusPoint<f64>;
pub type TorusPointF32 = torus::TorusPoint<f32>;
pub type GridFieldF64 = torus::GridField<f64>;
pub type GridFieldF32 = torus::GridField<f32>;
pub type MeasureF64 = torus::DiscreteMeasure<f64>;
pub type MeasureF32 = torus::DiscreteMeasure<f32>;
pub type ConfigurationF64 = ensemble::Configuration<f64>;
pub type EnsembleSpecF64 = ensemble::EnsembleSpec<f64>;
pub type SampleSetF64 = sampler::SampleSet<f64>;
pub type SolveResultF64 = solver::SolveResult<f64>;
pub type RateFunctionReportF64 = transport::RateFunctionReport<f64>;
