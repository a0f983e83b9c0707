//! Scalar abstraction for the whole crate.
//!
//! Every numerical routine is generic over [`Real`], which bundles the
//! floating-point operations we rely on. `f32` and `f64` implement it;
//! all shipped tolerances are calibrated for `f64`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::float::FloatConst;
use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar usable throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Debug
    + Display
    + LowerExp
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`. Panics only for values outside the
    /// target type's range, which never happens for the literals we feed it.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal out of range for scalar type")
    }

    /// Conversion from a count.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count out of range for scalar type")
    }

    /// Geometric comparison tolerance: 1e-12 in `f64`, scaled up for
    /// coarser scalar types so invariant checks remain meaningful.
    fn geom_tol() -> Self {
        Self::of(1e-12).max(Self::epsilon() * Self::of(32.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Surface area of the unit sphere `S^d` embedded in `R^{d+1}`.
///
/// `Omega_d = 2 pi^{(d+1)/2} / Gamma((d+1)/2)`; for `d = 2` this is `4 pi`.
pub fn surface_area<T: Real>(d: usize) -> T {
    let half = (d as f64 + 1.0) / 2.0;
    let ln = std::f64::consts::PI.ln() * half - crate::kernels::special::ln_gamma(half);
    T::of(2.0 * ln.exp())
}
