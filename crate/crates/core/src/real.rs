//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar usable by the lattice, encoder and solvers: `f32` or `f64`.
///
/// All tolerances quoted in the test suites assume `f64`.
pub trait Real: Float + FloatConst + FromPrimitive + rustfft::FftNum + Default + Display + LowerExp + Debug {
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
