//! Scalar abstraction so the solvers run on f32 or f64.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign, NumCast};

/// Floating-point scalar usable by every matrix routine in this crate.
pub trait Scalar: Float + NumAssign + NumCast + Sum + Debug + Display + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self {
        NumCast::from(v).expect("f64 -> scalar conversion")
    }

    fn as_f64(self) -> f64 {
        NumCast::from(self).expect("scalar -> f64 conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
