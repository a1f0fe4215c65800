use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the geometric and linear-algebra code is generic over.
///
/// `RealField` supplies the arithmetic nalgebra needs for factorizations;
/// the num-traits conversions carry numeric literals and diagnostics across
/// precisions.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn machine_epsilon() -> Self {
        Self::default_epsilon()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn to_f64_vec<T: Scalar>(xs: impl IntoIterator<Item = T>) -> Vec<f64> {
    xs.into_iter().map(Scalar::to_f64_lossy).collect()
}
