use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar the numerical kernels are written against: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    /// Pivot/zero threshold for elimination-style kernels.
    fn pivot_tol() -> Self {
        Self::epsilon().sqrt() * Self::lit(1e-4)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
