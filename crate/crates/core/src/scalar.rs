//! Scalar abstraction: the numeric core is generic over the float type,
//! with `f64` used by the training stack (see crate-root aliases).

/// Floating-point scalar usable throughout the numeric core.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lift an `f64` literal into this scalar type.
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn to_f64c(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Lower probability clamp applied before any logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Upper probability clamp applied before any logarithm.
pub const PROB_CEIL: f64 = 1.0 - 1e-12;
