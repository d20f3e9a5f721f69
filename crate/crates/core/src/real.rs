use std::fmt::{Debug, Display};
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type for sequence terms and limits.
///
/// Blanket-implemented for every floating-point type that satisfies the
/// bounds, i.e. `f32` and `f64` in practice. Index-set counting and exact
/// densities do not go through this trait; they always use arbitrary
/// precision integers and rationals, so the choice of scalar only affects
/// term values, window means, and reported limits.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + AddAssign + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant, saturating through `Float` semantics.
    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).unwrap_or_else(Self::nan)
    }

    /// Converts back to `f64` for reporting and diagnostics.
    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Embeds a 1-based sequence index as a scalar.
    fn from_index(k: u64) -> Self {
        <Self as FromPrimitive>::from_u64(k)
            .unwrap_or_else(|| Self::from_f64_lossy(k as f64))
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + AddAssign + Debug + Display + Send + Sync + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f32_and_f64_are_real() {
        fn assert_real<T: Real>() {}
        assert_real::<f32>();
        assert_real::<f64>();
    }

    #[test]
    fn index_embedding_is_exact_for_small_indices() {
        assert_eq!(f64::from_index(1), 1.0);
        assert_eq!(f64::from_index(1 << 52), (1u64 << 52) as f64);
        assert_eq!(f32::from_index(7), 7.0f32);
    }
}
