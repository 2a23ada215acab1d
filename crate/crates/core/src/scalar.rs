use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Storage scalar for embeddings and prior rows.
///
/// Conversions to and from `f64` are plain `as` casts so the hot loops stay
/// branch-free.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Size in bytes of one stored value.
    const BYTES: usize;

    fn as_f64(self) -> f64;

    /// Round an `f64` to the storage precision.
    fn from_f64_round(v: f64) -> Self;

    fn to_f32_bits(self) -> u32 {
        (self.as_f64() as f32).to_bits()
    }
}

impl Scalar for f32 {
    const BYTES: usize = 4;

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self as f64
    }

    #[inline(always)]
    fn from_f64_round(v: f64) -> Self {
        v as f32
    }

    fn to_f32_bits(self) -> u32 {
        self.to_bits()
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self
    }

    #[inline(always)]
    fn from_f64_round(v: f64) -> Self {
        v
    }
}
