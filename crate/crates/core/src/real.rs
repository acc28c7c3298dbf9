//! Scalar abstraction: the numeric core runs at `f32` or `f64`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StandardUniform};

/// Floating-point scalar for metrics, LLRs and channel values.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Uniform sample on `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f32 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardUniform.sample(rng)
    }
}

impl Real for f64 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardUniform.sample(rng)
    }
}

/// Shorthand conversion from `f64` literals into the working scalar.
#[inline]
pub fn r<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 -> Real conversion")
}

/// Conversion from integer sizes into the working scalar.
#[inline]
pub fn r_usize<T: Real>(x: usize) -> T {
    T::from_usize(x).expect("usize -> Real conversion")
}
