//! Scalar abstraction for the numerical kernels.

use std::fmt;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating-point scalar the library is generic over.
///
/// Implemented for `f32` and `f64`. On top of `num_traits::Float` it adds
/// the two things generic numerical code needs constantly: conversion of
/// `f64` constants and draws from the base random distributions.
///
/// `f32` is adequate for small orders only; high-order Hermite work
/// (p around 32) overflows single precision inside the envelope sums and
/// should use `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Nearest representable value to `v`.
    fn from_f64_lossy(v: f64) -> Self;

    /// Widens (f32) or passes through (f64) to `f64`.
    fn to_f64_lossy(self) -> f64;

    /// One draw from the standard normal distribution.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from the uniform distribution on `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f64 {
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }

    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    #[inline]
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen()
    }
}

impl Real for f32 {
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        f64::from(self)
    }

    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    #[inline]
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn conversions_round_trip_for_f64() {
        assert_eq!(f64::from_f64_lossy(0.3), 0.3);
        assert_eq!(0.3f64.to_f64_lossy(), 0.3);
    }

    #[test]
    fn unit_uniform_stays_in_range() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let x = f64::unit_uniform(&mut rng);
            assert!((0.0..1.0).contains(&x));
            let y = f32::unit_uniform(&mut rng);
            assert!((0.0..1.0).contains(&y));
        }
    }

    #[test]
    fn standard_normal_is_roughly_centered() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 20_000;
        let mean: f64 = (0..n).map(|_| f64::standard_normal(&mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
    }
}
