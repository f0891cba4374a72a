//! Scalar abstractions.
//!
//! All numerical code is generic over a real floating point type `T: Real`
//! (implemented for `f32` and `f64`). Grid values may be real or complex;
//! [`Value`] covers both so the same transforms and operators apply to
//! `f64` fields and to `Complex<f64>` fields (continuum eigenfunctions).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{Mul, Neg};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive, Zero};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating point scalar used for grids, weights and norms.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
    + Value<Real = Self>
{
    /// Converts an `f64` literal. Never fails for the supported types.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count or index.
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// A grid value: either the real scalar itself or its complexification.
pub trait Value:
    Copy
    + NumAssign
    + Neg<Output = Self>
    + Mul<<Self as Value>::Real, Output = Self>
    + Sum
    + Debug
    + Send
    + Sync
    + 'static
{
    type Real: Real;

    fn from_real(r: Self::Real) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> Self::Real;
    fn im(self) -> Self::Real;
    /// Absolute value (complex modulus).
    fn modulus(self) -> Self::Real;

    fn all_finite(self) -> bool {
        self.re().is_finite() && self.im().is_finite()
    }
}

macro_rules! impl_real_value {
    ($t:ty) => {
        impl Value for $t {
            type Real = $t;

            fn from_real(r: $t) -> Self {
                r
            }
            fn conj(self) -> Self {
                self
            }
            fn re(self) -> $t {
                self
            }
            fn im(self) -> $t {
                0.0
            }
            fn modulus(self) -> $t {
                self.abs()
            }
        }

        impl Value for Complex<$t> {
            type Real = $t;

            fn from_real(r: $t) -> Self {
                Complex::new(r, 0.0)
            }
            fn conj(self) -> Self {
                Complex::conj(&self)
            }
            fn re(self) -> $t {
                self.re
            }
            fn im(self) -> $t {
                self.im
            }
            fn modulus(self) -> $t {
                self.norm()
            }
        }
    };
}

impl_real_value!(f32);
impl_real_value!(f64);

/// Largest modulus in a slice, zero when empty.
pub(crate) fn max_modulus<V: Value>(xs: &[V]) -> V::Real {
    xs.iter()
        .map(|x| x.modulus())
        .fold(V::Real::zero(), |a, b| a.max(b))
}
