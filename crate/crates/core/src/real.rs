//! Scalar abstraction shared by every sampler in the crate.
//!
//! All model arithmetic is written against [`Real`], so the same code runs in
//! `f32` or `f64`. The handful of primitive random variates that `rand_distr`
//! only provides for concrete float types are exposed as trait methods and
//! implemented per type below.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Gamma, Open01, StandardNormal};

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn standard_exponential<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform on the open interval (0, 1).
    fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma(shape, 1). Callers validate `shape > 0`.
    fn unit_gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self;

    /// Beta(a, b). Callers validate both shapes.
    fn beta_variate<R: Rng + ?Sized>(a: Self, b: Self, rng: &mut R) -> Self;

    /// Natural log of the gamma function.
    fn ln_gamma(self) -> Self {
        Self::lit(statrs::function::gamma::ln_gamma(self.to_f64_lossy()))
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn standard_exponential<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Exp1.sample(rng)
            }

            #[inline]
            fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Open01.sample(rng)
            }

            #[inline]
            fn unit_gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self {
                Gamma::new(shape, 1.0)
                    .expect("shape validated by caller")
                    .sample(rng)
            }

            #[inline]
            fn beta_variate<R: Rng + ?Sized>(a: Self, b: Self, rng: &mut R) -> Self {
                Beta::new(a, b).expect("shapes validated by caller").sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
