//! Bayesian stochastic volatility with Gaussian-mixture innovations whose
//! number of components is inferred by birth-death MCMC.
//!
//! The samplers are generic over [`Real`] (`f32`, `f64`); the pipeline works
//! in `f64`.

pub mod bdmcmc;
pub mod diagnostics;
pub mod error;
pub mod gibbs;
pub mod kernels;
pub mod mixture;
pub mod pipeline;
pub mod real;
pub mod sv;

pub use error::{Error, Result};
pub use kernels::RngStream;
pub use real::Real;

pub type Component64 = mixture::Component<f64>;
pub type Component32 = mixture::Component<f32>;
pub type MixtureState64 = mixture::MixtureState<f64>;
pub type MixtureState32 = mixture::MixtureState<f32>;
pub type MixturePriors64 = mixture::MixturePriors<f64>;
pub type MixturePriors32 = mixture::MixturePriors<f32>;
pub type BirthDeathConfig64 = bdmcmc::BirthDeathConfig<f64>;
pub type BirthDeathConfig32 = bdmcmc::BirthDeathConfig<f32>;
pub type SvState64 = sv::SvState<f64>;
pub type SvState32 = sv::SvState<f32>;
pub type SvPriors64 = sv::SvPriors<f64>;
pub type SvPriors32 = sv::SvPriors<f32>;
