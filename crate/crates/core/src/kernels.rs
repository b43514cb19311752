//! Seedable random variates and log-densities for every distribution the
//! samplers draw from.
//!
//! Parameterizations used throughout:
//! - Gamma(shape, scale), mean `shape * scale`.
//! - InverseGamma(shape, scale), density proportional to `x^(-shape-1) exp(-scale/x)`.
//! - Normal(mean, variance). Note the second argument is a variance.
//! - Exponential(mean).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::real::Real;

/// A reproducible random stream, one per chain.
///
/// The generator is ChaCha8 keyed by `seed` with `stream_id` selecting the
/// ChaCha stream, so distinct ids give non-overlapping sequences and the
/// integer output is identical on every platform.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[inline]
fn positive<T: Real>(x: T, what: &str) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{what} must be positive and finite, got {x}")))
    }
}

pub fn sample_gamma<T: Real>(shape: T, scale: T, rng: &mut RngStream) -> Result<T> {
    positive(shape, "gamma shape")?;
    positive(scale, "gamma scale")?;
    Ok(T::unit_gamma(shape, rng) * scale)
}

/// Natural log of a Gamma(shape, 1) variate, accurate for tiny shapes where
/// the variate itself underflows.
fn sample_ln_unit_gamma<T: Real>(shape: T, rng: &mut RngStream) -> T {
    if shape >= T::one() {
        T::unit_gamma(shape, rng).ln()
    } else {
        // G(a) = G(a + 1) * U^(1/a)
        let g = T::unit_gamma(shape + T::one(), rng);
        let u = T::open_unit(rng);
        g.ln() + u.ln() / shape
    }
}

/// Draws a weight vector from Dirichlet(concentrations). Normalization is
/// done in log space so small concentrations never produce an all-zero draw.
pub fn sample_dirichlet<T: Real>(concentrations: &[T], rng: &mut RngStream) -> Result<Vec<T>> {
    if concentrations.is_empty() {
        return Err(domain("dirichlet needs at least one concentration"));
    }
    for &a in concentrations {
        positive(a, "dirichlet concentration")?;
    }
    if concentrations.len() == 1 {
        return Ok(vec![T::one()]);
    }
    let logs: Vec<T> = concentrations
        .iter()
        .map(|&a| sample_ln_unit_gamma(a, rng))
        .collect();
    let norm = log_sum_exp(&logs);
    let mut weights: Vec<T> = logs.iter().map(|&l| (l - norm).exp()).collect();
    let total: T = weights.iter().copied().sum();
    for w in &mut weights {
        *w = *w / total;
    }
    Ok(weights)
}

pub fn sample_beta<T: Real>(a: T, b: T, rng: &mut RngStream) -> Result<T> {
    positive(a, "beta shape a")?;
    positive(b, "beta shape b")?;
    Ok(T::beta_variate(a, b, rng))
}

pub fn sample_normal<T: Real>(mean: T, variance: T, rng: &mut RngStream) -> Result<T> {
    if !mean.is_finite() {
        return Err(domain(format!("normal mean must be finite, got {mean}")));
    }
    positive(variance, "normal variance")?;
    Ok(mean + variance.sqrt() * T::standard_normal(rng))
}

pub fn sample_inverse_gamma<T: Real>(shape: T, scale: T, rng: &mut RngStream) -> Result<T> {
    positive(shape, "inverse-gamma shape")?;
    positive(scale, "inverse-gamma scale")?;
    Ok(scale / T::unit_gamma(shape, rng))
}

pub fn sample_exponential<T: Real>(mean: T, rng: &mut RngStream) -> Result<T> {
    positive(mean, "exponential mean")?;
    Ok(T::standard_exponential(rng) * mean)
}

/// Draws an index with a single uniform and a cumulative scan.
pub fn sample_categorical<T: Real>(probabilities: &[T], rng: &mut RngStream) -> Result<usize> {
    if probabilities.is_empty() {
        return Err(domain("categorical needs at least one probability"));
    }
    let mut total = T::zero();
    for &p in probabilities {
        if !(p >= T::zero()) || !p.is_finite() {
            return Err(domain(format!("categorical probability {p} is not a probability")));
        }
        total = total + p;
    }
    if (total - T::one()).abs() > T::lit(1e-9) {
        return Err(domain(format!("categorical probabilities sum to {total}, not 1")));
    }
    Ok(categorical_scan(probabilities, total, rng))
}

/// Cumulative scan against `u * total`; never selects a zero-mass entry.
pub(crate) fn categorical_scan<T: Real>(masses: &[T], total: T, rng: &mut RngStream) -> usize {
    let target = T::open_unit(rng) * total;
    let mut cum = T::zero();
    let mut last_positive = 0;
    for (i, &p) in masses.iter().enumerate() {
        if p > T::zero() {
            last_positive = i;
            cum = cum + p;
            if target < cum {
                return i;
            }
        }
    }
    last_positive
}

/// Samples an index from unnormalized log-weights.
pub(crate) fn sample_log_categorical<T: Real>(
    log_weights: &[T],
    scratch: &mut Vec<T>,
    rng: &mut RngStream,
) -> usize {
    let max = log_weights
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    scratch.clear();
    scratch.extend(log_weights.iter().map(|&l| (l - max).exp()));
    let total: T = scratch.iter().copied().sum();
    categorical_scan(scratch, total, rng)
}

/// `p(k) ∝ λ^k / k!` on `{1, …, kmax}`; zero outside the support.
pub fn truncated_poisson_pmf<T: Real>(k: usize, lambda: T, kmax: usize) -> T {
    ln_truncated_poisson_pmf(k, lambda, kmax).exp()
}

pub fn ln_truncated_poisson_pmf<T: Real>(k: usize, lambda: T, kmax: usize) -> T {
    if k == 0 || k > kmax || !(lambda > T::zero()) {
        return T::neg_infinity();
    }
    let ln_lambda = lambda.ln();
    let unnorm = |j: usize| {
        let jt = T::from_usize(j).expect("small integer");
        jt * ln_lambda - (jt + T::one()).ln_gamma()
    };
    let terms: Vec<T> = (1..=kmax).map(unnorm).collect();
    unnorm(k) - log_sum_exp(&terms)
}

pub fn log_sum_exp<T: Real>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() || !max.is_finite() {
        return max;
    }
    let s: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + s.ln()
}

#[inline]
pub fn ln_normal_pdf<T: Real>(x: T, mean: T, variance: T) -> T {
    if !(variance > T::zero()) {
        return T::neg_infinity();
    }
    let d = x - mean;
    -T::lit(0.5) * ((T::TAU()).ln() + variance.ln() + d * d / variance)
}

pub fn ln_gamma_pdf<T: Real>(x: T, shape: T, scale: T) -> T {
    if !(x > T::zero()) || x.is_infinite() {
        return T::neg_infinity();
    }
    (shape - T::one()) * x.ln() - x / scale - shape.ln_gamma() - shape * scale.ln()
}

pub fn ln_inverse_gamma_pdf<T: Real>(x: T, shape: T, scale: T) -> T {
    if !(x > T::zero()) || x.is_infinite() {
        return T::neg_infinity();
    }
    shape * scale.ln() - shape.ln_gamma() - (shape + T::one()) * x.ln() - scale / x
}

pub fn ln_beta_pdf<T: Real>(x: T, a: T, b: T) -> T {
    if !(x > T::zero() && x < T::one()) {
        return T::neg_infinity();
    }
    (a - T::one()) * x.ln() + (b - T::one()) * (-x).ln_1p() + (a + b).ln_gamma()
        - a.ln_gamma()
        - b.ln_gamma()
}

pub fn ln_exponential_pdf<T: Real>(x: T, mean: T) -> T {
    if !(x >= T::zero()) || x.is_infinite() {
        return T::neg_infinity();
    }
    -mean.ln() - x / mean
}

/// Log-density of Dirichlet(concentrations) at `x`. The one-dimensional
/// simplex is a single point, so its log-density is 0.
pub fn ln_dirichlet_pdf<T: Real>(x: &[T], concentrations: &[T]) -> Result<T> {
    if x.len() != concentrations.len() || x.is_empty() {
        return Err(Error::LengthMismatch(format!(
            "dirichlet point has {} entries, concentrations {}",
            x.len(),
            concentrations.len()
        )));
    }
    if x.len() == 1 {
        return Ok(if x[0] == T::one() { T::zero() } else { T::neg_infinity() });
    }
    let mut total = T::zero();
    let mut acc = T::zero();
    for (&xi, &a) in x.iter().zip(concentrations) {
        if !(xi > T::zero()) {
            return Ok(T::neg_infinity());
        }
        total = total + a;
        acc = acc + (a - T::one()) * xi.ln() - a.ln_gamma();
    }
    Ok(acc + total.ln_gamma())
}
