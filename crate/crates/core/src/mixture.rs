//! Point-process configuration of a finite Gaussian mixture: the state, its
//! likelihood, the hierarchical prior and the birth/death move arithmetic.
//!
//! Component scale is stored as a precision `s = 1 / variance`.

use crate::error::{domain, Error, Result};
use crate::kernels::{
    ln_dirichlet_pdf, ln_gamma_pdf, ln_normal_pdf, ln_truncated_poisson_pmf, sample_gamma,
    RngStream,
};
use crate::real::Real;

/// Weight tolerance accepted when constructing a state from user input.
const INPUT_WEIGHT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Component<T> {
    pub weight: T,
    pub mean: T,
    pub precision: T,
}

impl<T: Real> Component<T> {
    pub fn new(weight: T, mean: T, precision: T) -> Self {
        Self {
            weight,
            mean,
            precision,
        }
    }

    pub fn variance(&self) -> T {
        self.precision.recip()
    }

    /// `ln(weight) + ln N(y; mean, 1/precision)`.
    #[inline]
    pub(crate) fn ln_weighted_density(&self, y: T) -> T {
        let d = y - self.mean;
        self.weight.ln() + T::lit(0.5) * (self.precision.ln() - T::TAU().ln())
            - T::lit(0.5) * self.precision * d * d
    }
}

/// Where the likelihood comes from. `PriorOnly` replaces the likelihood by a
/// constant, which turns every sampler into a sampler of the prior.
#[derive(Clone, Copy, Debug)]
pub enum Evidence<'a, T> {
    Data(&'a [T]),
    PriorOnly,
}

impl<'a, T> Evidence<'a, T> {
    pub fn data(&self) -> &'a [T] {
        match *self {
            Evidence::Data(d) => d,
            Evidence::PriorOnly => &[],
        }
    }
}

/// An ordered list of mixture components with weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureState<T> {
    components: Vec<Component<T>>,
}

impl<T: Real> MixtureState<T> {
    /// Validates and renormalizes the weights.
    pub fn new(components: Vec<Component<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidState("a mixture needs at least one component".into()));
        }
        let mut total = T::zero();
        for (i, c) in components.iter().enumerate() {
            if !(c.weight > T::zero() && c.weight <= T::one()) {
                return Err(Error::InvalidState(format!(
                    "component {i} weight {} outside (0, 1]",
                    c.weight
                )));
            }
            if !c.mean.is_finite() {
                return Err(Error::InvalidState(format!("component {i} mean is not finite")));
            }
            if !(c.precision > T::zero()) || !c.precision.is_finite() {
                return Err(Error::InvalidState(format!(
                    "component {i} precision {} is not positive and finite",
                    c.precision
                )));
            }
            total = total + c.weight;
        }
        if (total - T::one()).abs() > T::lit(INPUT_WEIGHT_TOL) {
            return Err(Error::InvalidState(format!("weights sum to {total}, not 1")));
        }
        let mut state = Self { components };
        state.renormalize();
        Ok(state)
    }

    pub fn from_parts(weights: &[T], means: &[T], precisions: &[T]) -> Result<Self> {
        if weights.len() != means.len() || means.len() != precisions.len() {
            return Err(Error::LengthMismatch(format!(
                "{} weights, {} means, {} precisions",
                weights.len(),
                means.len(),
                precisions.len()
            )));
        }
        Self::new(
            weights
                .iter()
                .zip(means)
                .zip(precisions)
                .map(|((&w, &m), &s)| Component::new(w, m, s))
                .collect(),
        )
    }

    /// The standard normal innovation, k = 1.
    pub fn standard() -> Self {
        Self {
            components: vec![Component::new(T::one(), T::zero(), T::one())],
        }
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component<T>] {
        &self.components
    }

    pub fn weights(&self) -> Vec<T> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn means(&self) -> Vec<T> {
        self.components.iter().map(|c| c.mean).collect()
    }

    pub fn precisions(&self) -> Vec<T> {
        self.components.iter().map(|c| c.precision).collect()
    }

    pub fn weight_sum(&self) -> T {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub(crate) fn components_mut(&mut self) -> &mut [Component<T>] {
        &mut self.components
    }

    fn renormalize(&mut self) {
        let total = self.weight_sum();
        for c in &mut self.components {
            c.weight = c.weight / total;
        }
    }

    /// Log mixture density at a single point, via a streaming log-sum-exp.
    #[inline]
    pub fn ln_density(&self, y: T) -> T {
        let mut max = T::neg_infinity();
        let mut acc = T::zero();
        for c in &self.components {
            let t = c.ln_weighted_density(y);
            if t > max {
                acc = acc * (max - t).exp() + T::one();
                max = t;
            } else {
                acc = acc + (t - max).exp();
            }
        }
        max + acc.ln()
    }

    /// Copy with components reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            components: order.iter().map(|&i| self.components[i]).collect(),
        }
    }
}

/// Sum over observations of the log mixture density.
pub fn log_likelihood<T: Real>(state: &MixtureState<T>, data: &[T]) -> Result<T> {
    if data.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(data.iter().map(|&y| state.ln_density(y)).sum())
}

/// Hyperparameters of the hierarchical mixture prior. `beta` is sampled
/// state, the rest are constants.
#[derive(Clone, Debug, PartialEq)]
pub struct MixturePriors<T> {
    /// Truncated Poisson rate on k.
    pub lambda: T,
    pub kmax: usize,
    /// Symmetric Dirichlet concentration on the weights.
    pub gamma: T,
    /// Prior mean of component means.
    pub zeta: T,
    /// Prior precision of component means.
    pub tau: T,
    /// Precision prior is Gamma(2 alpha, scale 1/(2 beta)).
    pub alpha: T,
    /// beta prior is Gamma(2 l, scale 1/(2 m)).
    pub l: T,
    pub m: T,
    /// Length of the observed data range.
    pub range: T,
    pub beta: T,
}

impl<T: Real> MixturePriors<T> {
    /// Constants derived from the observed range, with `beta` drawn from its prior.
    pub fn from_data(data: &[T], lambda: T, kmax: usize, rng: &mut RngStream) -> Result<Self> {
        let mut priors = Self::from_data_with_beta(data, lambda, kmax, T::one())?;
        priors.beta = sample_gamma(T::lit(2.0) * priors.l, (T::lit(2.0) * priors.m).recip(), rng)?
            .max(T::min_positive_value());
        Ok(priors)
    }

    pub fn from_data_with_beta(data: &[T], lambda: T, kmax: usize, beta: T) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: data.len(),
            });
        }
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for (row, &y) in data.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    value: y.to_string(),
                });
            }
            lo = lo.min(y);
            hi = hi.max(y);
        }
        Self::from_range(lo, hi, lambda, kmax, beta)
    }

    pub fn from_range(lo: T, hi: T, lambda: T, kmax: usize, beta: T) -> Result<Self> {
        let range = hi - lo;
        if !(range > T::zero()) {
            return Err(Error::ConstantData);
        }
        let alpha = T::lit(2.0);
        let l = T::lit(0.2);
        let priors = Self {
            lambda,
            kmax,
            gamma: T::one(),
            zeta: (lo + hi) / T::lit(2.0),
            tau: (range * range).recip(),
            alpha,
            l,
            m: T::lit(100.0) * l / (alpha * range * range),
            range,
            beta,
        };
        priors.validate()?;
        Ok(priors)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.lambda, "lambda"),
            (self.gamma, "gamma"),
            (self.tau, "tau"),
            (self.alpha, "alpha"),
            (self.l, "l"),
            (self.m, "m"),
            (self.range, "range"),
            (self.beta, "beta"),
        ];
        for (v, name) in checks {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(domain(format!("prior constant {name} = {v} must be positive")));
            }
        }
        if !self.zeta.is_finite() {
            return Err(domain("prior mean zeta must be finite"));
        }
        if self.kmax == 0 {
            return Err(domain("kmax must be at least 1"));
        }
        Ok(())
    }

    /// Shape and scale of the Gamma prior on each precision, given `beta`.
    pub fn precision_shape_scale(&self) -> (T, T) {
        (T::lit(2.0) * self.alpha, (T::lit(2.0) * self.beta).recip())
    }

    /// Log-density of a single component's `(mean, precision)` under the
    /// i.i.d. component prior.
    pub fn ln_component_density(&self, mean: T, precision: T) -> T {
        let (shape, scale) = self.precision_shape_scale();
        ln_normal_pdf(mean, self.zeta, self.tau.recip()) + ln_gamma_pdf(precision, shape, scale)
    }
}

/// Full hierarchical log prior: `ln p(k)`, the symmetric Dirichlet on the
/// weights and the i.i.d. component prior. Returns `-inf` above `kmax`.
pub fn log_prior<T: Real>(state: &MixtureState<T>, priors: &MixturePriors<T>) -> T {
    let k = state.k();
    let ln_pk = ln_truncated_poisson_pmf(k, priors.lambda, priors.kmax);
    if ln_pk == T::neg_infinity() {
        return ln_pk;
    }
    let weights = state.weights();
    let conc = vec![priors.gamma; k];
    let ln_dir = if k == 1 {
        T::zero()
    } else {
        ln_dirichlet_pdf(&weights, &conc).expect("lengths agree")
    };
    let comp: T = state
        .components()
        .iter()
        .map(|c| priors.ln_component_density(c.mean, c.precision))
        .sum();
    ln_pk + ln_dir + comp
}

/// Log of the point-process reference density `p(k) Π p̃(μᵢ, sᵢ)`, the prior
/// term that enters the birth-death balance condition. It carries no weight
/// density; weights are governed by the birth kernel instead.
pub fn log_reference_density<T: Real>(state: &MixtureState<T>, priors: &MixturePriors<T>) -> T {
    let ln_pk = ln_truncated_poisson_pmf(state.k(), priors.lambda, priors.kmax);
    if ln_pk == T::neg_infinity() {
        return ln_pk;
    }
    ln_pk
        + state
            .components()
            .iter()
            .map(|c| priors.ln_component_density(c.mean, c.precision))
            .sum::<T>()
}

/// Adds `point`, scaling every existing weight by `1 - point.weight`.
pub fn birth<T: Real>(
    state: &MixtureState<T>,
    point: Component<T>,
    kmax: usize,
) -> Result<MixtureState<T>> {
    if !(point.weight > T::zero() && point.weight < T::one()) {
        return Err(Error::InvalidMove(format!(
            "birth weight {} outside (0, 1)",
            point.weight
        )));
    }
    if state.k() >= kmax {
        return Err(Error::InvalidMove(format!("birth at k = kmax = {kmax}")));
    }
    if !(point.precision > T::zero()) || !point.mean.is_finite() || !point.precision.is_finite() {
        return Err(Error::InvalidMove("birth point has invalid mean or precision".into()));
    }
    let keep = T::one() - point.weight;
    let mut components = Vec::with_capacity(state.k() + 1);
    components.extend(state.components.iter().map(|c| Component {
        weight: c.weight * keep,
        ..*c
    }));
    components.push(point);
    let mut next = MixtureState { components };
    next.renormalize();
    Ok(next)
}

/// Removes component `index`, dividing the remaining weights by their sum
/// (`1 - π_index`).
pub fn death<T: Real>(state: &MixtureState<T>, index: usize) -> Result<MixtureState<T>> {
    if state.k() < 2 {
        return Err(Error::InvalidMove("death at k = 1".into()));
    }
    if index >= state.k() {
        return Err(Error::InvalidMove(format!(
            "death index {index} out of range for k = {}",
            state.k()
        )));
    }
    let mut components = state.components.clone();
    components.remove(index);
    let mut next = MixtureState { components };
    next.renormalize();
    Ok(next)
}
