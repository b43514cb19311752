//! Canonical stochastic volatility with mixture innovations:
//!
//! ```text
//! y_t = ε_t exp(h_t / 2),    h_t = c + φ (h_{t-1} - c) + η_t,    η_t ~ N(0, σ_η²)
//! ```
//!
//! The latent path is stored as `h₀, …, hₙ`; `h₀` has no observation and its
//! prior is the stationary law `N(c, σ_η² / (1 - φ²))`. `h[t]` pairs with
//! `y[t - 1]`.

use crate::error::{domain, Error, Result};
use crate::kernels::{
    categorical_scan, ln_beta_pdf, sample_inverse_gamma, sample_normal, RngStream,
};
use crate::mixture::MixtureState;
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct SvState<T> {
    /// `h₀, …, hₙ`.
    pub h: Vec<T>,
    pub c: T,
    pub phi: T,
    pub sigma_eta2: T,
}

impl<T: Real> SvState<T> {
    pub fn new(h: Vec<T>, c: T, phi: T, sigma_eta2: T) -> Result<Self> {
        let s = Self {
            h,
            c,
            phi,
            sigma_eta2,
        };
        s.validate()?;
        Ok(s)
    }

    /// Constant path at `c`.
    pub fn flat(n: usize, c: T, phi: T, sigma_eta2: T) -> Result<Self> {
        Self::new(vec![c; n + 1], c, phi, sigma_eta2)
    }

    pub fn n(&self) -> usize {
        self.h.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.len() < 2 {
            return Err(domain("latent path needs h_0 and at least one observation site"));
        }
        if !(self.phi.abs() < T::one()) {
            return Err(domain(format!("|phi| must be < 1, got {}", self.phi)));
        }
        if !(self.sigma_eta2 > T::zero()) || !self.sigma_eta2.is_finite() {
            return Err(domain(format!("sigma_eta^2 must be positive, got {}", self.sigma_eta2)));
        }
        if !self.c.is_finite() || self.h.iter().any(|h| !h.is_finite()) {
            return Err(domain("latent path and level must be finite"));
        }
        Ok(())
    }

    /// The observation-aligned part `h₁, …, hₙ`.
    pub fn observed_h(&self) -> &[T] {
        &self.h[1..]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvPriors<T> {
    /// `c ~ N(c_mean, c_var)`.
    pub c_mean: T,
    pub c_var: T,
    /// `(φ + 1) / 2 ~ Beta(phi_a, phi_b)`.
    pub phi_a: T,
    pub phi_b: T,
    /// `σ_η² ~ InverseGamma(sigma_r / 2, s_sigma / 2)`.
    pub sigma_r: T,
    pub s_sigma: T,
}

impl<T: Real> Default for SvPriors<T> {
    fn default() -> Self {
        let sigma_r = T::lit(5.0);
        Self {
            c_mean: T::zero(),
            c_var: T::lit(10.0),
            phi_a: T::lit(20.0),
            phi_b: T::lit(1.5),
            sigma_r,
            s_sigma: T::lit(0.01) * sigma_r,
        }
    }
}

impl<T: Real> SvPriors<T> {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.c_var, "c_var"),
            (self.phi_a, "phi_a"),
            (self.phi_b, "phi_b"),
            (self.sigma_r, "sigma_r"),
            (self.s_sigma, "s_sigma"),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(domain(format!("SV prior {name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    /// Prior mean of `φ`: `2 a / (a + b) - 1`.
    pub fn phi_prior_mean(&self) -> T {
        T::lit(2.0) * self.phi_a / (self.phi_a + self.phi_b) - T::one()
    }

    /// Prior mean of `σ_η²`, finite when `sigma_r > 2`.
    pub fn sigma_eta2_prior_mean(&self) -> T {
        (self.s_sigma / T::lit(2.0)) / (self.sigma_r / T::lit(2.0) - T::one())
    }
}

/// `ln p(y | h)` where `y = ε exp(h/2)` and `ε` follows `mix`:
/// `ln Σᵢ πᵢ N(y; μᵢ e^{h/2}, e^{h} / sᵢ)`.
#[inline]
pub fn sv_log_obs_density<T: Real>(y: T, h: T, mix: &MixtureState<T>) -> T {
    let half = T::lit(0.5);
    let scale = (half * h).exp();
    let var_scale = h.exp();
    let base = -half * (T::TAU().ln() + h);
    let mut max = T::neg_infinity();
    let mut acc = T::zero();
    for c in mix.components() {
        let d = y - c.mean * scale;
        let t = c.weight.ln() + base + half * c.precision.ln() - half * c.precision * d * d / var_scale;
        if t > max {
            acc = acc * (max - t).exp() + T::one();
            max = t;
        } else {
            acc = acc + (t - max).exp();
        }
    }
    max + acc.ln()
}

/// `ε_t = y_t exp(-h_t / 2)` with `h` aligned to `y`.
pub fn residuals<T: Real>(y: &[T], h: &[T]) -> Result<Vec<T>> {
    if y.len() != h.len() {
        return Err(Error::LengthMismatch(format!(
            "{} returns but {} volatilities",
            y.len(),
            h.len()
        )));
    }
    let half = T::lit(0.5);
    Ok(y.iter().zip(h).map(|(&y, &h)| y * (-half * h).exp()).collect())
}

/// What the latent-path update conditions on.
#[derive(Clone, Copy, Debug)]
pub enum Observations<'a, T> {
    Returns {
        y: &'a [T],
        mix: &'a MixtureState<T>,
    },
    /// Observation terms dropped; the path is sampled from its prior.
    Disabled,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Acceptance {
    pub accepted: u64,
    pub proposed: u64,
}

impl Acceptance {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn merge(&mut self, other: Acceptance) {
        self.accepted += other.accepted;
        self.proposed += other.proposed;
    }
}

/// Proposal mean and variance for site `t` from its conditional prior given
/// the neighbours.
pub fn h_site_proposal<T: Real>(state: &SvState<T>, t: usize) -> (T, T) {
    let (c, phi, s2) = (state.c, state.phi, state.sigma_eta2);
    let n = state.n();
    if t == 0 {
        (c + phi * (state.h[1] - c), s2)
    } else if t < n {
        let denom = T::one() + phi * phi;
        (
            c + phi * ((state.h[t - 1] - c) + (state.h[t + 1] - c)) / denom,
            s2 / denom,
        )
    } else {
        (c + phi * (state.h[n - 1] - c), s2)
    }
}

/// Single-site sweep over `h₀, …, hₙ`. `h₀` is an exact Gibbs draw; every
/// other site proposes from its conditional prior and accepts on the
/// observation-density ratio. Each site consumes one normal then one uniform.
pub fn update_h<T: Real>(
    state: &mut SvState<T>,
    obs: Observations<'_, T>,
    rng: &mut RngStream,
) -> Result<Acceptance> {
    let n = state.n();
    if let Observations::Returns { y, .. } = obs {
        if y.len() != n {
            return Err(Error::LengthMismatch(format!(
                "{} returns for a path of {n} sites",
                y.len()
            )));
        }
    }
    let mut acc = Acceptance::default();
    let (m0, v0) = h_site_proposal(state, 0);
    state.h[0] = sample_normal(m0, v0, rng)?;
    for t in 1..=n {
        let (m, v) = h_site_proposal(state, t);
        let proposal = sample_normal(m, v, rng)?;
        let u = T::open_unit(rng);
        let ln_ratio = match obs {
            Observations::Returns { y, mix } => {
                sv_log_obs_density(y[t - 1], proposal, mix) - sv_log_obs_density(y[t - 1], state.h[t], mix)
            }
            Observations::Disabled => T::zero(),
        };
        acc.proposed += 1;
        if u.ln() < ln_ratio {
            state.h[t] = proposal;
            acc.accepted += 1;
        }
    }
    Ok(acc)
}

/// Shape and scale of the inverse-gamma conditional of `σ_η²`.
pub fn sigma_eta2_conditional<T: Real>(state: &SvState<T>, priors: &SvPriors<T>) -> (T, T) {
    let (c, phi) = (state.c, state.phi);
    let h0 = state.h[0] - c;
    let mut ss = h0 * h0 * (T::one() - phi * phi);
    for w in state.h.windows(2) {
        let e = (w[1] - c) - phi * (w[0] - c);
        ss = ss + e * e;
    }
    let n = T::from_usize(state.n()).expect("length");
    let two = T::lit(2.0);
    ((priors.sigma_r + n + T::one()) / two, (priors.s_sigma + ss) / two)
}

pub fn update_sigma_eta<T: Real>(
    state: &SvState<T>,
    priors: &SvPriors<T>,
    rng: &mut RngStream,
) -> Result<T> {
    let (shape, scale) = sigma_eta2_conditional(state, priors);
    Ok(sample_inverse_gamma(shape, scale, rng)?.max(T::min_positive_value()))
}

/// Mean and variance of the Gaussian proposal for `φ`, or `None` when the
/// path carries no information about it.
pub fn phi_proposal<T: Real>(state: &SvState<T>) -> Option<(T, T)> {
    let c = state.c;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for w in state.h.windows(2) {
        let x = w[0] - c;
        sxx = sxx + x * x;
        sxy = sxy + (w[1] - c) * x;
    }
    if !(sxx > T::zero()) || !sxx.is_finite() {
        return None;
    }
    Some((sxy / sxx, state.sigma_eta2 / sxx))
}

/// `ln g(φ)`: Beta prior on `(φ + 1) / 2` times the stationary density of `h₀`,
/// up to constants. `-inf` outside `(-1, 1)`.
pub fn ln_phi_weight<T: Real>(phi: T, state: &SvState<T>, priors: &SvPriors<T>) -> T {
    if !(phi.abs() < T::one()) {
        return T::neg_infinity();
    }
    let half = T::lit(0.5);
    let one_m = T::one() - phi * phi;
    let h0 = state.h[0] - state.c;
    ln_beta_pdf((phi + T::one()) * half, priors.phi_a, priors.phi_b) + half * one_m.ln()
        - h0 * h0 * one_m / (T::lit(2.0) * state.sigma_eta2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiStep {
    Accepted,
    Rejected,
    /// Degenerate path; φ kept.
    Skipped,
}

/// Independence Metropolis-Hastings step for `φ` with an arbitrary log-weight;
/// proposals outside `(-1, 1)` are always rejected. Consumes one normal and
/// one uniform unless skipped.
pub fn update_phi_with<T: Real>(
    state: &mut SvState<T>,
    ln_weight: impl Fn(T, &SvState<T>) -> T,
    rng: &mut RngStream,
) -> Result<PhiStep> {
    let Some((mean, var)) = phi_proposal(state) else {
        log::warn!("phi update skipped: sum of squared lagged deviations is zero");
        return Ok(PhiStep::Skipped);
    };
    let proposal = sample_normal(mean, var, rng)?;
    let u = T::open_unit(rng);
    if !(proposal.abs() < T::one()) {
        return Ok(PhiStep::Rejected);
    }
    let ln_ratio = ln_weight(proposal, state) - ln_weight(state.phi, state);
    if u.ln() < ln_ratio {
        state.phi = proposal;
        Ok(PhiStep::Accepted)
    } else {
        Ok(PhiStep::Rejected)
    }
}

pub fn update_phi<T: Real>(
    state: &mut SvState<T>,
    priors: &SvPriors<T>,
    rng: &mut RngStream,
) -> Result<PhiStep> {
    update_phi_with(state, |phi, s| ln_phi_weight(phi, s, priors), rng)
}

/// Mean and variance of the Gaussian conditional of `c`.
pub fn c_conditional<T: Real>(state: &SvState<T>, priors: &SvPriors<T>) -> (T, T) {
    let phi = state.phi;
    let s2 = state.sigma_eta2;
    let one = T::one();
    let n = T::from_usize(state.n()).expect("length");
    let stat = one - phi * phi;
    let data_precision = (stat + n * (one - phi) * (one - phi)) / s2;
    let mut transition_sum = T::zero();
    for w in state.h.windows(2) {
        transition_sum = transition_sum + (w[1] - phi * w[0]);
    }
    let linear = (stat * state.h[0] + (one - phi) * transition_sum) / s2;
    let precision = data_precision + priors.c_var.recip();
    ((linear + priors.c_mean / priors.c_var) / precision, precision.recip())
}

pub fn update_c<T: Real>(state: &SvState<T>, priors: &SvPriors<T>, rng: &mut RngStream) -> Result<T> {
    let (m, v) = c_conditional(state, priors);
    sample_normal(m, v, rng)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SvSweepStats {
    pub h: Acceptance,
    pub phi: Acceptance,
}

/// `h`, then `σ_η²`, `φ`, `c`.
pub fn sv_sweep<T: Real>(
    state: &mut SvState<T>,
    obs: Observations<'_, T>,
    priors: &SvPriors<T>,
    rng: &mut RngStream,
) -> Result<SvSweepStats> {
    let h = update_h(state, obs, rng)?;
    state.sigma_eta2 = update_sigma_eta(state, priors, rng)?;
    let mut phi = Acceptance::default();
    match update_phi(state, priors, rng)? {
        PhiStep::Accepted => {
            phi.accepted += 1;
            phi.proposed += 1;
        }
        PhiStep::Rejected => phi.proposed += 1,
        PhiStep::Skipped => {}
    }
    state.c = update_c(state, priors, rng)?;
    Ok(SvSweepStats { h, phi })
}

/// One draw from the mixture.
pub fn sample_mixture<T: Real>(mix: &MixtureState<T>, rng: &mut RngStream) -> Result<T> {
    let comps = mix.components();
    let i = if comps.len() == 1 {
        0
    } else {
        let w = mix.weights();
        categorical_scan(&w, w.iter().copied().sum(), rng)
    };
    sample_normal(comps[i].mean, comps[i].variance(), rng)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvPath<T> {
    pub y: Vec<T>,
    /// `h₀, …, hₙ`.
    pub h: Vec<T>,
    pub eps: Vec<T>,
}

/// Forward simulation. `sigma_eta2 = 0` gives a constant path at `c`.
pub fn simulate_sv<T: Real>(
    c: T,
    phi: T,
    sigma_eta2: T,
    mix: &MixtureState<T>,
    n: usize,
    rng: &mut RngStream,
) -> Result<SvPath<T>> {
    if !(phi.abs() < T::one()) {
        return Err(domain(format!("|phi| must be < 1, got {phi}")));
    }
    if !(sigma_eta2 >= T::zero()) || !sigma_eta2.is_finite() || !c.is_finite() {
        return Err(domain("sigma_eta^2 must be non-negative and c finite"));
    }
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    let noisy = sigma_eta2 > T::zero();
    let mut h = Vec::with_capacity(n + 1);
    h.push(if noisy {
        sample_normal(c, sigma_eta2 / (T::one() - phi * phi), rng)?
    } else {
        c
    });
    let mut y = Vec::with_capacity(n);
    let mut eps = Vec::with_capacity(n);
    let half = T::lit(0.5);
    for t in 1..=n {
        let mean = c + phi * (h[t - 1] - c);
        let ht = if noisy { sample_normal(mean, sigma_eta2, rng)? } else { mean };
        h.push(ht);
        let e = sample_mixture(mix, rng)?;
        eps.push(e);
        y.push(e * (half * ht).exp());
    }
    Ok(SvPath { y, h, eps })
}
