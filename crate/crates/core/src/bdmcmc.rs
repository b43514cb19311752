//! Continuous-time birth-death process over mixture configurations.
//!
//! Births arrive at rate `λ_b` and place a new component with weight drawn
//! from `k (1 - π)^(k-1)` and `(μ, s)` from the component prior. Component `j`
//! dies at rate
//!
//! ```text
//! δⱼ = λ_b · L(state \ j) / L(state) · p(k - 1) / (k · p(k))
//! ```
//!
//! which balances the birth kernel against the reference density
//! `p(k) Π p̃(μᵢ, sᵢ)`. All rate arithmetic happens in log space.

use crate::error::{domain, Error, Result};
use crate::kernels::{
    categorical_scan, ln_truncated_poisson_pmf, sample_gamma, sample_normal, RngStream,
};
use crate::mixture::{birth, death, Component, Evidence, MixturePriors, MixtureState};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct BirthDeathConfig<T> {
    /// Birth rate `λ_b`.
    pub birth_rate: T,
    /// Virtual time simulated per call to [`run_birth_death`].
    pub virtual_time: T,
    pub max_jumps: usize,
    /// Death rates are clamped to this value.
    pub rate_ceiling: T,
}

impl<T: Real> Default for BirthDeathConfig<T> {
    fn default() -> Self {
        Self {
            birth_rate: T::one(),
            virtual_time: T::one(),
            max_jumps: 10_000,
            rate_ceiling: T::lit(1e300).min(T::max_value()),
        }
    }
}

impl<T: Real> BirthDeathConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.birth_rate > T::zero()) || !self.birth_rate.is_finite() {
            return Err(domain("birth rate must be positive"));
        }
        if !(self.virtual_time > T::zero()) || !self.virtual_time.is_finite() {
            return Err(domain("virtual time must be positive"));
        }
        if self.max_jumps == 0 {
            return Err(domain("max_jumps must be at least 1"));
        }
        if !(self.rate_ceiling > T::zero()) {
            return Err(domain("rate ceiling must be positive"));
        }
        Ok(())
    }
}

/// Per-observation `ln πᵢ + ln N(y; μᵢ, 1/sᵢ)`, row-major `n × k`.
fn weighted_log_densities<T: Real>(state: &MixtureState<T>, data: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len() * state.k());
    for &y in data {
        out.extend(state.components().iter().map(|c| c.ln_weighted_density(y)));
    }
    out
}

fn lse_skipping<T: Real>(row: &[T], skip: Option<usize>) -> T {
    let mut max = T::neg_infinity();
    for (i, &v) in row.iter().enumerate() {
        if Some(i) != skip && v > max {
            max = v;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let s: T = row
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != skip)
        .map(|(_, &v)| (v - max).exp())
        .sum();
    max + s.ln()
}

/// Death rate of every component. At `k = 1` the single rate is exactly zero
/// because `p(0) = 0`.
pub fn death_rates<T: Real>(
    state: &MixtureState<T>,
    evidence: Evidence<'_, T>,
    priors: &MixturePriors<T>,
    cfg: &BirthDeathConfig<T>,
) -> Result<Vec<T>> {
    let k = state.k();
    if let Evidence::Data(d) = evidence {
        if d.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
    }
    let ln_prior_ratio = ln_truncated_poisson_pmf(k - 1, priors.lambda, priors.kmax)
        - T::from_usize(k).expect("small integer").ln()
        - ln_truncated_poisson_pmf(k, priors.lambda, priors.kmax);
    if ln_prior_ratio == T::neg_infinity() {
        return Ok(vec![T::zero(); k]);
    }
    let ln_base = cfg.birth_rate.ln() + ln_prior_ratio;
    let ln_ceiling = cfg.rate_ceiling.ln();

    let data = evidence.data();
    let mut ln_ratio = vec![T::zero(); k];
    if !data.is_empty() {
        let table = weighted_log_densities(state, data);
        // ln(1 - πⱼ) evaluated as the log of the remaining weight mass
        let weights = state.weights();
        let total: T = weights.iter().copied().sum();
        let ln_keep: Vec<T> = weights.iter().map(|&w| (total - w).ln()).collect();
        for row in table.chunks_exact(k) {
            let full = lse_skipping(row, None);
            for (j, r) in ln_ratio.iter_mut().enumerate() {
                *r = *r + lse_skipping(row, Some(j)) - ln_keep[j] - full;
            }
        }
    }
    Ok(ln_ratio
        .into_iter()
        .map(|r| {
            let lr = ln_base + r;
            if lr.is_nan() {
                cfg.rate_ceiling
            } else {
                lr.min(ln_ceiling).exp()
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JumpEvent {
    Birth,
    Death(usize),
    /// Total rate is zero (births suppressed and no death possible); the
    /// process stays put forever.
    Idle,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jump<T> {
    pub event: JumpEvent,
    pub waiting_time: T,
}

/// Birth rate in effect at `state`; zero at `kmax` where births are suppressed.
pub fn effective_birth_rate<T: Real>(
    state: &MixtureState<T>,
    priors: &MixturePriors<T>,
    cfg: &BirthDeathConfig<T>,
) -> T {
    if state.k() >= priors.kmax {
        T::zero()
    } else {
        cfg.birth_rate
    }
}

/// Draws the next waiting time and event given the birth rate in effect and
/// the death rates, using one exponential and one uniform.
pub fn simulate_jump<T: Real>(birth_rate: T, rates: &[T], rng: &mut RngStream) -> Jump<T> {
    let total = birth_rate + rates.iter().copied().sum::<T>();
    if !(total > T::zero()) {
        return Jump {
            event: JumpEvent::Idle,
            waiting_time: T::infinity(),
        };
    }
    let waiting_time = T::standard_exponential(rng) / total;
    let mut masses = Vec::with_capacity(rates.len() + 1);
    masses.push(birth_rate);
    masses.extend_from_slice(rates);
    let event = match categorical_scan(&masses, total, rng) {
        0 => JumpEvent::Birth,
        j => JumpEvent::Death(j - 1),
    };
    Jump {
        event,
        waiting_time,
    }
}

/// Proposes a birth point: `π ~ Beta(1, k)`, `μ ~ N(ζ, 1/τ)`,
/// `s ~ Gamma(2α, scale 1/(2β))`.
pub fn sample_birth_point<T: Real>(
    state: &MixtureState<T>,
    priors: &MixturePriors<T>,
    rng: &mut RngStream,
) -> Result<Component<T>> {
    let k = T::from_usize(state.k()).expect("small integer");
    let weight = loop {
        // inverse CDF of k(1-π)^(k-1): π = 1 - U^(1/k)
        let u = T::open_unit(rng);
        let w = -(u.ln() / k).exp_m1();
        if w > T::zero() && w < T::one() {
            break w;
        }
    };
    let mean = sample_normal(priors.zeta, priors.tau.recip(), rng)?;
    let (shape, scale) = priors.precision_shape_scale();
    let precision = sample_gamma(shape, scale, rng)?.max(T::min_positive_value());
    Ok(Component::new(weight, mean, precision))
}

/// Log-density of the birth kernel `k (1 - π)^(k-1) p̃(μ, s)` at `point`.
pub fn ln_birth_density<T: Real>(
    state: &MixtureState<T>,
    point: &Component<T>,
    priors: &MixturePriors<T>,
) -> T {
    let k = T::from_usize(state.k()).expect("small integer");
    k.ln() + (k - T::one()) * (-point.weight).ln_1p()
        + priors.ln_component_density(point.mean, point.precision)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BirthDeathLog {
    pub births: usize,
    pub deaths: usize,
    pub jumps: usize,
    /// Set when `max_jumps` stopped the run before the virtual time elapsed.
    pub truncated: bool,
}

/// Simulates the jump process for `cfg.virtual_time` units of virtual time.
pub fn run_birth_death<T: Real>(
    state: &MixtureState<T>,
    evidence: Evidence<'_, T>,
    priors: &MixturePriors<T>,
    cfg: &BirthDeathConfig<T>,
    rng: &mut RngStream,
) -> Result<(MixtureState<T>, BirthDeathLog)> {
    cfg.validate()?;
    if state.k() > priors.kmax {
        return Err(Error::InvalidState(format!(
            "k = {} exceeds kmax = {}",
            state.k(),
            priors.kmax
        )));
    }
    let mut current = state.clone();
    let mut log = BirthDeathLog::default();
    let mut clock = T::zero();
    loop {
        if log.jumps >= cfg.max_jumps {
            log.truncated = true;
            break;
        }
        let rates = death_rates(&current, evidence, priors, cfg)?;
        let jump = simulate_jump(effective_birth_rate(&current, priors, cfg), &rates, rng);
        clock = clock + jump.waiting_time;
        if clock > cfg.virtual_time {
            break;
        }
        match jump.event {
            JumpEvent::Birth => {
                let point = sample_birth_point(&current, priors, rng)?;
                current = birth(&current, point, priors.kmax)?;
                log.births += 1;
            }
            JumpEvent::Death(j) => {
                current = death(&current, j)?;
                log.deaths += 1;
            }
            JumpEvent::Idle => break,
        }
        log.jumps += 1;
    }
    Ok((current, log))
}
