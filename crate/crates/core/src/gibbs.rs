//! Fixed-k Gibbs updates for the mixture, using latent allocations.
//!
//! Each sweep: optional birth-death run, allocations, means, precisions,
//! weights, then the precision hyperparameter `β`.

use crate::bdmcmc::{run_birth_death, BirthDeathConfig, BirthDeathLog};
use crate::error::Result;
use crate::kernels::{sample_dirichlet, sample_gamma, sample_log_categorical, sample_normal, RngStream};
use crate::mixture::{Evidence, MixturePriors, MixtureState};
use crate::real::Real;

/// Component index of every observation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Allocations {
    pub z: Vec<usize>,
}

impl Allocations {
    pub fn counts(&self, k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for &z in &self.z {
            counts[z] += 1;
        }
        counts
    }
}

/// Normalized allocation probabilities of a single observation.
pub fn allocation_probabilities<T: Real>(state: &MixtureState<T>, y: T) -> Vec<T> {
    let logs: Vec<T> = state
        .components()
        .iter()
        .map(|c| c.ln_weighted_density(y))
        .collect();
    let norm = crate::kernels::log_sum_exp(&logs);
    logs.into_iter().map(|l| (l - norm).exp()).collect()
}

pub fn sample_allocations<T: Real>(
    state: &MixtureState<T>,
    data: &[T],
    rng: &mut RngStream,
) -> Allocations {
    let k = state.k();
    if k == 1 {
        return Allocations {
            z: vec![0; data.len()],
        };
    }
    let mut logs = Vec::with_capacity(k);
    let mut scratch = Vec::with_capacity(k);
    let z = data
        .iter()
        .map(|&y| {
            logs.clear();
            logs.extend(state.components().iter().map(|c| c.ln_weighted_density(y)));
            sample_log_categorical(&logs, &mut scratch, rng)
        })
        .collect();
    Allocations { z }
}

/// Per-component count and data sum.
fn sufficient_stats<T: Real>(data: &[T], z: &Allocations, k: usize) -> (Vec<usize>, Vec<T>) {
    let mut counts = vec![0usize; k];
    let mut sums = vec![T::zero(); k];
    for (&y, &i) in data.iter().zip(&z.z) {
        counts[i] += 1;
        sums[i] = sums[i] + y;
    }
    (counts, sums)
}

/// Mean and variance of the conditional of each component mean.
pub fn mean_conditionals<T: Real>(
    state: &MixtureState<T>,
    data: &[T],
    z: &Allocations,
    priors: &MixturePriors<T>,
) -> Vec<(T, T)> {
    let (counts, sums) = sufficient_stats(data, z, state.k());
    state
        .components()
        .iter()
        .zip(counts.iter().zip(&sums))
        .map(|(c, (&n, &sum))| {
            let n = T::from_usize(n).expect("count");
            let precision = c.precision * n + priors.tau;
            ((c.precision * sum + priors.tau * priors.zeta) / precision, precision.recip())
        })
        .collect()
}

pub fn update_means<T: Real>(
    state: &MixtureState<T>,
    data: &[T],
    z: &Allocations,
    priors: &MixturePriors<T>,
    rng: &mut RngStream,
) -> Result<Vec<T>> {
    mean_conditionals(state, data, z, priors)
        .into_iter()
        .map(|(m, v)| sample_normal(m, v, rng))
        .collect()
}

/// Shape and rate of the Gamma conditional of each precision.
pub fn precision_conditionals<T: Real>(
    state: &MixtureState<T>,
    data: &[T],
    z: &Allocations,
    priors: &MixturePriors<T>,
) -> Vec<(T, T)> {
    let k = state.k();
    let mut counts = vec![0usize; k];
    let mut ss = vec![T::zero(); k];
    let comps = state.components();
    for (&y, &i) in data.iter().zip(&z.z) {
        counts[i] += 1;
        let d = y - comps[i].mean;
        ss[i] = ss[i] + d * d;
    }
    let two = T::lit(2.0);
    counts
        .into_iter()
        .zip(ss)
        .map(|(n, s)| {
            let n = T::from_usize(n).expect("count");
            (two * priors.alpha + n / two, two * priors.beta + s / two)
        })
        .collect()
}

/// Draws precisions given the means currently in `state`.
pub fn update_precisions<T: Real>(
    state: &MixtureState<T>,
    data: &[T],
    z: &Allocations,
    priors: &MixturePriors<T>,
    rng: &mut RngStream,
) -> Result<Vec<T>> {
    precision_conditionals(state, data, z, priors)
        .into_iter()
        .map(|(shape, rate)| Ok(sample_gamma(shape, rate.recip(), rng)?.max(T::min_positive_value())))
        .collect()
}

pub fn update_weights<T: Real>(
    state: &MixtureState<T>,
    z: &Allocations,
    priors: &MixturePriors<T>,
    rng: &mut RngStream,
) -> Result<Vec<T>> {
    let conc: Vec<T> = z
        .counts(state.k())
        .into_iter()
        .map(|n| priors.gamma + T::from_usize(n).expect("count"))
        .collect();
    let mut w = sample_dirichlet(&conc, rng)?;
    // Keep every weight strictly inside (0, 1].
    let floor = T::min_positive_value();
    if w.iter().any(|&x| x < floor) {
        for x in &mut w {
            *x = x.max(floor);
        }
        let total: T = w.iter().copied().sum();
        for x in &mut w {
            *x = *x / total;
        }
    }
    Ok(w)
}

/// Shape and rate of the Gamma conditional of `β`.
pub fn beta_conditional<T: Real>(state: &MixtureState<T>, priors: &MixturePriors<T>) -> (T, T) {
    let two = T::lit(2.0);
    let k = T::from_usize(state.k()).expect("small integer");
    let total: T = state.components().iter().map(|c| c.precision).sum();
    (two * priors.l + two * k * priors.alpha, two * priors.m + two * total)
}

pub fn update_beta_hyper<T: Real>(
    state: &MixtureState<T>,
    priors: &MixturePriors<T>,
    rng: &mut RngStream,
) -> Result<T> {
    let (shape, rate) = beta_conditional(state, priors);
    Ok(sample_gamma(shape, rate.recip(), rng)?.max(T::min_positive_value()))
}

#[derive(Clone, Debug, Default)]
pub struct SweepConfig<T> {
    /// `Some` runs the birth-death process before the Gibbs updates.
    pub birth_death: Option<BirthDeathConfig<T>>,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome<T> {
    pub state: MixtureState<T>,
    pub birth_death: Option<BirthDeathLog>,
}

/// One full sweep. `priors.beta` is updated in place.
pub fn mixture_sweep<T: Real>(
    state: &MixtureState<T>,
    evidence: Evidence<'_, T>,
    priors: &mut MixturePriors<T>,
    cfg: &SweepConfig<T>,
    rng: &mut RngStream,
) -> Result<SweepOutcome<T>> {
    let (mut current, bd_log) = match &cfg.birth_death {
        Some(bd) => {
            let (s, log) = run_birth_death(state, evidence, priors, bd, rng)?;
            (s, Some(log))
        }
        None => (state.clone(), None),
    };
    let data = evidence.data();
    let z = sample_allocations(&current, data, rng);

    let means = update_means(&current, data, &z, priors, rng)?;
    for (c, m) in current.components_mut().iter_mut().zip(means) {
        c.mean = m;
    }
    let precisions = update_precisions(&current, data, &z, priors, rng)?;
    for (c, s) in current.components_mut().iter_mut().zip(precisions) {
        c.precision = s;
    }
    let weights = update_weights(&current, &z, priors, rng)?;
    current = MixtureState::from_parts(&weights, &current.means(), &current.precisions())?;
    priors.beta = update_beta_hyper(&current, priors, rng)?;

    Ok(SweepOutcome {
        state: current,
        birth_death: bd_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::test_support::mean_se;
    use approx::assert_relative_eq;

    fn priors() -> MixturePriors<f64> {
        MixturePriors::from_range(-1.0, 1.0, 1.0, 10, 1.0).unwrap()
    }

    #[test]
    fn single_component_allocations() {
        let mut rng = RngStream::new(1, 0);
        let s = MixtureState::<f64>::standard();
        let z = sample_allocations(&s, &[1.0, 2.0, -3.0], &mut rng);
        assert_eq!(z.z, vec![0, 0, 0]);
    }

    #[test]
    fn symmetric_allocation_probabilities() {
        let s = MixtureState::<f64>::from_parts(&[0.5, 0.5], &[0.3, 0.3], &[2.0, 2.0]).unwrap();
        for y in [-2.0, 0.0, 0.3, 5.0] {
            for p in allocation_probabilities(&s, y) {
                assert!((p - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn allocation_probabilities_match_hand_normalization() {
        let s = MixtureState::from_parts(&[0.3, 0.7], &[-1.0, 1.0], &[1.0, 4.0]).unwrap();
        for y in [-0.5, 0.2, 1.7] {
            let dens = |w: f64, m: f64, p: f64| {
                w * (p / std::f64::consts::TAU).sqrt() * (-0.5 * p * (y - m) * (y - m)).exp()
            };
            let a = dens(0.3, -1.0, 1.0);
            let b = dens(0.7, 1.0, 4.0);
            let probs = allocation_probabilities(&s, y);
            assert!((probs[0] - a / (a + b)).abs() < 1e-12);
            assert!((probs[1] - b / (a + b)).abs() < 1e-12);
        }
    }

    #[test]
    fn allocation_frequencies() {
        let s = MixtureState::from_parts(&[0.3, 0.7], &[-1.0, 1.0], &[1.0, 4.0]).unwrap();
        let probs = allocation_probabilities(&s, 0.2);
        let mut rng = RngStream::new(4, 0);
        let n = 100_000;
        let data = vec![0.2; n];
        let z = sample_allocations(&s, &data, &mut rng);
        let f = z.counts(2)[0] as f64 / n as f64;
        assert!((f - probs[0]).abs() < 3.0 * (probs[0] * probs[1] / n as f64).sqrt());
    }

    #[test]
    fn empty_component_means_follow_prior() {
        let pr = priors();
        let s = MixtureState::from_parts(&[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let z = Allocations { z: vec![0, 0] };
        let cond = mean_conditionals(&s, &[1.0, 2.0], &z, &pr);
        assert_eq!(cond[1], (pr.zeta, 1.0 / pr.tau));
    }

    #[test]
    fn conjugate_mean_plug_in() {
        let mut pr = priors();
        pr.tau = 1.0;
        pr.zeta = 0.0;
        let s = MixtureState::from_parts(&[1.0], &[0.0], &[1.0]).unwrap();
        let z = Allocations { z: vec![0] };
        assert_eq!(mean_conditionals(&s, &[2.0], &z, &pr), vec![(1.0, 0.5)]);
    }

    /// Mean and variance of an unnormalized log-density by trapezoidal quadrature.
    fn grid_moments(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (f64, f64) {
        let h = (hi - lo) / n as f64;
        let xs: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
        let lv: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let max = lv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lv
            .iter()
            .enumerate()
            .map(|(i, l)| (l - max).exp() * if i == 0 || i == n { 0.5 } else { 1.0 })
            .collect();
        let z: f64 = w.iter().sum();
        let mean = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / z;
        let var = xs.iter().zip(&w).map(|(x, w)| (x - mean).powi(2) * w).sum::<f64>() / z;
        (mean, var)
    }

    #[test]
    fn mean_conditional_matches_grid() {
        let pr = MixturePriors::from_range(-2.0, 3.0, 1.0, 10, 1.0).unwrap();
        let data = [0.4, -0.3, 1.9, 2.2, 0.8];
        let z = Allocations { z: vec![0, 0, 1, 1, 0] };
        let s = MixtureState::from_parts(&[0.5, 0.5], &[0.0, 2.0], &[2.5, 0.8]).unwrap();
        let cond = mean_conditionals(&s, &data, &z, &pr);
        for (i, &(m, v)) in cond.iter().enumerate() {
            let prec = s.components()[i].precision;
            let logf = |mu: f64| {
                let mut l = -0.5 * pr.tau * (mu - pr.zeta).powi(2);
                for (&y, &zi) in data.iter().zip(&z.z) {
                    if zi == i {
                        l -= 0.5 * prec * (y - mu).powi(2);
                    }
                }
                l
            };
            let (gm, gv) = grid_moments(logf, m - 12.0 * v.sqrt(), m + 12.0 * v.sqrt(), 20_000);
            assert!((gm - m).abs() < 1e-6, "mean {gm} vs {m}");
            assert!((gv - v).abs() < 1e-6, "var {gv} vs {v}");
        }
    }

    #[test]
    fn precision_conditionals_plug_in() {
        let mut pr = priors();
        pr.alpha = 2.0;
        pr.beta = 1.0;
        let s = MixtureState::from_parts(&[0.5, 0.5], &[1.0, 0.0], &[1.0, 1.0]).unwrap();
        let z = Allocations { z: vec![0] };
        let cond = precision_conditionals(&s, &[1.0], &z, &pr);
        assert_eq!(cond, vec![(4.5, 2.0), (4.0, 2.0)]);
    }

    #[test]
    fn precision_draw_moments() {
        let mut pr = priors();
        pr.alpha = 2.0;
        pr.beta = 1.0;
        let s = MixtureState::from_parts(&[1.0], &[0.0], &[1.0]).unwrap();
        let data = [0.5, -1.0, 0.3];
        let z = Allocations { z: vec![0; 3] };
        let (shape, rate) = precision_conditionals(&s, &data, &z, &pr)[0];
        let mut rng = RngStream::new(9, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| update_precisions(&s, &data, &z, &pr, &mut rng).unwrap()[0])
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - shape / rate).abs() < 3.0 * se, "{m} vs {}", shape / rate);
    }

    #[test]
    fn weight_draws() {
        let pr = priors();
        let s = MixtureState::from_parts(&[0.5, 0.5], &[0.0, 1.0], &[1.0, 1.0]).unwrap();
        let z = Allocations { z: vec![0, 0, 0, 1] };
        let mut rng = RngStream::new(10, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| {
                let w = update_weights(&s, &z, &pr, &mut rng).unwrap();
                assert!((w[0] + w[1] - 1.0).abs() <= 1e-12);
                w[0]
            })
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 2.0 / 3.0).abs() < 3.0 * se);

        let none = Allocations { z: vec![] };
        let s3 = MixtureState::from_parts(&[0.2, 0.3, 0.5], &[0.0; 3], &[1.0; 3]).unwrap();
        let xs: Vec<f64> = (0..100_000)
            .map(|_| update_weights(&s3, &none, &pr, &mut rng).unwrap()[2])
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 1.0 / 3.0).abs() < 3.0 * se);
    }

    #[test]
    fn beta_conditional_algebra() {
        let mut pr = priors();
        pr.l = 0.2;
        pr.m = 1.0;
        pr.alpha = 2.0;
        let s = MixtureState::from_parts(&[1.0], &[0.0], &[0.5]).unwrap();
        let (shape, rate) = beta_conditional(&s, &pr);
        assert_relative_eq!(shape, 4.4, epsilon = 1e-15);
        assert_relative_eq!(rate, 3.0, epsilon = 1e-15);
        let mut rng = RngStream::new(11, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| update_beta_hyper(&s, &pr, &mut rng).unwrap()).collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 4.4 / 3.0).abs() < 3.0 * se);
    }

    #[test]
    fn k1_sweep_is_conjugate_normal_step() {
        // BD off, k = 1: the sweep consumes the stream as mean draw, precision
        // draw, then beta; weights stay (1).
        let data = [0.3, -0.2, 0.9, 1.4];
        let mut pr = priors();
        let s = MixtureState::from_parts(&[1.0], &[0.1], &[2.0]).unwrap();
        let mut rng = RngStream::new(21, 0);
        let mut rng2 = rng.clone();
        let out = mixture_sweep(&s, Evidence::Data(&data), &mut pr, &SweepConfig::default(), &mut rng).unwrap();

        let pr0 = priors();
        let n = data.len() as f64;
        let sum: f64 = data.iter().sum();
        let prec = 2.0 * n + pr0.tau;
        let mu = sample_normal((2.0 * sum + pr0.tau * pr0.zeta) / prec, 1.0 / prec, &mut rng2).unwrap();
        let ss: f64 = data.iter().map(|y| (y - mu).powi(2)).sum();
        let s_new = sample_gamma(2.0 * pr0.alpha + n / 2.0, 1.0 / (2.0 * pr0.beta + ss / 2.0), &mut rng2).unwrap();
        assert_eq!(out.state.k(), 1);
        assert_eq!(out.state.weights(), vec![1.0]);
        assert_eq!(out.state.means(), vec![mu]);
        assert_eq!(out.state.precisions(), vec![s_new]);
    }

    #[test]
    fn sweeps_preserve_invariants() {
        let data: Vec<f64> = (0..50).map(|i| ((i * 37) % 17) as f64 / 4.0 - 2.0).collect();
        let mut rng = RngStream::new(3, 0);
        let mut pr = MixturePriors::from_data(&data, 1.0, 10, &mut rng).unwrap();
        let cfg = SweepConfig {
            birth_death: Some(BirthDeathConfig::default()),
        };
        let mut s = MixtureState::<f64>::standard();
        for _ in 0..500 {
            s = mixture_sweep(&s, Evidence::Data(&data), &mut pr, &cfg, &mut rng).unwrap().state;
            assert!((s.weight_sum() - 1.0).abs() <= 1e-12);
            assert!(s.k() >= 1 && s.k() <= 10);
            assert!(s.components().iter().all(|c| c.precision > 0.0 && c.mean.is_finite()));
            assert!(pr.beta > 0.0);
        }
    }
}
