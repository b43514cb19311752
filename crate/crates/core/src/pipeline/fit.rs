use std::collections::BTreeMap;

use super::config::{Innovation, Mode, RunConfig};
use super::returns::ReturnSeries;
use super::traces::{Draw, Traces};
use crate::bdmcmc::{BirthDeathConfig, BirthDeathLog};
use crate::diagnostics::{deviance, modal_k};
use crate::error::Result;
use crate::gibbs::{mixture_sweep, SweepConfig};
use crate::kernels::{sample_normal, RngStream};
use crate::mixture::{Evidence, MixturePriors, MixtureState};
use crate::real::Real;
use crate::sv::{residuals, sv_sweep, Acceptance, Observations, SvPriors, SvState};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainReport {
    pub h_acceptance: Acceptance,
    pub phi_acceptance: Acceptance,
    pub bd_runs: usize,
    pub bd_births: usize,
    pub bd_deaths: usize,
    pub bd_truncations: usize,
}

impl ChainReport {
    fn record(&mut self, log: &BirthDeathLog) {
        self.bd_runs += 1;
        self.bd_births += log.births;
        self.bd_deaths += log.deaths;
        self.bd_truncations += usize::from(log.truncated);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOutput {
    pub config: RunConfig,
    pub traces: Traces,
    /// Post-burn-in `k` draws of the selection run, per chain; empty when it did not run.
    pub stage1_k: Vec<Vec<usize>>,
    pub selected_k: Option<usize>,
    pub reports: Vec<ChainReport>,
    /// Retained `h₁..hₙ` per chain, when `save_h` is set.
    pub h_draws: Option<Vec<Vec<Vec<f64>>>>,
    pub warnings: Vec<String>,
}

impl FitOutput {
    /// The `k` draws that make up the posterior of `k`.
    pub fn k_posterior_draws(&self) -> Vec<usize> {
        if self.stage1_k.iter().any(|c| !c.is_empty()) {
            self.stage1_k.iter().flatten().copied().collect()
        } else {
            self.traces.ks()
        }
    }
}

fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// `k` equal-weight components with means at evenly spaced sample quantiles
/// and a common precision of `1 / var(data)`.
pub fn initial_mixture(data: &[f64], k: usize) -> Result<MixtureState<f64>> {
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let prec = sample_variance(data).recip();
    let means: Vec<f64> = (0..k)
        .map(|i| crate::diagnostics::quantile_sorted(&sorted, (i as f64 + 0.5) / k as f64))
        .collect();
    MixtureState::from_parts(&vec![1.0 / k as f64; k], &means, &vec![prec; k])
}

fn start_mixture(cfg: &RunConfig, eps: &[f64], k: usize) -> Result<MixtureState<f64>> {
    match &cfg.start {
        Some(s) if s.weights.len() == k => {
            let prec: Vec<f64> = s.variances.iter().map(|v| v.recip()).collect();
            let total: f64 = s.weights.iter().sum();
            let w: Vec<f64> = s.weights.iter().map(|w| w / total).collect();
            MixtureState::from_parts(&w, &s.means, &prec)
        }
        _ => initial_mixture(eps, k),
    }
}

/// Per-chain overdispersed starting values around the flat path `ln var(y)`.
fn initial_sv(y: &[f64], rng: &mut RngStream) -> Result<SvState<f64>> {
    let c0 = sample_variance(y).ln() + sample_normal(0.0, 0.01, rng)?;
    let phi0 = 0.85 + 0.1 * f64::open_unit(rng);
    let s0 = 0.05 * (0.5 + f64::open_unit(rng));
    SvState::flat(y.len(), c0, phi0, s0)
}

struct ChainStart {
    rng: RngStream,
    sv: SvState<f64>,
    priors: MixturePriors<f64>,
    eps0: Vec<f64>,
    stage1_k: Vec<usize>,
    last_by_k: BTreeMap<usize, MixtureState<f64>>,
    mix: MixtureState<f64>,
    report: ChainReport,
}

fn bd_config(cfg: &RunConfig) -> BirthDeathConfig<f64> {
    BirthDeathConfig {
        birth_rate: cfg.lambda_b,
        virtual_time: cfg.virtual_time,
        ..Default::default()
    }
}

fn runs_selection(cfg: &RunConfig) -> bool {
    cfg.innovation == Innovation::Mixture && cfg.mode == Mode::BdInit && cfg.fixed_k.is_none()
}

fn prepare_chain(cfg: &RunConfig, y: &[f64], chain: usize) -> Result<ChainStart> {
    let mut rng = RngStream::new(cfg.seed, chain as u64);
    let sv = initial_sv(y, &mut rng)?;
    let eps0 = residuals(y, sv.observed_h())?;
    let priors = MixturePriors::from_data(&eps0, cfg.lambda, cfg.kmax, &mut rng)?;
    let k0 = cfg.fixed_k.or(cfg.k_init).unwrap_or(1);
    let mix = match cfg.innovation {
        Innovation::Normal => MixtureState::standard(),
        Innovation::Mixture => start_mixture(cfg, &eps0, k0)?,
    };
    let mut start = ChainStart {
        rng,
        sv,
        priors,
        eps0,
        stage1_k: Vec::new(),
        last_by_k: BTreeMap::new(),
        mix,
        report: ChainReport::default(),
    };
    if runs_selection(cfg) {
        let sweep = SweepConfig {
            birth_death: Some(bd_config(cfg)),
        };
        for it in 0..cfg.bd_iters {
            let out = mixture_sweep(&start.mix, Evidence::Data(&start.eps0), &mut start.priors, &sweep, &mut start.rng)?;
            if let Some(log) = &out.birth_death {
                start.report.record(log);
            }
            start.mix = out.state;
            if it >= cfg.bd_burnin {
                start.stage1_k.push(start.mix.k());
                start.last_by_k.insert(start.mix.k(), start.mix.clone());
            }
        }
    }
    Ok(start)
}

struct ChainResult {
    draws: Vec<Draw>,
    h: Vec<Vec<f64>>,
    report: ChainReport,
}

fn run_chain(cfg: &RunConfig, y: &[f64], mut start: ChainStart) -> Result<ChainResult> {
    let sv_priors = SvPriors::default();
    let rng = &mut start.rng;
    let mut sv = start.sv;
    let mut mix = start.mix;
    let mut priors = start.priors;
    let mut report = start.report;
    let sweep = SweepConfig {
        birth_death: (cfg.mode == Mode::FullBd && cfg.fixed_k.is_none()).then(|| bd_config(cfg)),
    };
    let mut draws = Vec::new();
    let mut hs = Vec::new();
    for it in 0..cfg.iterations {
        if cfg.innovation == Innovation::Mixture {
            let eps = residuals(y, sv.observed_h())?;
            let out = mixture_sweep(&mix, Evidence::Data(&eps), &mut priors, &sweep, rng)?;
            if let Some(log) = &out.birth_death {
                report.record(log);
            }
            mix = out.state;
        }
        let stats = sv_sweep(&mut sv, Observations::Returns { y, mix: &mix }, &sv_priors, rng)?;
        report.h_acceptance.merge(stats.h);
        report.phi_acceptance.merge(stats.phi);
        if it >= cfg.burnin && (it - cfg.burnin) % cfg.thin == 0 {
            draws.push(Draw {
                iteration: it + 1,
                c: sv.c,
                phi: sv.phi,
                sigma_eta: sv.sigma_eta2.sqrt(),
                deviance: deviance(y, sv.observed_h(), &mix)?,
                weights: mix.weights(),
                means: mix.means(),
                precisions: mix.precisions(),
            });
            if cfg.save_h {
                hs.push(sv.observed_h().to_vec());
            }
        }
    }
    Ok(ChainResult { draws, h: hs, report })
}

/// Runs every chain of the configured fit on `data`. Chains run concurrently
/// on independent streams `(seed, chain)`; results are gathered in chain order.
pub fn fit(cfg: &RunConfig, data: &ReturnSeries) -> Result<FitOutput> {
    cfg.validate()?;
    let y = &data.values;
    let starts: Vec<Result<ChainStart>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|c| s.spawn(move || prepare_chain(cfg, y, c)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    let mut starts = starts.into_iter().collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    let stage1_k: Vec<Vec<usize>> = starts.iter().map(|s| s.stage1_k.clone()).collect();
    let selected_k = if runs_selection(cfg) {
        let pooled: Vec<usize> = stage1_k.iter().flatten().copied().collect();
        let k = modal_k(&pooled).expect("bd_iters > bd_burnin");
        for (ci, st) in starts.iter_mut().enumerate() {
            st.mix = match st.last_by_k.get(&k) {
                Some(m) => m.clone(),
                None => {
                    warnings.push(format!(
                        "chain {} never visited the selected k = {k}; starting from a spread mixture",
                        ci + 1
                    ));
                    initial_mixture(&st.eps0, k)?
                }
            };
        }
        Some(k)
    } else {
        cfg.fixed_k
    };

    let results: Vec<Result<ChainResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = starts
            .into_iter()
            .map(|st| s.spawn(move || run_chain(cfg, y, st)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    for (ci, r) in results.iter().enumerate() {
        for (name, acc) in [("h", r.report.h_acceptance), ("phi", r.report.phi_acceptance)] {
            let rate = acc.rate();
            if acc.proposed > 0 && !(0.1..=0.9).contains(&rate) {
                warnings.push(format!("chain {}: {name} acceptance rate {rate:.3} outside [0.1, 0.9]", ci + 1));
            }
        }
        if r.report.bd_truncations > 0 {
            warnings.push(format!(
                "chain {}: {} birth-death runs hit the jump limit",
                ci + 1,
                r.report.bd_truncations
            ));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let reports = results.iter().map(|r| r.report.clone()).collect();
    let h_draws = cfg.save_h.then(|| results.iter().map(|r| r.h.clone()).collect());
    Ok(FitOutput {
        config: cfg.clone(),
        traces: Traces {
            chains: results.into_iter().map(|r| r.draws).collect(),
        },
        stage1_k,
        selected_k,
        reports,
        h_draws,
        warnings,
    })
}
