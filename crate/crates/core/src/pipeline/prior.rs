use crate::bdmcmc::BirthDeathConfig;
use crate::error::Result;
use crate::gibbs::{mixture_sweep, SweepConfig};
use crate::kernels::RngStream;
use crate::mixture::{Evidence, MixturePriors, MixtureState};
use crate::sv::{sv_sweep, Observations, SvPriors, SvState};

#[derive(Clone, Debug, PartialEq)]
pub struct PriorRecoveryConfig {
    pub sweeps: usize,
    pub lambda: f64,
    pub kmax: usize,
    pub birth_rate: f64,
    pub virtual_time: f64,
    /// Latent path length used by the volatility sampler.
    pub n: usize,
    /// Data range that fixes the mixture prior constants.
    pub range: (f64, f64),
    pub seed: u64,
}

impl Default for PriorRecoveryConfig {
    fn default() -> Self {
        Self {
            sweeps: 20_000,
            lambda: 1.0,
            kmax: 10,
            birth_rate: 1.0,
            virtual_time: 1.0,
            n: 5,
            range: (-1.0, 1.0),
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PriorRecoveryDraws {
    pub k: Vec<usize>,
    pub c: Vec<f64>,
    pub phi: Vec<f64>,
    pub sigma_eta2: Vec<f64>,
    pub beta: Vec<f64>,
    /// Mean of the component means at each sweep.
    pub mean_mu: Vec<f64>,
    /// Mean of `s_i β` at each sweep.
    pub mean_scaled_precision: Vec<f64>,
}

/// Runs the full sampler with every observation term removed, so each
/// chain targets its prior.
pub fn prior_recovery(cfg: &PriorRecoveryConfig) -> Result<PriorRecoveryDraws> {
    let mut rng = RngStream::new(cfg.seed, 0);
    let mut priors = MixturePriors::from_range(cfg.range.0, cfg.range.1, cfg.lambda, cfg.kmax, 1.0)?;
    let sweep = SweepConfig {
        birth_death: Some(BirthDeathConfig {
            birth_rate: cfg.birth_rate,
            virtual_time: cfg.virtual_time,
            ..Default::default()
        }),
    };
    let sv_priors = SvPriors::default();
    let mut mix = MixtureState::standard();
    let mut sv = SvState::flat(cfg.n, 0.0, 0.5, 0.1)?;
    let mut out = PriorRecoveryDraws::default();
    for _ in 0..cfg.sweeps {
        mix = mixture_sweep(&mix, Evidence::PriorOnly, &mut priors, &sweep, &mut rng)?.state;
        sv_sweep(&mut sv, Observations::Disabled, &sv_priors, &mut rng)?;
        let k = mix.k() as f64;
        out.k.push(mix.k());
        out.c.push(sv.c);
        out.phi.push(sv.phi);
        out.sigma_eta2.push(sv.sigma_eta2);
        out.beta.push(priors.beta);
        out.mean_mu.push(mix.means().iter().sum::<f64>() / k);
        out.mean_scaled_precision
            .push(mix.precisions().iter().map(|s| s * priors.beta).sum::<f64>() / k);
    }
    Ok(out)
}
