//! Posterior summaries and convergence diagnostics over multiple chains.

use crate::error::{Error, Result};
use crate::mixture::MixtureState;
use crate::real::Real;
use crate::sv::sv_log_obs_density;

/// Gelman-Rubin potential scale reduction for equal-length chains:
/// `sqrt(((n-1)/n W + B/n) / W)`.
pub fn gelman_rubin(chains: &[&[f64]]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: chains.len(),
        });
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::LengthMismatch("chains must have equal length".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let m = chains.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = nf / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m;
    if !(w > 0.0) {
        return Err(Error::DegenerateChains);
    }
    Ok((((nf - 1.0) / nf * w + b / nf) / w).sqrt())
}

/// R-hat after splitting each chain into halves (odd middle draw dropped).
pub fn split_gelman_rubin(chains: &[&[f64]]) -> Result<f64> {
    let mut halves = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let h = c.len() / 2;
        halves.push(&c[..h]);
        halves.push(&c[c.len() - h..]);
    }
    gelman_rubin(&halves)
}

/// Linear-interpolation quantile of sorted data at position `(n - 1) p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let pos = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

pub const SUMMARY_PROBS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub parameter: String,
    pub mean: f64,
    pub sd: f64,
    /// At [`SUMMARY_PROBS`].
    pub quantiles: [f64; 5],
    /// `None` for a single chain or zero within-chain variance.
    pub rhat: Option<f64>,
}

/// Summary of the pooled draws of one parameter; R-hat uses every chain
/// truncated to the shortest length.
pub fn summarize(parameter: &str, chains: &[Vec<f64>]) -> Result<SummaryRow> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let n = pooled.len() as f64;
    let constant = pooled.iter().all(|&v| v == pooled[0]);
    let mean = if constant { pooled[0] } else { pooled.iter().sum::<f64>() / n };
    let sd = if pooled.len() > 1 && !constant {
        (pooled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = pooled;
    sorted.sort_by(f64::total_cmp);
    let quantiles = SUMMARY_PROBS.map(|p| quantile_sorted(&sorted, p));
    let shortest = chains.iter().map(Vec::len).min().unwrap_or(0);
    let rhat = if chains.len() >= 2 && shortest >= 2 {
        let cut: Vec<&[f64]> = chains.iter().map(|c| &c[..shortest]).collect();
        gelman_rubin(&cut).ok()
    } else {
        None
    };
    Ok(SummaryRow {
        parameter: parameter.to_string(),
        mean,
        sd,
        quantiles,
        rhat,
    })
}

/// `-2 Σ ln p(y_t | h_t)`, with `h` aligned to `y`.
pub fn deviance<T: Real>(y: &[T], h: &[T], mix: &MixtureState<T>) -> Result<T> {
    if y.len() != h.len() {
        return Err(Error::LengthMismatch(format!(
            "{} returns but {} volatilities",
            y.len(),
            h.len()
        )));
    }
    let s: T = y.iter().zip(h).map(|(&y, &h)| sv_log_obs_density(y, h, mix)).sum();
    Ok(T::lit(-2.0) * s)
}

/// `(k, count)` in increasing `k`, zero counts omitted.
pub fn k_frequencies(ks: &[usize]) -> Vec<(usize, usize)> {
    let mut map = std::collections::BTreeMap::new();
    for &k in ks {
        *map.entry(k).or_insert(0) += 1;
    }
    map.into_iter().collect()
}

/// Most frequent `k`; ties go to the smaller `k`.
pub fn modal_k(ks: &[usize]) -> Option<usize> {
    k_frequencies(ks)
        .into_iter()
        .fold(None, |best: Option<(usize, usize)>, (k, n)| match best {
            Some((_, bn)) if bn >= n => best,
            _ => Some((k, n)),
        })
        .map(|(k, _)| k)
}

/// Integrated autocorrelation time by Geyer's initial monotone sequence.
/// Returns 1 for a constant or very short chain.
pub fn autocorrelation_time(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 1.0;
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    let acov = |lag: usize| {
        xs[..n - lag]
            .iter()
            .zip(&xs[lag..])
            .map(|(a, b)| (a - m) * (b - m))
            .sum::<f64>()
            / n as f64
    };
    let c0 = acov(0);
    if !(c0 > 0.0) {
        return 1.0;
    }
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (acov(2 * k) + acov(2 * k + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        k += 1;
    }
    tau.max(1.0 / n as f64)
}

/// Standard error of the mean of an autocorrelated chain.
pub fn monte_carlo_se(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (var * autocorrelation_time(xs) / n).sqrt()
}
