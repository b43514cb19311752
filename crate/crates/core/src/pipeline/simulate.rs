use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::export::{ensure_dir, write_file};
use crate::error::{Error, Result};
use crate::kernels::RngStream;
use crate::mixture::MixtureState;
use crate::sv::{sample_mixture, simulate_sv};

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateParams {
    pub n: usize,
    pub c: f64,
    pub phi: f64,
    pub sigma_eta: f64,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub seed: u64,
    /// Draw plain mixture samples with no volatility process.
    pub mixture_only: bool,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            n: 500,
            c: -0.2,
            phi: 0.95,
            sigma_eta: 0.15,
            weights: vec![1.0],
            means: vec![0.0],
            variances: vec![1.0],
            seed: 1,
            mixture_only: false,
        }
    }
}

impl SimulateParams {
    pub fn mixture(&self) -> Result<MixtureState<f64>> {
        if self.variances.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("variances must be positive".into()));
        }
        let prec: Vec<f64> = self.variances.iter().map(|v| v.recip()).collect();
        MixtureState::from_parts(&self.weights, &self.means, &prec)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulated {
    pub y: Vec<f64>,
    /// `h₁..hₙ`, absent for mixture-only output.
    pub h: Option<Vec<f64>>,
    pub eps: Vec<f64>,
}

pub fn simulate(p: &SimulateParams) -> Result<Simulated> {
    if p.n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let mix = p.mixture()?;
    let mut rng = RngStream::new(p.seed, 0);
    if p.mixture_only {
        let y = (0..p.n).map(|_| sample_mixture(&mix, &mut rng)).collect::<Result<Vec<_>>>()?;
        return Ok(Simulated {
            eps: y.clone(),
            y,
            h: None,
        });
    }
    if !(p.sigma_eta >= 0.0) {
        return Err(Error::Config("sigma_eta must be non-negative".into()));
    }
    let path = simulate_sv(p.c, p.phi, p.sigma_eta * p.sigma_eta, &mix, p.n, &mut rng)?;
    Ok(Simulated {
        y: path.y,
        h: Some(path.h[1..].to_vec()),
        eps: path.eps,
    })
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Writes `data.csv` (`t,y[,h,eps]`) and `meta.txt` with the generating parameters.
pub fn write_simulation(p: &SimulateParams, sim: &Simulated, dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let mut data = String::new();
    match &sim.h {
        Some(h) => {
            data.push_str("t,y,h,eps\n");
            for t in 0..sim.y.len() {
                let _ = writeln!(data, "{},{},{},{}", t + 1, sim.y[t], h[t], sim.eps[t]);
            }
        }
        None => {
            data.push_str("t,y\n");
            for (t, y) in sim.y.iter().enumerate() {
                let _ = writeln!(data, "{},{}", t + 1, y);
            }
        }
    }
    let path = write_file(dir, "data.csv", &data)?;
    let mut meta = String::new();
    let _ = writeln!(meta, "n = {}", p.n);
    let _ = writeln!(meta, "seed = {}", p.seed);
    let _ = writeln!(meta, "mixture_only = {}", p.mixture_only);
    if !p.mixture_only {
        let _ = writeln!(meta, "c = {}", p.c);
        let _ = writeln!(meta, "phi = {}", p.phi);
        let _ = writeln!(meta, "sigma_eta = {}", p.sigma_eta);
    }
    let _ = writeln!(meta, "weights = {}", join(&p.weights));
    let _ = writeln!(meta, "means = {}", join(&p.means));
    let _ = writeln!(meta, "variances = {}", join(&p.variances));
    write_file(dir, "meta.txt", &meta)?;
    Ok(path)
}
