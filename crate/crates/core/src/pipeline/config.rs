use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    /// Birth-death on the initial residuals picks `k`, then a fixed-`k` joint fit.
    #[default]
    BdInit,
    /// Birth-death runs inside every joint iteration.
    FullBd,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bd-init" => Ok(Mode::BdInit),
            "full-bd" => Ok(Mode::FullBd),
            _ => Err(Error::Config(format!("unknown mode '{s}' (bd-init | full-bd)"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::BdInit => "bd-init",
            Mode::FullBd => "full-bd",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Innovation {
    #[default]
    Mixture,
    /// Innovations fixed to N(0, 1); the mixture is never updated.
    Normal,
}

impl FromStr for Innovation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixture" => Ok(Innovation::Mixture),
            "normal" => Ok(Innovation::Normal),
            _ => Err(Error::Config(format!("unknown innovation '{s}' (mixture | normal)"))),
        }
    }
}

impl std::fmt::Display for Innovation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Innovation::Mixture => "mixture",
            Innovation::Normal => "normal",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Transform {
    None,
    /// `100 ln(p_t / p_{t-1})`.
    #[default]
    LogReturn,
}

impl FromStr for Transform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Transform::None),
            "logret" => Ok(Transform::LogReturn),
            _ => Err(Error::Config(format!("unknown transform '{s}' (none | logret)"))),
        }
    }
}

impl std::fmt::Display for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Transform::None => "none",
            Transform::LogReturn => "logret",
        })
    }
}

/// Optional user-supplied starting mixture; variances, not precisions.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct StartMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub chains: usize,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub kmax: usize,
    pub lambda: f64,
    pub lambda_b: f64,
    pub virtual_time: f64,
    pub mode: Mode,
    pub fixed_k: Option<usize>,
    pub k_init: Option<usize>,
    pub innovation: Innovation,
    /// Length of the birth-death run that selects `k` in bd-init mode.
    pub bd_iters: usize,
    pub bd_burnin: usize,
    pub save_h: bool,
    pub split_rhat: bool,
    pub start: Option<StartMixture>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            chains: 2,
            iterations: 1000,
            burnin: 100,
            thin: 1,
            seed: 1,
            kmax: 10,
            lambda: 1.0,
            lambda_b: 1.0,
            virtual_time: 1.0,
            mode: Mode::BdInit,
            fixed_k: None,
            k_init: None,
            innovation: Innovation::Mixture,
            bd_iters: 1000,
            bd_burnin: 100,
            save_h: false,
            split_rhat: false,
            start: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v)).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for '{key}'"))),
    }
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// The data/output keys a config file may also carry; [`RunConfig`] ignores them.
pub const IO_KEYS: [&str; 4] = ["data", "column", "transform", "out"];

impl RunConfig {
    /// Sets one field by its config-file key. Hyphens and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        match k {
            "chains" => self.chains = parse(k, value)?,
            "iterations" | "iters" => self.iterations = parse(k, value)?,
            "burnin" => self.burnin = parse(k, value)?,
            "thin" => self.thin = parse(k, value)?,
            "seed" => self.seed = parse(k, value)?,
            "kmax" => self.kmax = parse(k, value)?,
            "lambda" => self.lambda = parse(k, value)?,
            "lambda_b" => self.lambda_b = parse(k, value)?,
            "virtual_time" => self.virtual_time = parse(k, value)?,
            "mode" => self.mode = value.trim().parse()?,
            "fixed_k" => self.fixed_k = optional(k, value)?,
            "k_init" => self.k_init = optional(k, value)?,
            "innovation" => self.innovation = value.trim().parse()?,
            "bd_iters" => self.bd_iters = parse(k, value)?,
            "bd_burnin" => self.bd_burnin = parse(k, value)?,
            "save_h" => self.save_h = parse_bool(k, value)?,
            "split_rhat" => self.split_rhat = parse_bool(k, value)?,
            "init_weights" => self.start.get_or_insert_with(Default::default).weights = parse_list(k, value)?,
            "init_means" => self.start.get_or_insert_with(Default::default).means = parse_list(k, value)?,
            "init_variances" => {
                self.start.get_or_insert_with(Default::default).variances = parse_list(k, value)?
            }
            _ if IO_KEYS.contains(&k) => {}
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.chains == 0 {
            return fail("chains must be at least 1");
        }
        if self.iterations <= self.burnin {
            return fail("iterations must exceed burnin");
        }
        if self.thin == 0 {
            return fail("thin must be at least 1");
        }
        if self.kmax == 0 {
            return fail("kmax must be at least 1");
        }
        for (v, name) in [
            (self.lambda, "lambda"),
            (self.lambda_b, "lambda_b"),
            (self.virtual_time, "virtual_time"),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (k, name) in [(self.fixed_k, "fixed_k"), (self.k_init, "k_init")] {
            if let Some(k) = k {
                if k == 0 || k > self.kmax {
                    return Err(Error::Config(format!("{name} must lie in 1..=kmax")));
                }
            }
        }
        if self.mode == Mode::BdInit && self.fixed_k.is_none() && self.innovation == Innovation::Mixture {
            if self.bd_iters <= self.bd_burnin {
                return fail("bd_iters must exceed bd_burnin");
            }
        }
        if let Some(s) = &self.start {
            let k = s.weights.len();
            if k == 0 || s.means.len() != k || s.variances.len() != k {
                return fail("init_weights, init_means and init_variances must have equal non-zero length");
            }
            if let Some(f) = self.fixed_k.or(self.k_init) {
                if f != k {
                    return fail("start mixture length disagrees with fixed_k / k_init");
                }
            }
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (key, value) in parse_pairs(text)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_str(&text)
    }

    /// Config-file text that reproduces this configuration.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<usize>| v.map_or("none".to_string(), |k| k.to_string());
        let _ = writeln!(s, "chains = {}", self.chains);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "burnin = {}", self.burnin);
        let _ = writeln!(s, "thin = {}", self.thin);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "kmax = {}", self.kmax);
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let _ = writeln!(s, "lambda_b = {}", self.lambda_b);
        let _ = writeln!(s, "virtual_time = {}", self.virtual_time);
        let _ = writeln!(s, "mode = {}", self.mode);
        let _ = writeln!(s, "fixed_k = {}", opt(self.fixed_k));
        let _ = writeln!(s, "k_init = {}", opt(self.k_init));
        let _ = writeln!(s, "innovation = {}", self.innovation);
        let _ = writeln!(s, "bd_iters = {}", self.bd_iters);
        let _ = writeln!(s, "bd_burnin = {}", self.bd_burnin);
        let _ = writeln!(s, "save_h = {}", self.save_h);
        let _ = writeln!(s, "split_rhat = {}", self.split_rhat);
        if let Some(st) = &self.start {
            let _ = writeln!(s, "init_weights = {}", join(&st.weights));
            let _ = writeln!(s, "init_means = {}", join(&st.means));
            let _ = writeln!(s, "init_variances = {}", join(&st.variances));
        }
        s
    }
}

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
