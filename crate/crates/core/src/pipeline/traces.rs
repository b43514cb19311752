use std::collections::BTreeMap;
use std::path::Path;

use crate::diagnostics::{k_frequencies, modal_k, split_gelman_rubin, summarize, SummaryRow};
use crate::error::{Error, Result};

/// One retained iteration of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub iteration: usize,
    pub c: f64,
    pub phi: f64,
    pub sigma_eta: f64,
    pub deviance: f64,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub precisions: Vec<f64>,
}

impl Draw {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// `(parameter, value)` in summary-table order, followed by `k`.
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let mut out = Vec::with_capacity(5 + 3 * self.k());
        out.push(("c".to_string(), self.c));
        for (i, m) in self.means.iter().enumerate() {
            out.push((format!("mu[{}]", i + 1), *m));
        }
        out.push(("phi".to_string(), self.phi));
        for (i, w) in self.weights.iter().enumerate() {
            out.push((format!("pi[{}]", i + 1), *w));
        }
        out.push(("sigma_eta".to_string(), self.sigma_eta));
        for (i, s) in self.precisions.iter().enumerate() {
            out.push((format!("prec[{}]", i + 1), *s));
        }
        out.push(("deviance".to_string(), self.deviance));
        out.push(("k".to_string(), self.k() as f64));
        out
    }
}

/// Retained draws per chain, in chain order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Traces {
    pub chains: Vec<Vec<Draw>>,
}

pub const TRACE_HEADER: &str = "chain,iteration,parameter,value";

impl Traces {
    pub fn ks(&self) -> Vec<usize> {
        self.chains.iter().flatten().map(Draw::k).collect()
    }

    pub fn modal_k(&self) -> Option<usize> {
        modal_k(&self.ks())
    }

    /// Long-format CSV; chains are numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for (ci, chain) in self.chains.iter().enumerate() {
            for d in chain {
                for (name, v) in d.named_values() {
                    s.push_str(&format!("{},{},{},{}\n", ci + 1, d.iteration, name, v));
                }
            }
        }
        s
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(file, path)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R, path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        for col in ["chain", "iteration", "parameter", "value"] {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::MissingColumn {
                    column: col.to_string(),
                    path: path.to_path_buf(),
                });
            }
        }
        let pos = |name: &str| headers.iter().position(|h| h == name).expect("checked");
        let (ic, ii, ip, iv) = (pos("chain"), pos("iteration"), pos("parameter"), pos("value"));
        let mut grouped: BTreeMap<usize, Vec<(usize, BTreeMap<String, f64>)>> = BTreeMap::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |cell: &str| Error::Parse {
                path: path.to_path_buf(),
                row: row + 1,
                cell: cell.to_string(),
            };
            let chain: usize = rec[ic].parse().map_err(|_| bad(&rec[ic]))?;
            let iteration: usize = rec[ii].parse().map_err(|_| bad(&rec[ii]))?;
            let value: f64 = rec[iv].parse().map_err(|_| bad(&rec[iv]))?;
            let draws = grouped.entry(chain).or_default();
            if draws.last().map(|(it, _)| *it) != Some(iteration) {
                draws.push((iteration, BTreeMap::new()));
            }
            draws.last_mut().expect("pushed").1.insert(rec[ip].to_string(), value);
        }
        let mut chains = Vec::with_capacity(grouped.len());
        for (_, draws) in grouped {
            let mut out = Vec::with_capacity(draws.len());
            for (iteration, map) in draws {
                out.push(draw_from_map(iteration, &map).map_err(|e| match e {
                    Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
                    e => e,
                })?);
            }
            chains.push(out);
        }
        Ok(Self { chains })
    }
}

fn draw_from_map(iteration: usize, map: &BTreeMap<String, f64>) -> Result<Draw> {
    let get = |name: &str| {
        map.get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("iteration {iteration} lacks parameter '{name}'")))
    };
    let k = get("k")?;
    if !(k >= 1.0) || k.fract() != 0.0 {
        return Err(Error::Config(format!("iteration {iteration} has invalid k {k}")));
    }
    let k = k as usize;
    let list = |prefix: &str| -> Result<Vec<f64>> { (1..=k).map(|i| get(&format!("{prefix}[{i}]"))).collect() };
    Ok(Draw {
        iteration,
        c: get("c")?,
        phi: get("phi")?,
        sigma_eta: get("sigma_eta")?,
        deviance: get("deviance")?,
        weights: list("pi")?,
        means: list("mu")?,
        precisions: list("prec")?,
    })
}

/// Per-chain values of every summarized parameter, in table order. Component
/// parameters use only draws whose `k` equals `target_k`.
pub fn parameter_chains(traces: &Traces, target_k: usize) -> Vec<(String, Vec<Vec<f64>>)> {
    let scalar = |f: fn(&Draw) -> f64| -> Vec<Vec<f64>> {
        traces.chains.iter().map(|c| c.iter().map(f).collect()).collect()
    };
    let component = |f: fn(&Draw) -> &Vec<f64>, i: usize| -> Vec<Vec<f64>> {
        traces
            .chains
            .iter()
            .map(|c| c.iter().filter(|d| d.k() == target_k).map(|d| f(d)[i]).collect())
            .collect()
    };
    let mut out = vec![("c".to_string(), scalar(|d| d.c))];
    for i in 0..target_k {
        out.push((format!("mu[{}]", i + 1), component(|d| &d.means, i)));
    }
    out.push(("phi".to_string(), scalar(|d| d.phi)));
    for i in 0..target_k {
        out.push((format!("pi[{}]", i + 1), component(|d| &d.weights, i)));
    }
    out.push(("sigma_eta".to_string(), scalar(|d| d.sigma_eta)));
    for i in 0..target_k {
        out.push((format!("prec[{}]", i + 1), component(|d| &d.precisions, i)));
    }
    out.push(("deviance".to_string(), scalar(|d| d.deviance)));
    out
}

/// Summary rows in table order; chains with no draws for a parameter are
/// left out of its R-hat.
pub fn summary_rows(traces: &Traces, split_rhat: bool) -> Result<Vec<SummaryRow>> {
    let target = traces.modal_k().ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
    let mut rows = Vec::new();
    for (name, chains) in parameter_chains(traces, target) {
        let chains: Vec<Vec<f64>> = chains.into_iter().filter(|c| !c.is_empty()).collect();
        let mut row = summarize(&name, &chains)?;
        if split_rhat {
            let shortest = chains.iter().map(Vec::len).min().unwrap_or(0);
            let cut: Vec<&[f64]> = chains.iter().map(|c| &c[..shortest]).collect();
            row.rhat = split_gelman_rubin(&cut).ok();
        }
        rows.push(row);
    }
    Ok(rows)
}

pub const SUMMARY_HEADER: &str = "parameter,mean,sd,q2.5,q25,q50,q75,q97.5,rhat";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let q = &r.quantiles;
        let rhat = r.rhat.map_or("NA".to_string(), |v| v.to_string());
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.parameter, r.mean, r.sd, q[0], q[1], q[2], q[3], q[4], rhat
        ));
    }
    s
}

pub fn kposterior_csv(ks: &[usize]) -> String {
    let mut s = String::from("k,count,probability\n");
    let total = ks.len() as f64;
    for (k, n) in k_frequencies(ks) {
        s.push_str(&format!("{k},{n},{}\n", n as f64 / total));
    }
    s
}

pub const DENSITY_BINS: usize = 40;

/// Normalized histogram `(left, right, density)`. A constant sample becomes a
/// single unit-width bin centred on the value.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, f64)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Vec::new();
    }
    if !(hi > lo) {
        return vec![(lo - 0.5, lo + 0.5, 1.0)];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = values.len() as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let left = lo + i as f64 * width;
            let right = if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width };
            (left, right, c as f64 / (n * (right - left)))
        })
        .collect()
}

pub fn density_csv(traces: &Traces) -> String {
    let mut s = String::from("parameter,bin_left,bin_right,density\n");
    let Some(target) = traces.modal_k() else {
        return s;
    };
    for (name, chains) in parameter_chains(traces, target) {
        let pooled: Vec<f64> = chains.into_iter().flatten().collect();
        for (l, r, d) in histogram(&pooled, DENSITY_BINS) {
            s.push_str(&format!("{name},{l},{r},{d}\n"));
        }
    }
    s
}
