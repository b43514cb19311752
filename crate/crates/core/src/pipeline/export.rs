use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::fit::FitOutput;
use super::traces::{density_csv, kposterior_csv, summary_csv, summary_rows};
use crate::diagnostics::{k_frequencies, quantile_sorted};
use crate::error::{Error, Result};

pub(crate) fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Pointwise posterior mean and 2.5 / 50 / 97.5 % quantiles of `h_t`.
pub fn h_summary_csv(h_draws: &[Vec<Vec<f64>>]) -> String {
    let mut s = String::from("t,mean,q2.5,q50,q97.5\n");
    let Some(n) = h_draws.iter().flatten().next().map(Vec::len) else {
        return s;
    };
    for t in 0..n {
        let mut v: Vec<f64> = h_draws.iter().flatten().map(|h| h[t]).collect();
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            t + 1,
            mean,
            quantile_sorted(&v, 0.025),
            quantile_sorted(&v, 0.5),
            quantile_sorted(&v, 0.975)
        );
    }
    s
}

fn runlog(out: &FitOutput, data_source: &str, rhat_warnings: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# configuration");
    let _ = writeln!(s, "data = {data_source}");
    s.push_str(&out.config.to_config_string());
    let _ = writeln!(s, "\n# k");
    if out.stage1_k.iter().any(|c| !c.is_empty()) {
        let pooled: Vec<usize> = out.stage1_k.iter().flatten().copied().collect();
        let freq: Vec<String> = k_frequencies(&pooled).iter().map(|(k, n)| format!("{k}:{n}")).collect();
        let _ = writeln!(s, "selection run frequencies: {}", freq.join(" "));
    }
    match out.selected_k {
        Some(k) => {
            let _ = writeln!(s, "selected k = {k}");
        }
        None => {
            let freq: Vec<String> = k_frequencies(&out.traces.ks()).iter().map(|(k, n)| format!("{k}:{n}")).collect();
            let _ = writeln!(s, "k frequencies: {}", freq.join(" "));
        }
    }
    let _ = writeln!(s, "\n# chains");
    for (i, r) in out.reports.iter().enumerate() {
        let _ = writeln!(
            s,
            "chain {}: h acceptance {:.4}, phi acceptance {:.4}, birth-death runs {} (births {}, deaths {}, truncated {})",
            i + 1,
            r.h_acceptance.rate(),
            r.phi_acceptance.rate(),
            r.bd_runs,
            r.bd_births,
            r.bd_deaths,
            r.bd_truncations
        );
    }
    let _ = writeln!(s, "\n# warnings");
    for w in out.warnings.iter().chain(rhat_warnings) {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

/// Writes `summary.csv`, `kposterior.csv`, `trace.csv`, `density.csv`,
/// `runlog.txt` and, with `save_h`, `h.csv`. Returns diagnostic warnings.
pub fn export(out: &FitOutput, data_source: &str, dir: &Path) -> Result<Vec<String>> {
    ensure_dir(dir)?;
    let split = out.config.split_rhat;
    let rows = summary_rows(&out.traces, split)?;
    let mut rhat_warnings = Vec::new();
    if out.config.chains > 1 {
        for r in rows.iter().filter(|r| r.sd > 0.0) {
            match r.rhat {
                None => rhat_warnings.push(format!("R-hat unavailable for {} (degenerate chains)", r.parameter)),
                Some(v) if v > 1.1 => rhat_warnings.push(format!("R-hat {v:.3} > 1.1 for {}", r.parameter)),
                _ => {}
            }
        }
    }
    write_file(dir, "summary.csv", &summary_csv(&rows))?;
    write_file(dir, "kposterior.csv", &kposterior_csv(&out.k_posterior_draws()))?;
    write_file(dir, "trace.csv", &out.traces.to_csv())?;
    write_file(dir, "density.csv", &density_csv(&out.traces))?;
    if let Some(h) = &out.h_draws {
        write_file(dir, "h.csv", &h_summary_csv(h))?;
    }
    write_file(dir, "runlog.txt", &runlog(out, data_source, &rhat_warnings))?;
    for w in &rhat_warnings {
        log::warn!("{w}");
    }
    Ok(rhat_warnings)
}
