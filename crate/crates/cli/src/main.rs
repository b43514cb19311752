use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use volmix_core::pipeline::config::{parse_pairs, IO_KEYS};
use volmix_core::pipeline::traces::{density_csv, kposterior_csv, summary_csv, summary_rows};
use volmix_core::pipeline::{
    export, fit, load_returns, simulate, write_simulation, RunConfig, SimulateParams, Traces, Transform,
};

#[derive(Parser)]
#[command(name = "volmix", version, about = "Stochastic volatility with mixture innovations of unknown order")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to a return or price series.
    Fit(FitArgs),
    /// Generate synthetic returns.
    Simulate(SimArgs),
    /// Recompute summaries from a trace file.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    column: Option<String>,
    /// none | logret
    #[arg(long)]
    transform: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "lambda-b")]
    lambda_b: Option<f64>,
    #[arg(long = "virtual-time")]
    virtual_time: Option<f64>,
    /// bd-init | full-bd
    #[arg(long)]
    mode: Option<String>,
    #[arg(long = "fixed-k")]
    fixed_k: Option<usize>,
    #[arg(long = "k-init")]
    k_init: Option<usize>,
    /// mixture | normal
    #[arg(long)]
    innovation: Option<String>,
    #[arg(long = "bd-iters")]
    bd_iters: Option<usize>,
    #[arg(long = "bd-burnin")]
    bd_burnin: Option<usize>,
    /// Also write pointwise quantiles of the latent log-variance.
    #[arg(long = "save-h")]
    save_h: bool,
    /// Report split-chain R-hat.
    #[arg(long = "split-rhat")]
    split_rhat: bool,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = -0.2, allow_hyphen_values = true)]
    c: f64,
    #[arg(long, default_value_t = 0.95, allow_hyphen_values = true)]
    phi: f64,
    #[arg(long = "sigma-eta", default_value_t = 0.15)]
    sigma_eta: f64,
    /// Comma-separated mixture weights.
    #[arg(long, default_value = "1")]
    weights: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    means: String,
    #[arg(long, default_value = "1")]
    variances: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Plain mixture draws without a volatility process.
    #[arg(long = "mixture-only")]
    mixture_only: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    traces: PathBuf,
    /// Directory for summary.csv, kposterior.csv and density.csv; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "split-rhat")]
    split_rhat: bool,
}

fn list(name: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number '{v}' in --{name}")))
        .collect()
}

fn run_fit(a: FitArgs) -> Result<()> {
    let mut cfg = RunConfig::default();
    let mut io: std::collections::BTreeMap<String, String> = Default::default();
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        for (k, v) in parse_pairs(&text)? {
            if IO_KEYS.contains(&k.as_str()) {
                io.insert(k, v);
            } else {
                cfg.set(&k, &v)?;
            }
        }
    }
    let flags: [(&str, Option<String>); 16] = [
        ("chains", a.chains.map(|v| v.to_string())),
        ("iterations", a.iters.map(|v| v.to_string())),
        ("burnin", a.burnin.map(|v| v.to_string())),
        ("thin", a.thin.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("kmax", a.kmax.map(|v| v.to_string())),
        ("lambda", a.lambda.map(|v| v.to_string())),
        ("lambda_b", a.lambda_b.map(|v| v.to_string())),
        ("virtual_time", a.virtual_time.map(|v| v.to_string())),
        ("mode", a.mode),
        ("fixed_k", a.fixed_k.map(|v| v.to_string())),
        ("k_init", a.k_init.map(|v| v.to_string())),
        ("innovation", a.innovation),
        ("bd_iters", a.bd_iters.map(|v| v.to_string())),
        ("bd_burnin", a.bd_burnin.map(|v| v.to_string())),
        ("save_h", a.save_h.then(|| "true".to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    if a.split_rhat {
        cfg.split_rhat = true;
    }
    cfg.validate()?;

    let pick = |flag: Option<String>, key: &str| flag.or_else(|| io.get(key).cloned());
    let Some(data) = pick(a.data.map(|p| p.display().to_string()), "data") else {
        bail!("--data is required");
    };
    let column = pick(a.column, "column").unwrap_or_else(|| "y".to_string());
    let transform: Transform = pick(a.transform, "transform").unwrap_or_else(|| "logret".into()).parse()?;
    let Some(out) = pick(a.out.map(|p| p.display().to_string()), "out") else {
        bail!("--out is required");
    };

    let series = load_returns(data.as_ref(), &column, transform)?;
    log::info!("loaded {} returns from {}", series.values.len(), series.source);
    let output = fit(&cfg, &series)?;
    if let Some(k) = output.selected_k {
        log::info!("k = {k}");
    }
    let warnings = export(&output, &series.source, out.as_ref())?;
    eprintln!(
        "wrote results to {out} ({} warning{})",
        output.warnings.len() + warnings.len(),
        if output.warnings.len() + warnings.len() == 1 { "" } else { "s" }
    );
    Ok(())
}

fn run_simulate(a: SimArgs) -> Result<()> {
    let p = SimulateParams {
        n: a.n,
        c: a.c,
        phi: a.phi,
        sigma_eta: a.sigma_eta,
        weights: list("weights", &a.weights)?,
        means: list("means", &a.means)?,
        variances: list("variances", &a.variances)?,
        seed: a.seed,
        mixture_only: a.mixture_only,
    };
    let sim = simulate(&p)?;
    let path = write_simulation(&p, &sim, &a.out)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run_summarize(a: SummarizeArgs) -> Result<()> {
    let traces = Traces::from_csv_path(&a.traces)?;
    let rows = summary_rows(&traces, a.split_rhat)?;
    let summary = summary_csv(&rows);
    match a.out {
        Some(dir) => {
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            std::fs::write(dir.join("summary.csv"), summary)?;
            std::fs::write(dir.join("kposterior.csv"), kposterior_csv(&traces.ks()))?;
            std::fs::write(dir.join("density.csv"), density_csv(&traces))?;
        }
        None => print!("{summary}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Fit(a) => run_fit(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Summarize(a) => run_summarize(a),
    }
}
