use volmix_core::pipeline::traces::{summary_csv, summary_rows};
use volmix_core::pipeline::{
    export, fit, load_returns, simulate, write_simulation, Mode, RunConfig, SimulateParams, Traces, Transform,
};

fn small_config() -> RunConfig {
    RunConfig {
        chains: 2,
        iterations: 150,
        burnin: 30,
        bd_iters: 150,
        bd_burnin: 30,
        seed: 7,
        ..RunConfig::default()
    }
}

#[test]
fn simulate_fit_export_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let p = SimulateParams {
        n: 200,
        weights: vec![0.6, 0.4],
        means: vec![-0.8, 1.2],
        variances: vec![0.1, 0.1],
        seed: 3,
        ..SimulateParams::default()
    };
    let sim = simulate(&p).unwrap();
    let data = write_simulation(&p, &sim, dir.path()).unwrap();

    let series = load_returns(&data, "y", Transform::None).unwrap();
    assert_eq!(series.values.len(), 200);
    let out = fit(&small_config(), &series).unwrap();
    assert_eq!(out.traces.chains.len(), 2);
    assert!(out.traces.chains.iter().all(|c| c.len() == 120));
    let k = out.selected_k.expect("selection run picks k");
    assert!(out.traces.ks().iter().all(|&kk| kk == k));

    let res = dir.path().join("fit");
    export(&out, &series.source, &res).unwrap();
    for f in ["summary.csv", "kposterior.csv", "trace.csv", "density.csv", "runlog.txt"] {
        assert!(res.join(f).exists(), "missing {f}");
    }

    let reread = Traces::from_csv_path(&res.join("trace.csv")).unwrap();
    let resummarized = summary_csv(&summary_rows(&reread, false).unwrap());
    let written = std::fs::read_to_string(res.join("summary.csv")).unwrap();
    assert_eq!(resummarized, written);
}

#[test]
fn full_bd_mode_varies_k_and_is_reproducible() {
    let p = SimulateParams {
        n: 150,
        seed: 11,
        ..SimulateParams::default()
    };
    let sim = simulate(&p).unwrap();
    let series = volmix_core::pipeline::ReturnSeries::new(sim.y, "sim", Transform::None).unwrap();
    let cfg = RunConfig {
        mode: Mode::FullBd,
        ..small_config()
    };
    let a = fit(&cfg, &series).unwrap();
    let b = fit(&cfg, &series).unwrap();
    assert!(a.selected_k.is_none());
    assert_eq!(a.traces.to_csv(), b.traces.to_csv());
    assert!(a.traces.ks().iter().all(|&k| (1..=cfg.kmax).contains(&k)));
}
