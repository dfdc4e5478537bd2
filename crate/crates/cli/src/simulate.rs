//! `simulate`: the synthetic experiments, each written as a CSV.

use anyhow::anyhow;

use corrwatch::ingest::FeatureMatrix;
use corrwatch::pipeline::run_window;
use corrwatch::rng;
use corrwatch::synth::{
    concentration, degeneration_curve, evaluate, gen_planted_stream, inject_anomalies, scaling, GrowthRule,
    PlantedSpec, Scenario, WindowEval,
};

use crate::config::RunConfig;
use crate::output::{opt, CsvOut, Meta};
use crate::Failure;

#[derive(Debug, Clone, clap::Args)]
pub struct SimulateArgs {
    /// degeneration, concentration, injection or scaling.
    pub experiment: String,
    /// Anomaly count rule for degeneration: `n^0.8`, `0.2n` or a fixed count.
    #[arg(long, default_value = "n^0.8")]
    pub rule: String,
    /// Window sizes (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<usize>,
    /// Planted fractions for concentration (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.7")]
    pub phi: Vec<f64>,
    /// Matrix size for concentration.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Background mean correlation (default 0.5 for degeneration, 0.3 otherwise).
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long = "mu-tilde", default_value_t = 0.85)]
    pub mu_tilde: f64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Injection scenarios (comma separated; default all three).
    #[arg(long, value_delimiter = ',')]
    pub scenario: Vec<String>,
    /// Base windows per scenario for injection.
    #[arg(long, default_value_t = 50)]
    pub windows: usize,
    /// Columns of each injection base window.
    #[arg(long, default_value_t = 100)]
    pub cols: usize,
    /// Rows of each generated data window.
    #[arg(long, default_value_t = 100)]
    pub rows: usize,
    /// Timing repetitions for scaling.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
}

pub fn run(config: &RunConfig, args: &SimulateArgs) -> Result<(), Failure> {
    match args.experiment.as_str() {
        "degeneration" => degeneration(config, args),
        "concentration" => concentration_csv(config, args),
        "injection" => injection(config, args),
        "scaling" => scaling_csv(config, args),
        other => Err(Failure::config(anyhow!(
            "unknown experiment {other:?} (expected degeneration, concentration, injection or scaling)"
        ))),
    }
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

fn degeneration(config: &RunConfig, args: &SimulateArgs) -> Result<(), Failure> {
    let rule: GrowthRule = args.rule.parse().map_err(|e| Failure::config(anyhow!("{e}")))?;
    let grid = if args.grid.is_empty() {
        vec![200, 500, 1000, 2000, 4000, 8000]
    } else {
        args.grid.clone()
    };
    let mu = args.mu.unwrap_or(0.5);
    let rows = degeneration_curve(rule, &grid, mu, args.mu_tilde, args.trials, config.seed).map_err(Failure::config)?;
    let meta = Meta::new("simulate degeneration", config)
        .param("rule", &args.rule)
        .param("mu", mu)
        .param("mu_tilde", args.mu_tilde)
        .param("trials", args.trials)
        .param("n0", grid[0]);
    let mut csv = CsvOut::create(
        config.out_dir(),
        "degeneration.csv",
        &meta,
        &["n", "k", "rho", "predicted_rho", "rho_sd"],
    )
    .map_err(Failure::io)?;
    for r in &rows {
        csv.row([
            r.n.to_string(),
            r.k.to_string(),
            f(r.rho),
            f(r.predicted_rho),
            f(r.rho_sd),
        ])
        .map_err(Failure::io)?;
    }
    csv.finish().map_err(Failure::io)?;
    Ok(())
}

fn concentration_csv(config: &RunConfig, args: &SimulateArgs) -> Result<(), Failure> {
    let mu = args.mu.unwrap_or(0.3);
    let rows =
        concentration(&args.phi, args.n, mu, args.mu_tilde, args.trials, config.seed).map_err(Failure::config)?;
    let meta = Meta::new("simulate concentration", config)
        .param("mu", mu)
        .param("mu_tilde", args.mu_tilde)
        .param("n", args.n);
    let mut csv = CsvOut::create(
        config.out_dir(),
        "concentration.csv",
        &meta,
        &["phi", "trial", "n", "k", "rho", "predicted_rho", "within_band"],
    )
    .map_err(Failure::io)?;
    for r in &rows {
        csv.row([
            r.phi.to_string(),
            r.trial.to_string(),
            r.n.to_string(),
            r.k.to_string(),
            f(r.rho),
            f(r.predicted_rho),
            r.within_band.to_string(),
        ])
        .map_err(Failure::io)?;
    }
    csv.finish().map_err(Failure::io)?;
    Ok(())
}

/// Base windows for injection: columns share a weak common factor.
fn base_windows(config: &RunConfig, args: &SimulateArgs) -> Result<Vec<FeatureMatrix>, Failure> {
    let spec = PlantedSpec::window(args.cols, 0, args.rows, args.mu.unwrap_or(0.3), args.mu.unwrap_or(0.3));
    (0..args.windows)
        .map(|w| {
            gen_planted_stream(&spec, rng::derive(config.seed, w as u64))
                .map(|p| p.value.with_window(w, w as i64, w as i64 + 1))
                .map_err(Failure::config)
        })
        .collect()
}

fn injection(config: &RunConfig, args: &SimulateArgs) -> Result<(), Failure> {
    let scenarios: Vec<Scenario> = if args.scenario.is_empty() {
        vec![Scenario::BigSets, Scenario::StrongStrength, Scenario::Hidden]
    } else {
        args.scenario
            .iter()
            .map(|s| s.parse().map_err(|e| Failure::config(anyhow!("{e}"))))
            .collect::<Result<_, _>>()?
    };
    let pipeline = config.pipeline_config().map_err(Failure::config)?;
    let controls = base_windows(config, args)?;
    let mut control_alerts = 0;
    for x in &controls {
        control_alerts += run_window(x, &pipeline).map_err(Failure::run)?.alerts.len();
    }
    let meta = Meta::new("simulate injection", config)
        .param("windows", args.windows)
        .param("cols", args.cols)
        .param("rows", args.rows);
    let mut csv = CsvOut::create(
        config.out_dir(),
        "eval.csv",
        &meta,
        &[
            "scenario",
            "windows",
            "recall",
            "accuracy",
            "extra_alerts",
            "runtime_mean",
            "runtime_max",
        ],
    )
    .map_err(Failure::io)?;
    for sc in scenarios {
        let mut evals = Vec::new();
        let mut times = Vec::new();
        for (w, x) in controls.iter().enumerate() {
            let inj = match inject_anomalies(x, sc, rng::derive(config.seed ^ 0x1A7E, w as u64), pipeline.rps.p) {
                Ok(i) => i,
                Err(e) => {
                    log::warn!("window {w}: {e}");
                    continue;
                }
            };
            let pre = run_window(x, &pipeline).map_err(Failure::run)?;
            let t = std::time::Instant::now();
            let r = run_window(&inj.window, &pipeline).map_err(Failure::run)?;
            times.push(t.elapsed().as_secs_f64());
            evals.push(WindowEval {
                detected: r.alerts.iter().flat_map(|a| a.anomalies.iter().cloned()).collect(),
                injected: inj.truth_ids(),
                pre_suspicious: pre.alerts.iter().flat_map(|a| a.anomalies.iter().cloned()).collect(),
            });
        }
        let rep = evaluate(&evals, control_alerts, &times);
        csv.row([
            sc.as_str().to_string(),
            rep.windows.to_string(),
            opt(rep.recall),
            opt(rep.est_accuracy),
            rep.extra_alerts.to_string(),
            f(rep.runtime_mean),
            f(rep.runtime_max),
        ])
        .map_err(Failure::io)?;
    }
    csv.finish().map_err(Failure::io)?;
    Ok(())
}

fn scaling_csv(config: &RunConfig, args: &SimulateArgs) -> Result<(), Failure> {
    let grid = if args.grid.is_empty() {
        vec![500, 1000, 2000, 5000]
    } else {
        args.grid.clone()
    };
    let rows = scaling(&grid, args.rows, args.reps, config.seed).map_err(Failure::config)?;
    let meta = Meta::new("simulate scaling", config)
        .param("rows", args.rows)
        .param("reps", args.reps);
    let mut csv = CsvOut::create(
        config.out_dir(),
        "scaling.csv",
        &meta,
        &["n", "direct_secs", "rps_secs", "gps_sweep_secs", "rps_over_direct"],
    )
    .map_err(Failure::io)?;
    for r in &rows {
        csv.row([
            r.n.to_string(),
            format!("{:.6e}", r.direct_secs),
            format!("{:.6e}", r.rps_secs),
            format!("{:.6e}", r.gps_sweep_secs),
            f(r.rps_secs / r.direct_secs),
        ])
        .map_err(Failure::io)?;
    }
    csv.finish().map_err(Failure::io)?;
    Ok(())
}
