//! `tune`: sweep detector parameters over a corpus with injected anomalies.

use std::path::PathBuf;

use anyhow::{anyhow, Context};
use serde::Deserialize;

use corrwatch::rng;
use corrwatch::synth::{inject_anomalies, parameter_sweep, Scenario, SweepGrid};

use crate::config::RunConfig;
use crate::input::{all_windows, exists};
use crate::output::{opt, CsvOut, Meta};
use crate::Failure;

#[derive(Debug, Clone, clap::Args)]
pub struct TuneArgs {
    /// Corpus file or directory (read with --kind); defaults to --input.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// TOML grid with lists `r`, `p`, `alpha`, `ell`.
    #[arg(long = "grid")]
    pub grid_file: Option<PathBuf>,
    #[arg(long = "grid.r", value_delimiter = ',')]
    pub r: Vec<f64>,
    #[arg(long = "grid.p", value_delimiter = ',')]
    pub p: Vec<f64>,
    #[arg(long = "grid.alpha", value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long = "grid.ell", value_delimiter = ',')]
    pub ell: Vec<usize>,
    /// Injection scenario applied to every corpus window.
    #[arg(long, default_value = "strong_strength")]
    pub scenario: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GridFile {
    r: Vec<f64>,
    p: Vec<f64>,
    alpha: Vec<f64>,
    ell: Vec<usize>,
}

fn grid(args: &TuneArgs) -> Result<SweepGrid, Failure> {
    let flags = SweepGrid {
        r: args.r.clone(),
        p: args.p.clone(),
        alpha: args.alpha.clone(),
        ell: args.ell.clone(),
    };
    let g = match &args.grid_file {
        Some(path) => {
            exists(path)?;
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read grid {}", path.display()))
                .map_err(Failure::io)?;
            let f: GridFile = toml::from_str(&text)
                .with_context(|| format!("bad grid {}", path.display()))
                .map_err(Failure::config)?;
            SweepGrid {
                r: f.r,
                p: f.p,
                alpha: f.alpha,
                ell: f.ell,
            }
        }
        None if flags.points().is_empty() => SweepGrid::default(),
        None => flags,
    };
    if g.points().is_empty() {
        return Err(Failure::config(anyhow!("the parameter grid is empty")));
    }
    Ok(g)
}

pub fn run(config: &RunConfig, args: &TuneArgs) -> Result<(), Failure> {
    let grid = grid(args)?;
    let scenario: Scenario = args.scenario.parse().map_err(|e| Failure::config(anyhow!("{e}")))?;
    let mut config = config.clone();
    if let Some(c) = &args.corpus {
        exists(c)?;
        config.input.paths = vec![c.clone()];
    }
    let base = config.pipeline_config().map_err(Failure::config)?;
    let (control, _) = all_windows(&config)?;
    let corpus: Vec<_> = control
        .iter()
        .filter_map(|x| {
            let seed = rng::derive(config.seed, x.window_id as u64);
            inject_anomalies(x, scenario, seed, base.rps.p)
                .map_err(|e| log::warn!("window {}: {e}", x.window_id))
                .ok()
        })
        .collect();
    log::info!("{} corpus windows, {} injected", control.len(), corpus.len());
    let rows = parameter_sweep(&grid, &corpus, &control, &base).map_err(Failure::config)?;

    let meta = Meta::new("tune", &config)
        .param("scenario", scenario.as_str())
        .param("windows", corpus.len());
    let mut csv = CsvOut::create(
        config.out_dir(),
        "sweep.csv",
        &meta,
        &["param", "value", "recall", "accuracy", "extra_alerts", "runtime_mean"],
    )
    .map_err(Failure::io)?;
    for r in &rows {
        csv.row([
            r.param.to_string(),
            r.value.to_string(),
            opt(r.report.recall),
            opt(r.report.est_accuracy),
            r.report.extra_alerts.to_string(),
            format!("{:.6e}", r.report.runtime_mean),
        ])
        .map_err(Failure::io)?;
    }
    csv.finish().map_err(Failure::io)?;
    Ok(())
}
