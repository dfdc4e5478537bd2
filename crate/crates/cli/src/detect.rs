//! `detect`: ingest, run the pipeline over every window, write alerts and a summary.

use std::collections::BTreeMap;
use std::io::Write;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use corrwatch::pipeline::{run_stream, Alert, RunSummary};

use crate::config::{InputKind, RunConfig};
use crate::input::{expand, price_input, IngestStats, LogWindows};
use crate::output::{create, write_json, Meta};
use crate::Failure;

/// One line of `alerts.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRecord {
    pub window_id: usize,
    pub start: i64,
    pub end: i64,
    pub algorithm: String,
    pub score: f64,
    pub strength: f64,
    pub anomalies: Vec<String>,
    #[serde(default)]
    pub core: Vec<String>,
    #[serde(default)]
    pub suspicious: Vec<String>,
}

impl From<&Alert> for AlertRecord {
    fn from(a: &Alert) -> Self {
        AlertRecord {
            window_id: a.window_id,
            start: a.start,
            end: a.end,
            algorithm: a.algorithm.clone(),
            score: a.score,
            strength: a.strength,
            anomalies: a.anomalies.clone(),
            core: a.core.clone(),
            suspicious: a.suspicious.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct RuntimeStats {
    runs: usize,
    mean_secs: f64,
    max_secs: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    windows: usize,
    failed_windows: usize,
    alerts: usize,
    /// Detections that passed the gate, per algorithm.
    alerts_per_algorithm: BTreeMap<String, usize>,
    suppressed: BTreeMap<String, usize>,
    runtime: BTreeMap<String, RuntimeStats>,
    ingest: IngestStats,
    wall_secs: f64,
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    let paths = config.input_paths()?;
    let spec = config.window_spec().map_err(Failure::config)?;
    let pipeline = config.pipeline_config().map_err(Failure::config)?;
    let meta = Meta::new("detect", config);
    let out = config.out_dir();

    let (path, mut w) = create(out, "alerts.jsonl").map_err(Failure::io)?;
    let header = serde_json::json!({ "meta": meta });
    writeln!(w, "{header}").map_err(Failure::io)?;
    let mut sink = |r: &corrwatch::pipeline::WindowResult| -> corrwatch::Result<()> {
        for a in &r.alerts {
            let line = serde_json::to_string(&AlertRecord::from(a)).expect("alert serializes");
            writeln!(w, "{line}")?;
        }
        Ok(())
    };

    let batch = config.jobs.unwrap_or_else(default_jobs).max(1) * 2;
    let started = std::time::Instant::now();
    let (summary, ingest): (RunSummary, IngestStats) = match config.kind() {
        InputKind::AccessLog => {
            let files = expand(&paths).map_err(Failure::io)?;
            let mut windows = LogWindows::new(files, spec, config.input.keep_query);
            let s = run_stream(&mut windows, &pipeline, batch, &mut sink).map_err(Failure::run)?;
            if let Some(e) = windows.error.take() {
                return Err(Failure::io(e));
            }
            (s, windows.stats)
        }
        InputKind::PriceCsv => {
            let (windows, stats) = price_input(&paths, spec).map_err(Failure::io)?;
            (
                run_stream(windows, &pipeline, batch, &mut sink).map_err(Failure::run)?,
                stats,
            )
        }
    };
    w.flush()
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::io)?;

    let runtime = summary
        .runtime
        .iter()
        .map(|(k, &(n, total, max))| {
            let stats = RuntimeStats {
                runs: n,
                mean_secs: if n > 0 { total / n as f64 } else { 0.0 },
                max_secs: max,
            };
            (k.clone(), stats)
        })
        .collect();
    let doc = Summary {
        windows: summary.windows,
        failed_windows: summary.failed_windows,
        alerts: summary.alerts,
        alerts_per_algorithm: summary.detections_passed.clone(),
        suppressed: summary.suppressed.clone(),
        runtime,
        ingest,
        wall_secs: started.elapsed().as_secs_f64(),
    };
    write_json(out, "summary.json", &meta, &doc).map_err(Failure::io)?;
    log::info!(
        "{} windows, {} alerts -> {}",
        summary.windows,
        summary.alerts,
        path.display()
    );
    Ok(())
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
