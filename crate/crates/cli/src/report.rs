//! `report`: score timeline and unique discoveries from an alerts file.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::PathBuf;

use anyhow::Context;

use crate::config::RunConfig;
use crate::detect::AlertRecord;
use crate::input::exists;
use crate::output::{CsvOut, Meta};
use crate::Failure;

#[derive(Debug, Clone, clap::Args)]
pub struct ReportArgs {
    /// Alerts file written by `detect`.
    pub alerts: PathBuf,
}

/// Parse an alerts file, skipping the metadata record and malformed lines.
pub fn read_alerts(path: &PathBuf) -> anyhow::Result<(Vec<AlertRecord>, usize)> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut alerts = Vec::new();
    let mut bad = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("cannot read {}", path.display()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match serde_json::from_str::<AlertRecord>(line) {
            Ok(a) => alerts.push(a),
            Err(e) => {
                let is_meta = serde_json::from_str::<serde_json::Value>(line).is_ok_and(|v| v.get("meta").is_some());
                if !is_meta {
                    log::warn!("{}:{}: skipped malformed alert ({e})", path.display(), i + 1);
                    bad += 1;
                }
            }
        }
    }
    Ok((alerts, bad))
}

/// Per alert, the ids no alert of another algorithm reported.
pub fn unique_discoveries(alerts: &[AlertRecord]) -> Vec<Vec<String>> {
    let mut by_alg: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for a in alerts {
        by_alg
            .entry(&a.algorithm)
            .or_default()
            .extend(a.anomalies.iter().map(String::as_str));
    }
    alerts
        .iter()
        .map(|a| {
            a.anomalies
                .iter()
                .filter(|id| {
                    by_alg
                        .iter()
                        .all(|(alg, ids)| *alg == a.algorithm || !ids.contains(id.as_str()))
                })
                .cloned()
                .collect()
        })
        .collect()
}

pub fn run(config: &RunConfig, args: &ReportArgs) -> Result<(), Failure> {
    exists(&args.alerts)?;
    let (mut alerts, bad) = read_alerts(&args.alerts).map_err(Failure::io)?;
    alerts.sort_by(|a, b| (a.window_id, &a.algorithm).cmp(&(b.window_id, &b.algorithm)));
    let unique = unique_discoveries(&alerts);

    let meta = Meta::new("report", config).param("alerts", args.alerts.display());
    let mut csv = CsvOut::create(
        config.out_dir(),
        "timeline.csv",
        &meta,
        &[
            "window_id",
            "start",
            "end",
            "algorithm",
            "score",
            "strength",
            "alert",
            "anomalies",
            "core",
            "suspicious",
            "unique",
            "unique_ids",
        ],
    )
    .map_err(Failure::io)?;
    for (a, u) in alerts.iter().zip(&unique) {
        csv.row([
            a.window_id.to_string(),
            a.start.to_string(),
            a.end.to_string(),
            a.algorithm.clone(),
            format!("{:.6}", a.score),
            format!("{:.6}", a.strength),
            "1".to_string(),
            a.anomalies.len().to_string(),
            a.core.len().to_string(),
            a.suspicious.len().to_string(),
            u.len().to_string(),
            u.join(";"),
        ])
        .map_err(Failure::io)?;
    }
    let path = csv.finish().map_err(Failure::io)?;

    let mut per_alg: BTreeMap<&str, (usize, usize, f64)> = BTreeMap::new();
    for (a, u) in alerts.iter().zip(&unique) {
        let e = per_alg.entry(&a.algorithm).or_default();
        e.0 += 1;
        e.1 += u.len();
        e.2 = e.2.max(a.score);
    }
    println!("{} alerts from {}", alerts.len(), args.alerts.display());
    if bad > 0 {
        println!("{bad} malformed lines skipped");
    }
    for (alg, (n, uniq, best)) in &per_alg {
        println!("  {alg:<16} {n:>6} alerts  {uniq:>6} unique ids  max score {best:.3}");
    }
    if let (Some(first), Some(last)) = (alerts.first(), alerts.last()) {
        println!("  windows {} to {}", first.window_id, last.window_id);
    }
    println!("timeline: {}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alert(window: usize, alg: &str, ids: &[&str]) -> AlertRecord {
        AlertRecord {
            window_id: window,
            start: 0,
            end: 1,
            algorithm: alg.into(),
            score: 0.8,
            strength: 0.1,
            anomalies: ids.iter().map(|s| s.to_string()).collect(),
            core: Vec::new(),
            suspicious: Vec::new(),
        }
    }

    #[test]
    fn unique_ids_are_a_set_difference() {
        let alerts = [alert(3, "rps", &["a", "b", "c"]), alert(3, "gps", &["b", "c", "d"])];
        let u = unique_discoveries(&alerts);
        assert_eq!(u[0], ["a"]);
        assert_eq!(u[1], ["d"]);
    }

    #[test]
    fn same_algorithm_does_not_cancel_itself() {
        let alerts = [alert(1, "rps", &["a"]), alert(2, "rps", &["a"])];
        assert_eq!(
            unique_discoveries(&alerts),
            [vec!["a".to_string()], vec!["a".to_string()]]
        );
    }
}
