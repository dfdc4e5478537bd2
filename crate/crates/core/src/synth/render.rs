use chrono::{TimeZone, Utc};
use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand_distr::{Distribution, Poisson};

use super::Planted;
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::rng;

/// Request-count window: `ips` clients over `paths` URL paths. Ordinary
/// clients each request a handful of random paths a few times. The last
/// `crawlers` clients walk every path with per-path rates shared among them,
/// so their count vectors are strongly correlated.
pub fn count_window(ips: usize, paths: usize, crawlers: usize, seed: u64) -> Result<Planted<FeatureMatrix>> {
    if crawlers > ips || paths < 2 {
        return Err(Error::param("need crawlers <= ips and at least two paths"));
    }
    let mut r = rng::stream(seed, 0);
    let rates: Vec<f64> = (0..paths).map(|_| r.random_range(1.0..12.0)).collect();
    let mut data = vec![0.0; ips * paths];
    for j in 0..ips {
        let col = &mut data[j * paths..(j + 1) * paths];
        let mut r = rng::stream(seed, 1 + j as u64);
        if j >= ips - crawlers {
            for (i, c) in col.iter_mut().enumerate() {
                *c = Poisson::new(rates[i]).expect("positive rate").sample(&mut r);
            }
        } else {
            let visits = r.random_range(2..=paths.min(8));
            let pois = Poisson::new(2.0).expect("positive rate");
            for i in sample_indices(&mut r, paths, visits) {
                col[i] = 1.0 + pois.sample(&mut r);
            }
        }
    }
    let rows = (0..paths).map(|i| format!("/p/{i}.html")).collect();
    let cols = (0..ips)
        .map(|j| format!("10.{}.{}.{}", j / 65536 % 256, j / 256 % 256, j % 256))
        .collect();
    Ok(Planted {
        value: FeatureMatrix::new(rows, cols, data)?,
        truth: (ips - crawlers..ips).collect(),
    })
}

/// Render a count window as access-log lines (combined format, UTC), one line
/// per request, at random times in `[start, start + length)`, sorted by time.
/// Counts are rounded and negative values ignored.
pub fn render_access_log(x: &FeatureMatrix, start: i64, length: i64, seed: u64) -> Vec<String> {
    let mut r = rng::stream(seed, x.window_id as u64);
    let mut lines: Vec<(i64, String)> = Vec::new();
    for (j, ip) in x.col_ids().iter().enumerate() {
        for (i, path) in x.row_ids().iter().enumerate() {
            let c = x.value(i, j).round().max(0.0) as usize;
            for _ in 0..c {
                let ts = start + r.random_range(0..length.max(1));
                let when = Utc.timestamp_opt(ts, 0).single().expect("valid timestamp");
                let bytes: u32 = r.random_range(200..20_000);
                lines.push((
                    ts,
                    format!(
                        "{ip} - - [{}] \"GET {path} HTTP/1.1\" 200 {bytes} \"-\" \"fixture\"",
                        when.format("%d/%b/%Y:%H:%M:%S %z")
                    ),
                ));
            }
        }
    }
    lines.sort();
    lines.into_iter().map(|(_, l)| l).collect()
}
