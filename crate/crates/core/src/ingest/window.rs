use std::collections::BTreeMap;

use super::{Event, FeatureMatrix};
use crate::error::{Error, Result};
use crate::par;

/// Sliding-window geometry. Units are seconds for logs and business days for prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub length: i64,
    pub step: i64,
    /// Windows with fewer distinct entities are skipped.
    pub min_entities: usize,
}

impl WindowSpec {
    pub fn new(length: i64, step: i64, min_entities: usize) -> Result<Self> {
        let spec = WindowSpec {
            length,
            step,
            min_entities,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Log windows: step defaults to a quarter of the length.
    pub fn logs(length: i64) -> Self {
        WindowSpec {
            length,
            step: (length / 4).max(1),
            min_entities: 2,
        }
    }

    /// 30 business days, sliding by 3.
    pub fn prices() -> Self {
        WindowSpec {
            length: 30,
            step: 3,
            min_entities: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.step <= 0 || self.step > self.length {
            return Err(Error::param(format!(
                "window step must satisfy 0 < step <= length (step={}, length={})",
                self.step, self.length
            )));
        }
        if self.min_entities < 2 {
            return Err(Error::param("min_entities must be at least 2"));
        }
        Ok(())
    }
}

/// Why a window produced no matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSkip {
    NoEvents,
    TooFewEntities(usize),
    TooFewRows(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SlideReport {
    pub windows: usize,
    pub skipped_empty: usize,
    pub skipped_few_entities: usize,
    pub skipped_few_rows: usize,
    /// Events older than the open window when they arrived.
    pub late_events: usize,
}

impl SlideReport {
    fn record(&mut self, skip: WindowSkip) {
        match skip {
            WindowSkip::NoEvents => self.skipped_empty += 1,
            WindowSkip::TooFewEntities(_) => self.skipped_few_entities += 1,
            WindowSkip::TooFewRows(_) => self.skipped_few_rows += 1,
        }
    }
}

/// Sum event values into a feature x entity count matrix.
///
/// Rows and columns are sorted by id so identical input gives identical output.
pub fn build_count_matrix(events: &[Event], min_entities: usize) -> std::result::Result<FeatureMatrix, WindowSkip> {
    if events.is_empty() {
        return Err(WindowSkip::NoEvents);
    }
    let mut rows: BTreeMap<&str, usize> = BTreeMap::new();
    let mut cols: BTreeMap<&str, usize> = BTreeMap::new();
    for ev in events {
        rows.insert(&ev.feature, 0);
        cols.insert(&ev.entity, 0);
    }
    if cols.len() < min_entities.max(2) {
        return Err(WindowSkip::TooFewEntities(cols.len()));
    }
    if rows.len() < 2 {
        return Err(WindowSkip::TooFewRows(rows.len()));
    }
    for (i, v) in rows.values_mut().enumerate() {
        *v = i;
    }
    for (j, v) in cols.values_mut().enumerate() {
        *v = j;
    }
    let m = rows.len();
    let mut data = vec![0.0; m * cols.len()];
    for ev in events {
        data[cols[ev.entity.as_str()] * m + rows[ev.feature.as_str()]] += ev.value;
    }
    let row_ids = rows.keys().map(|s| s.to_string()).collect();
    let col_ids = cols.keys().map(|s| s.to_string()).collect();
    Ok(FeatureMatrix::new(row_ids, col_ids, data).expect("ids are distinct by construction"))
}

/// Percentage price changes over aligned closing prices.
///
/// `dates` labels the `M + 1` price slots; each series must cover all of them.
/// Symbols with a gap or a nonpositive price are dropped from this window.
pub fn build_price_change_matrix(
    dates: &[String],
    series: &[(String, Vec<Option<f64>>)],
    min_entities: usize,
) -> std::result::Result<FeatureMatrix, WindowSkip> {
    let m = dates.len().saturating_sub(1);
    let mut cols = Vec::new();
    let mut data = Vec::new();
    for (symbol, prices) in series {
        if prices.len() != dates.len() || prices.len() < 2 {
            continue;
        }
        let Some(p): Option<Vec<f64>> = prices.iter().copied().collect() else {
            continue;
        };
        if p.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            continue;
        }
        cols.push(symbol.clone());
        data.extend(p.windows(2).map(|w| 100.0 * (w[1] - w[0]) / w[0]));
    }
    if cols.is_empty() {
        return Err(WindowSkip::NoEvents);
    }
    if cols.len() < min_entities.max(2) {
        return Err(WindowSkip::TooFewEntities(cols.len()));
    }
    if m < 2 {
        return Err(WindowSkip::TooFewRows(m));
    }
    FeatureMatrix::new(dates[1..].to_vec(), cols, data).map_err(|_| WindowSkip::TooFewEntities(0))
}

/// Events of one window, before materialization.
#[derive(Debug, Clone)]
struct RawWindow {
    id: usize,
    start: i64,
    end: i64,
    events: Vec<Event>,
}

/// Push-based time windowing.
///
/// Events may arrive out of order; they are buffered until the window closes.
/// An event older than the start of the oldest open window is dropped and
/// counted in `late_events`.
#[derive(Debug, Clone)]
pub struct WindowStream {
    spec: WindowSpec,
    origin: Option<i64>,
    next_id: usize,
    buffer: Vec<Event>,
    max_ts: i64,
    report: SlideReport,
}

impl WindowStream {
    pub fn new(spec: WindowSpec) -> Self {
        WindowStream {
            spec,
            origin: None,
            next_id: 0,
            buffer: Vec::new(),
            max_ts: i64::MIN,
            report: SlideReport::default(),
        }
    }

    fn current_start(&self) -> i64 {
        self.origin.unwrap_or(0) + self.next_id as i64 * self.spec.step
    }

    /// Feed one event; returns the windows it closed.
    pub fn push(&mut self, ev: Event) -> Vec<FeatureMatrix> {
        self.origin.get_or_insert(ev.timestamp);
        if ev.timestamp < self.current_start() {
            self.report.late_events += 1;
            return Vec::new();
        }
        self.max_ts = self.max_ts.max(ev.timestamp);
        self.buffer.push(ev);
        let mut raws = Vec::new();
        while self.origin.is_some() && self.current_start() + self.spec.length <= self.max_ts {
            raws.push(self.close_current());
        }
        self.materialize(raws)
    }

    /// Close every remaining complete window. A trailing window counts as
    /// complete when the stream stops less than one step before its end;
    /// anything shorter is a partial window and is dropped.
    pub fn finish(&mut self) -> Vec<FeatureMatrix> {
        let mut raws = Vec::new();
        if self.origin.is_some() {
            while self.current_start() <= self.max_ts
                && self.current_start() + self.spec.length - 1 - self.max_ts < self.spec.step
            {
                raws.push(self.close_current());
            }
        }
        self.buffer.clear();
        self.materialize(raws)
    }

    pub fn report(&self) -> &SlideReport {
        &self.report
    }

    fn close_current(&mut self) -> RawWindow {
        let start = self.current_start();
        let end = start + self.spec.length;
        let mut events: Vec<Event> = self
            .buffer
            .iter()
            .filter(|e| e.timestamp >= start && e.timestamp < end)
            .cloned()
            .collect();
        events.sort_by_key(|e| e.timestamp);
        let id = self.next_id;
        self.next_id += 1;
        let next_start = self.current_start();
        self.buffer.retain(|e| e.timestamp >= next_start);
        RawWindow { id, start, end, events }
    }

    fn materialize(&mut self, raws: Vec<RawWindow>) -> Vec<FeatureMatrix> {
        let min_entities = self.spec.min_entities;
        let built = par::map_slice(&raws, |w| {
            build_count_matrix(&w.events, min_entities).map(|m| m.with_window(w.id, w.start, w.end))
        });
        let mut out = Vec::with_capacity(built.len());
        for b in built {
            match b {
                Ok(m) => {
                    self.report.windows += 1;
                    out.push(m)
                }
                Err(skip) => self.report.record(skip),
            }
        }
        out
    }
}

/// Window a batch of events (any order) into count matrices.
pub fn slide_windows(mut events: Vec<Event>, spec: WindowSpec) -> (Vec<FeatureMatrix>, SlideReport) {
    events.sort_by_key(|e| e.timestamp);
    let mut stream = WindowStream::new(spec);
    let mut out = Vec::new();
    for ev in events {
        out.extend(stream.push(ev));
    }
    out.extend(stream.finish());
    (out, stream.report().clone())
}

/// Window daily closing prices by business-day index.
///
/// Business days are the distinct dates present in the data. Window `k` covers
/// days `[k * step, k * step + length)`, giving `length - 1` percentage changes.
pub fn price_windows(events: &[Event], spec: WindowSpec) -> (Vec<FeatureMatrix>, SlideReport) {
    let mut report = SlideReport::default();
    let dates: Vec<(&str, i64)> = {
        let mut d: BTreeMap<&str, i64> = BTreeMap::new();
        for ev in events {
            d.insert(&ev.feature, ev.timestamp);
        }
        d.into_iter().collect()
    };
    let day_index: BTreeMap<&str, usize> = dates.iter().enumerate().map(|(i, (d, _))| (*d, i)).collect();
    let mut by_symbol: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    for ev in events {
        let row = by_symbol.entry(&ev.entity).or_insert_with(|| vec![None; dates.len()]);
        row[day_index[ev.feature.as_str()]] = Some(ev.value);
    }
    let length = spec.length as usize;
    let step = spec.step as usize;
    if dates.len() < length || length < 3 {
        return (Vec::new(), report);
    }
    let count = (dates.len() - length) / step + 1;
    let symbols: Vec<(&str, &Vec<Option<f64>>)> = by_symbol.iter().map(|(s, v)| (*s, v)).collect();
    let built = par::map_range(count, |k| {
        let lo = k * step;
        let hi = lo + length;
        let labels: Vec<String> = dates[lo..hi].iter().map(|(d, _)| d.to_string()).collect();
        let series: Vec<(String, Vec<Option<f64>>)> = symbols
            .iter()
            .filter(|(_, v)| v[lo..hi].iter().any(Option::is_some))
            .map(|(s, v)| (s.to_string(), v[lo..hi].to_vec()))
            .collect();
        build_price_change_matrix(&labels, &series, spec.min_entities)
            .map(|m| m.with_window(k, dates[lo].1, dates[hi - 1].1 + 86_400))
    });
    let mut out = Vec::new();
    for b in built {
        match b {
            Ok(m) => {
                report.windows += 1;
                out.push(m);
            }
            Err(skip) => report.record(skip),
        }
    }
    (out, report)
}
