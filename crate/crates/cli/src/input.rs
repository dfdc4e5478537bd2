//! Turning input paths into a stream of window matrices.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use corrwatch::ingest::{
    price_windows, read_price_csv, read_price_dir, FeatureMatrix, LogParser, SlideReport, WindowSpec, WindowStream,
};

use crate::config::{InputKind, RunConfig};
use crate::Failure;

/// Ingest counters reported in the run summary.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestStats {
    pub files: usize,
    pub lines: usize,
    pub skipped_lines: usize,
    pub empty_lines: usize,
    pub late_events: usize,
    pub windows: usize,
    pub skipped_windows: usize,
}

impl IngestStats {
    fn absorb(&mut self, r: &SlideReport) {
        self.late_events = r.late_events;
        self.windows = r.windows;
        self.skipped_windows = r.skipped_empty + r.skipped_few_entities + r.skipped_few_rows;
    }
}

/// Files named by `paths`; directories contribute their regular files, sorted.
pub fn expand(paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("cannot list {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file())
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Access-log windows produced lazily while the files are read line by line.
pub struct LogWindows {
    files: std::vec::IntoIter<PathBuf>,
    reader: Option<BufReader<File>>,
    parser: LogParser,
    stream: WindowStream,
    pending: std::collections::VecDeque<FeatureMatrix>,
    finished: bool,
    pub stats: IngestStats,
    pub error: Option<anyhow::Error>,
}

impl LogWindows {
    pub fn new(files: Vec<PathBuf>, spec: WindowSpec, keep_query: bool) -> Self {
        LogWindows {
            stats: IngestStats {
                files: files.len(),
                ..Default::default()
            },
            files: files.into_iter(),
            reader: None,
            parser: LogParser::new(!keep_query),
            stream: WindowStream::new(spec),
            pending: Default::default(),
            finished: false,
            error: None,
        }
    }

    fn sync_stats(&mut self) {
        self.stats.lines = self.parser.lines;
        self.stats.skipped_lines = self.parser.warnings;
        self.stats.empty_lines = self.parser.empty;
        self.stats.absorb(self.stream.report());
    }

    fn next_reader(&mut self) -> Option<BufReader<File>> {
        let path = self.files.next()?;
        match File::open(&path) {
            Ok(f) => Some(BufReader::new(f)),
            Err(e) => {
                self.error = Some(anyhow::Error::new(e).context(format!("cannot read {}", path.display())));
                None
            }
        }
    }
}

impl Iterator for LogWindows {
    type Item = FeatureMatrix;

    fn next(&mut self) -> Option<FeatureMatrix> {
        let mut line = String::new();
        while self.pending.is_empty() && !self.finished {
            if self.reader.is_none() {
                self.reader = if self.error.is_none() { self.next_reader() } else { None };
                if self.reader.is_none() {
                    self.finished = true;
                    if self.error.is_none() {
                        self.pending.extend(self.stream.finish());
                    }
                    break;
                }
            }
            let reader = self.reader.as_mut().expect("reader is open");
            line.clear();
            match reader.read_line(&mut line) {
                Ok(0) => self.reader = None,
                Ok(_) => {
                    if let Some(ev) = self.parser.parse_line(&line) {
                        self.pending.extend(self.stream.push(ev));
                    }
                }
                Err(e) => {
                    self.error = Some(anyhow::Error::new(e).context("read failed"));
                    self.reader = None;
                }
            }
        }
        self.sync_stats();
        self.pending.pop_front()
    }
}

/// Price windows over every input file or directory.
pub fn price_input(paths: &[PathBuf], spec: WindowSpec) -> anyhow::Result<(Vec<FeatureMatrix>, IngestStats)> {
    let mut events = Vec::new();
    let mut stats = IngestStats::default();
    for p in paths {
        let part = if p.is_dir() {
            read_price_dir(p)
        } else {
            read_price_csv(p)
        }
        .with_context(|| format!("cannot read prices from {}", p.display()))?;
        stats.files += 1;
        stats.lines += part.events.len() + part.skipped;
        stats.skipped_lines += part.skipped;
        events.extend(part.events);
    }
    let (windows, report) = price_windows(&events, spec);
    stats.absorb(&report);
    Ok((windows, stats))
}

/// Every window of the configured input, materialized (used by `tune`).
pub fn all_windows(config: &RunConfig) -> Result<(Vec<FeatureMatrix>, IngestStats), Failure> {
    let paths = config.input_paths()?;
    let spec = config.window_spec().map_err(Failure::config)?;
    match config.kind() {
        InputKind::AccessLog => {
            let files = expand(&paths).map_err(Failure::io)?;
            let mut it = LogWindows::new(files, spec, config.input.keep_query);
            let windows: Vec<FeatureMatrix> = it.by_ref().collect();
            if let Some(e) = it.error.take() {
                return Err(Failure::io(e));
            }
            Ok((windows, it.stats))
        }
        InputKind::PriceCsv => price_input(&paths, spec).map_err(Failure::io),
    }
}

pub fn exists(path: &Path) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::io(anyhow::anyhow!("{} does not exist", path.display())))
    }
}
