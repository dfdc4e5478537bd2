//! Stream ingestion: raw records to [`Event`]s, events to window [`FeatureMatrix`]es.

mod access_log;
mod prices;
mod window;

pub use access_log::{parse_access_log, LogParser, SkipReason};
pub use prices::{parse_price_csv, read_price_csv, read_price_dir, PriceParse};
pub use window::{
    build_count_matrix, build_price_change_matrix, price_windows, slide_windows, SlideReport, WindowSkip, WindowSpec,
    WindowStream,
};

use crate::error::{Error, Result};

/// One timestamped observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    /// Client IP or stock symbol.
    pub entity: String,
    /// Request path or price date.
    pub feature: String,
    /// Request count contribution or closing price.
    pub value: f64,
}

/// The `M x N` matrix of one window: rows are features, columns are entities.
///
/// Values are stored column-major so each entity's data vector is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub window_id: usize,
    /// Window bounds `[start, end)` in stream units.
    pub start: i64,
    pub end: i64,
    rows: Vec<String>,
    cols: Vec<String>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Build from column-major `data` (`data[j * rows.len() + i]` is row `i`, column `j`).
    pub fn new(rows: Vec<String>, cols: Vec<String>, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows.len() * cols.len() {
            return Err(Error::contract(format!(
                "data length {} does not match {}x{}",
                data.len(),
                rows.len(),
                cols.len()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(cols.len());
        if let Some(dup) = cols.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::contract(format!("duplicate column id {dup:?}")));
        }
        Ok(FeatureMatrix {
            window_id: 0,
            start: 0,
            end: 0,
            rows,
            cols,
            data,
        })
    }

    /// Build from a list of equal-length columns, with generated ids `r0.., c0..`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let m = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != m) {
            return Err(Error::contract("columns have different lengths"));
        }
        let rows = (0..m).map(|i| format!("r{i}")).collect();
        let cols = (0..columns.len()).map(|j| format!("c{j}")).collect();
        let data = columns.iter().flatten().copied().collect();
        Self::new(rows, cols, data)
    }

    pub fn with_window(mut self, window_id: usize, start: i64, end: i64) -> Self {
        self.window_id = window_id;
        self.start = start;
        self.end = end;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.rows
    }

    pub fn col_ids(&self) -> &[String] {
        &self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let m = self.rows.len();
        &self.data[j * m..(j + 1) * m]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_cols()).map(move |j| self.column(j))
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows.len() + i]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Submatrix over the given column indices (in the given order).
    pub fn select_columns(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_rows());
        for &j in idx {
            data.extend_from_slice(self.column(j));
        }
        FeatureMatrix {
            window_id: self.window_id,
            start: self.start,
            end: self.end,
            rows: self.rows.clone(),
            cols: idx.iter().map(|&j| self.cols[j].clone()).collect(),
            data,
        }
    }

    /// Append columns; ids must be new.
    pub fn append_columns(&mut self, ids: Vec<String>, columns: &[Vec<f64>]) -> Result<()> {
        if ids.len() != columns.len() || columns.iter().any(|c| c.len() != self.n_rows()) {
            return Err(Error::contract("appended columns do not match the matrix shape"));
        }
        for id in &ids {
            if self.cols.contains(id) {
                return Err(Error::contract(format!("duplicate column id {id:?}")));
            }
        }
        self.cols.extend(ids);
        for c in columns {
            self.data.extend_from_slice(c);
        }
        Ok(())
    }
}
