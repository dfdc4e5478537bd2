//! Output files. Every file starts with the same metadata: a `#` comment line
//! in CSVs, a leading `{"meta": ...}` record in JSONL, a `meta` key in JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    /// Experiment parameters not carried by the run configuration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<(String, String)>,
}

impl Meta {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Meta {
            tool: env!("CARGO_PKG_NAME").trim_end_matches("-cli").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: config.seed,
            config_hash: config.hash(),
            params: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    fn comment(&self) -> String {
        let mut s = format!(
            "# {} {} command={} seed={} config_hash={}",
            self.tool, self.version, self.command, self.seed, self.config_hash
        );
        for (k, v) in &self.params {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

pub fn create(dir: &Path, name: &str) -> anyhow::Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

/// A CSV file whose first line is the metadata comment.
pub struct CsvOut {
    pub path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(dir: &Path, name: &str, meta: &Meta, header: &[&str]) -> anyhow::Result<Self> {
        let (path, mut w) = create(dir, name)?;
        writeln!(w, "{}", meta.comment())?;
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(header)?;
        Ok(CsvOut { path, writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> anyhow::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

/// Write `value` as pretty JSON with `meta` as its first key.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, meta: &Meta, value: &T) -> anyhow::Result<PathBuf> {
    let mut doc = serde_json::Map::new();
    doc.insert("meta".into(), serde_json::to_value(meta)?);
    match serde_json::to_value(value)? {
        serde_json::Value::Object(m) => doc.extend(m),
        other => {
            doc.insert("value".into(), other);
        }
    }
    let (path, mut w) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(path)
}

/// Format an optional ratio, empty when undefined.
pub fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}
