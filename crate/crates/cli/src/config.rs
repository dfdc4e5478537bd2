//! Run configuration: a TOML file with one section per module, overridden by
//! command-line flags, converted into the library's config types.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use corrwatch::corrmat::SignMode;
use corrwatch::gps::GpsConfig;
use corrwatch::ingest::WindowSpec;
use corrwatch::pipeline::{Algorithms, PipelineConfig};
use corrwatch::rps::{MembershipScope, RpsConfig};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    AccessLog,
    PriceCsv,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub kind: Option<InputKind>,
    pub paths: Vec<PathBuf>,
    /// Keep query strings on request paths.
    pub keep_query: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    /// Seconds for logs, business days for prices.
    pub length: Option<i64>,
    pub step: Option<i64>,
    pub min_entities: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub threshold: f64,
    pub strength_floor: f64,
    pub direct: bool,
    pub rps: bool,
    pub gps: bool,
    pub per_algorithm: bool,
    pub direct_membership: f64,
    /// `absolute`, `positive` or `negative`.
    pub mode: String,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let d = PipelineConfig::default();
        PipelineSection {
            threshold: d.threshold,
            strength_floor: d.strength_floor,
            direct: d.algorithms.direct,
            rps: d.algorithms.rps,
            gps: d.algorithms.gps,
            per_algorithm: d.per_algorithm,
            direct_membership: d.direct_membership,
            mode: "absolute".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RpsSection {
    pub p: f64,
    pub ratio: f64,
    pub threshold: f64,
    /// `sample` or `window`.
    pub scope: String,
}

impl Default for RpsSection {
    fn default() -> Self {
        let d = RpsConfig::default();
        RpsSection {
            p: d.p,
            ratio: d.ratio,
            threshold: d.threshold,
            scope: "sample".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpsSection {
    pub ell: usize,
    pub alpha: f64,
    pub max_iter: usize,
    pub fill_unseeded: bool,
}

impl Default for GpsSection {
    fn default() -> Self {
        let d = GpsConfig::default();
        GpsSection {
            ell: d.ell,
            alpha: d.alpha,
            max_iter: d.max_iter,
            fill_unseeded: d.fill_unseeded,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub input: InputSection,
    pub window: WindowSection,
    pub pipeline: PipelineSection,
    pub rps: RpsSection,
    pub gps: GpsSection,
}

/// Flags shared by every subcommand; each one overrides its config-file key.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML config file (sections: input, window, pipeline, rps, gps).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input file or directory; repeatable.
    #[arg(long, global = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub kind: Option<InputKind>,
    /// Window length (seconds for logs, business days for prices).
    #[arg(long, global = true)]
    pub window: Option<i64>,
    #[arg(long, global = true)]
    pub step: Option<i64>,
    /// Alert threshold on the principal score.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long = "strength-floor", global = true)]
    pub strength_floor: Option<f64>,
    #[arg(long = "rps.p", global = true)]
    pub rps_p: Option<f64>,
    #[arg(long = "rps.ratio", global = true)]
    pub rps_ratio: Option<f64>,
    #[arg(long = "gps.ell", global = true)]
    pub gps_ell: Option<usize>,
    #[arg(long = "gps.alpha", global = true)]
    pub gps_alpha: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Read the config file if one is named, then apply the flags.
    pub fn load(o: &Overrides) -> Result<Self, Failure> {
        let mut c = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))
                    .map_err(Failure::io)?;
                toml::from_str(&text)
                    .with_context(|| format!("bad config {}", path.display()))
                    .map_err(Failure::config)?
            }
            None => RunConfig::default(),
        };
        if !o.input.is_empty() {
            c.input.paths = o.input.clone();
        }
        c.input.kind = o.kind.or(c.input.kind);
        c.window.length = o.window.or(c.window.length);
        c.window.step = o.step.or(c.window.step);
        if let Some(v) = o.threshold {
            c.pipeline.threshold = v;
        }
        if let Some(v) = o.strength_floor {
            c.pipeline.strength_floor = v;
        }
        if let Some(v) = o.rps_p {
            c.rps.p = v;
        }
        if let Some(v) = o.rps_ratio {
            c.rps.ratio = v;
        }
        if let Some(v) = o.gps_ell {
            c.gps.ell = v;
        }
        if let Some(v) = o.gps_alpha {
            c.gps.alpha = v;
        }
        if let Some(v) = o.seed {
            c.seed = v;
        }
        c.jobs = o.jobs.or(c.jobs);
        c.out = o.out.clone().or(c.out);
        c.pipeline_config().map_err(Failure::config)?;
        if c.jobs == Some(0) {
            return Err(Failure::config(anyhow::anyhow!("--jobs must be at least 1")));
        }
        Ok(c)
    }

    pub fn out_dir(&self) -> &Path {
        self.out.as_deref().unwrap_or(Path::new("."))
    }

    pub fn kind(&self) -> InputKind {
        self.input.kind.unwrap_or(InputKind::AccessLog)
    }

    pub fn window_spec(&self) -> anyhow::Result<WindowSpec> {
        let base = match self.kind() {
            InputKind::AccessLog => WindowSpec::logs(self.window.length.unwrap_or(3600)),
            InputKind::PriceCsv => {
                let mut s = WindowSpec::prices();
                if let Some(l) = self.window.length {
                    s.length = l;
                }
                s
            }
        };
        let spec = WindowSpec {
            length: base.length,
            step: self.window.step.unwrap_or(base.step),
            min_entities: self.window.min_entities.unwrap_or(base.min_entities),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn pipeline_config(&self) -> anyhow::Result<PipelineConfig> {
        let mode = match self.pipeline.mode.as_str() {
            "absolute" => SignMode::Absolute,
            "positive" => SignMode::PositiveOnly,
            "negative" => SignMode::NegativeOnly,
            other => bail!("unknown correlation mode {other:?}"),
        };
        let scope = match self.rps.scope.as_str() {
            "sample" => MembershipScope::Sample,
            "window" => MembershipScope::Window,
            other => bail!("unknown rps scope {other:?}"),
        };
        let p = &self.pipeline;
        let config = PipelineConfig {
            threshold: p.threshold,
            strength_floor: p.strength_floor,
            algorithms: Algorithms {
                direct: p.direct,
                rps: p.rps,
                gps: p.gps,
            },
            mode,
            direct_membership: p.direct_membership,
            per_algorithm: p.per_algorithm,
            rps: RpsConfig {
                p: self.rps.p,
                ratio: self.rps.ratio,
                threshold: self.rps.threshold,
                seed: self.seed,
                scope,
                mode,
                ..RpsConfig::default()
            },
            gps: GpsConfig {
                ell: self.gps.ell,
                alpha: self.gps.alpha,
                max_iter: self.gps.max_iter,
                fill_unseeded: self.gps.fill_unseeded,
                ..GpsConfig::default()
            },
        };
        config.validate()?;
        Ok(config)
    }

    /// SHA-256 of the effective configuration, hex encoded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Every input path must exist before any work starts.
    pub fn input_paths(&self) -> Result<Vec<PathBuf>, Failure> {
        if self.input.paths.is_empty() {
            return Err(Failure::config(anyhow::anyhow!("no input given (use --input)")));
        }
        for p in &self.input.paths {
            if !p.exists() {
                return Err(Failure::io(anyhow::anyhow!("input {} does not exist", p.display())));
            }
        }
        Ok(self.input.paths.clone())
    }
}
