//! Correlated anomaly group detection for windowed data streams.
//!
//! A window of the stream is materialized as a feature matrix whose columns are
//! entities (client IPs, stock symbols). Correlated anomalies are groups of
//! columns with unusually strong pairwise correlation. The crate provides:
//!
//! * [`ingest`]: access-log and price-CSV parsers plus sliding-window matrix builders.
//! * [`corrmat`]: nonnegative correlation matrices, batch and incremental.
//! * [`spectral`]: top eigenpair, principal score and per-column membership.
//! * [`rps`]: the randomized detector (p-norm weighted column sampling).
//! * [`gps`]: the generative detector (beta mixture over correlations).
//! * [`pipeline`]: per-window orchestration, alert gating and merging.
//! * [`synth`]: planted generators, injection scenarios, metrics and experiments.
//!
//! Data-parallel inner loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corrmat;
pub mod error;
pub mod gps;
pub mod ingest;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod rps;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
