//! Generative detector: a beta mixture over the entries of the correlation
//! matrix, fitted by alternating fixed-point shape updates and label sweeps.

mod model;
mod special;

pub use model::{
    fit_beta, gps_fit, group_stats, log_likelihood, log_likelihood_from_stats, project, update_beta_params,
    update_labels, BetaFit, BetaUpdate, GpsConfig, GpsFit, GpsModel, GpsSet, GroupStats, MeanConstraint,
    BACKGROUND_MEAN_MAX, SHAPE_MAX,
};
pub use special::{digamma, inv_digamma};
