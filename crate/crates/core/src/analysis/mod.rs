//! Analytic apparatus of the flat-sided problem as computations: the
//! pressure transform and its non-degeneracy monitors, log coordinates near
//! the interface, the hyperbolic metric and discrete weighted Hölder norms.

mod holder;
mod logfield;
mod metric;
mod pressure;

pub use holder::{holder_norm, holder_norm_in, schauder_box, ComponentNorm, NodeBox, NormMode, NormReport, PairSampling};
pub use logfield::{log_decompose, log_decompose_default, LogField};
pub use metric::{hyperbolic_distance, parabolic_distance};
pub use pressure::{check_star, check_star_star, pressure, PressureField, StarReport};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("exponent {0} outside (0, 1)")]
    Exponent(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no valid sampling offset inside the positive set near interface vertex {vertex}")]
    NoValidOffset { vertex: usize },
    #[error("empty window: {0}")]
    Window(String),
    #[error("degenerate sampling: {0}")]
    Sampling(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
}

pub(crate) fn check_exponent(p: f64) -> Result<(), AnalysisError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(AnalysisError::Exponent(p))
    }
}
