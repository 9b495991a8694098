//! Evaluation toolkit for seismic phase pickers.
//!
//! The crate covers the whole benchmarking path without any neural network:
//! geographic clustering and leakage-free splits ([`stratify`]), pick
//! extraction and scoring ([`eval`], [`metrics`]), a mixed-effects model
//! that separates data-sampling from training variance ([`statframe`]), and
//! rank probabilities across models ([`ranksim`]). [`synth`] generates
//! inputs with known ground truth for every stage.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod model;
pub mod ranksim;
pub mod seed;
pub mod statframe;
pub mod stratify;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{Pick, PickClass, ProbabilityTrace, WaveformCounts, WindowOutput};
pub use metrics::{AggregateCounts, CumulativeRmsrCurve, ThresholdSelection};
pub use model::{
    enumerate_instances, Dataset, DesignSpec, MetricTable, ModelInstanceKey, SourceRecord,
    TraceSamples, WaveformKind, WaveformRecord,
};
pub use ranksim::{rank_probabilities, Direction, RankMatrix};
pub use statframe::{fit, FitOptions, FitResult};
pub use stratify::{ClusterModel, ClusterSet, SplitConfig, SplitPlan};
