//! Streaming adaptive independent component analysis with the EASI learning rule.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: small dense matrix and vector kernels, generic over `f32`/`f64`.
//! * [`separator`]: the EASI datapath and its SGD, momentum-SGD and sequential mini-batch
//!   (SMBGD) optimizers.
//! * [`signal`]: synthetic sources and (possibly rotating) mixing models.
//! * [`metrics`]: Amari index, crosstalk and convergence detection.
//! * [`pipeline`]: analytical stage-count and throughput model of a pipelined datapath.
//!
//! ```
//! use easi::{Hyperparameters, MixingModel, Schedule, SeparatorState, SourceSpec};
//!
//! let model = MixingModel::random(4, vec![SourceSpec::Uniform; 2], Schedule::Stationary, 1).unwrap();
//! let hyper = Hyperparameters::default();
//! let mut sep = SeparatorState::<f32>::init(2, 4, &hyper, 2).unwrap();
//! for (_, sample) in model.stream(3).take(1000) {
//!     sep.step_sample(&sample.x.cast(), &hyper).unwrap();
//! }
//! assert!(!sep.is_diverged());
//! ```

pub mod error;
pub mod metrics;
pub mod numerics;
pub mod pipeline;
pub mod separator;
pub mod signal;

pub use error::{Error, Result};
pub use metrics::{amari_index, check_convergence, crosstalk_db, ConvergenceCriterion, RunRecord};
pub use numerics::{mat_combine, matmul, matvec, outer, Mat, Scalar, Vector};
pub use pipeline::{speedup_report, stage_count, throughput, PipelineMode, PipelineSpec, ThroughputReport};
pub use separator::{
    apply_nonlinearity, relative_gradient, Hyperparameters, Nonlinearity, Optimizer, SampleResult, SeparatorState,
};
pub use signal::{build_mixing, draw_sources, Mixed, MixingModel, Schedule, SourceSpec};
