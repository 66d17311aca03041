//! Weighted low-rank approximation for background estimation.
//!
//! Video is handled as a frames-as-columns matrix `A` (one vectorized
//! grayscale frame per column) and split into a low-rank background `B`
//! and a foreground `F = A - B`.

pub mod decomposition;
pub mod error;
pub mod frame_io;
pub mod metrics;
pub mod numerics;
pub mod pipeline;
pub mod rpca;
pub mod synth;
pub mod wlr;

pub use decomposition::{Decomposition, Method};
pub use error::{Error, Result};
pub use frame_io::{Dataset, Manifest};
pub use metrics::{MetricsReport, RocPoint};
pub use numerics::{DenseMatrix, SvdFactors};
pub use pipeline::{FrameSelection, PipelineConfig};
pub use rpca::RpcaConfig;
pub use synth::SynthSpec;
pub use wlr::{WeightBlock, WlrConfig, WlrState};
