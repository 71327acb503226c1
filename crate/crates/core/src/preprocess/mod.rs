//! Feature pruning, scaling, power transform, correlation analysis and
//! sliding-window construction.

pub mod correlation;
pub mod mask;
pub mod pipeline;
pub mod power;
pub mod scaling;
pub mod window;

pub use correlation::{correlation_matrix, CorrelationMatrix};
pub use mask::{build_feature_mask, eq1_prune_decision, DropReason, FeatureMask, MaskMode, CANONICAL_DROPS};
pub use pipeline::{masked_rows, PipelineFile, PreprocessPipeline};
pub use power::{yeo_johnson, PowerTransform};
pub use scaling::MinMaxScaler;
pub use window::{final_windows, make_windows, window_count, FeatureTable, UnitFeatures, WindowOrigin, WindowedDataset};
