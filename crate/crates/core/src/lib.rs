//! Iris verification (segmentation, rubber-sheet normalization, Log-Gabor
//! phase codes, masked Hamming matching) plus a synthetic print-and-recapture
//! spoof simulator and the attack evaluation protocol that runs on it.

pub mod config;
pub mod encoding;
pub mod evaluation;
pub mod imagecore;
pub mod manifest;
pub mod matching;
pub mod normalization;
pub mod pipeline;
pub mod segmentation;
pub mod spoofsim;

pub use config::{Config, ConfigError};
pub use encoding::{encode, EncodingError, IrisTemplate, LogGaborParams, TemplateFormatError};
pub use evaluation::{
    build_report, far_frr_at, run_protocol, success_rates, threshold_at_far, EvalError, EvaluationReport,
    OperatingPoint, ProtocolConfig, ScoreKind, ScoreSet,
};
pub use imagecore::{load_pgm, save_pgm, GrayImage, ImageError, PgmError};
pub use manifest::{DatasetManifest, Eye, ImageKind, ManifestEntry, ManifestError, Subject};
pub use matching::{match_templates, MatchError, MatchScore, DEFAULT_SHIFT_BUDGET};
pub use normalization::{normalize, NormalizationError, NormalizedPattern};
pub use pipeline::{extract_template, PipelineConfig, PipelineError};
pub use segmentation::{segment_eye, Circle, EyelidLine, SegmentationConfig, SegmentationError, SegmentationResult};
pub use spoofsim::{
    apply_chain, build_dataset, render_synthetic_eye, simulate_print_recapture, EyeDistribution, EyeParams,
    PreprocessChain, RecaptureParams, SpoofError,
};
