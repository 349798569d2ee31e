//! End-to-end orchestration: configuration, on-disk layout and caching,
//! the per-frame pipeline, evaluation reports and mode comparison.

mod cache;
mod compare;
mod config;
pub mod layout;
mod report;
mod run;

pub use cache::{sha256_hex, KeyBuilder, Manifest, ManifestEntry, MANIFEST_SCHEMA_VERSION};
pub use compare::{compare_modes, mode_stats, CompareReport, FrameComparison, ModeStats};
pub use config::{CacheConfig, FlowSource, PathsConfig, PipelineConfig};
pub use layout::{DatasetLayout, OutputLayout};
pub use report::{
    DepthErrors, DivergenceRecord, ErrorStats, EvalReport, FrameReport, FrameStatus, ReportSummary,
    StageTimings, REPORT_SCHEMA_VERSION,
};
pub use run::{layouts, run_pipeline, FrameRange};
