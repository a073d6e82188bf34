//! Runs the monitor, inference and diagnosis stages window by window over a
//! simulated scenario, scores the result against the injected faults and
//! renders per-domain failure-ratio heatmaps.

mod config;
mod heatmap;
mod pipeline;
mod scenario;
mod score;

pub use config::{GeneratorConfig, MonitorConfig, PipelineConfig};
pub use heatmap::{emit_heatmap, HeatmapMatrix};
pub use pipeline::{
    diagnose_windows, files, flagged_from_records, infer_windows, posterior_records, prepare,
    run_pipeline, simulate, write_heatmaps, write_outputs, PipelineOutput, PosteriorRecord,
    Prepared, WindowResult,
};
pub use scenario::{build_scenario, generate_faults};
pub use score::{
    probe_visible, score, Attribution, AttributionCount, FaultOutcome, Localization, ScoreReport,
};
