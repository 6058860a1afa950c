//! Baselines, nested time-series cross-validation, ablations, the
//! descriptive association analysis and report files.

pub mod ablation;
pub mod baselines;
pub mod cv;
pub mod describe;
pub mod metrics;
pub mod pipeline;
pub mod report;

pub use ablation::{paired_deltas, run_ablation, AblationResult, AblationSpec, DeltaRow, Variant};
pub use baselines::{fit_sar, hm_predict, sar_quadruple, tune_hm_window, tune_sar, HmPrediction, SarModel};
pub use cv::TsCvPlan;
pub use describe::{run_descriptive_analysis, DescriptiveAnalysis, RoadAssociation};
pub use metrics::{compute_metrics, weighted_mean, Metric, MetricSet, Outcome, METRICS};
pub use pipeline::{
    fit_bundle, predict_days, run_nested_tscv, split_seed, truncate_dataset, EvaluationReport, FittedRoad, HmModel, Mode, ModelBundle,
    ModelKind, PredictionRecord, Prepared, RunOptions, SplitMetrics,
};
pub use report::{emit_bundle, emit_clusters, emit_deltas, emit_descriptive, emit_report, emit_token_frequencies};
