//! Metrics, artifact persistence and the experiment harness.

mod dataset;
mod experiment;
mod metrics;
mod persist;

pub use dataset::{
    audio_record, build_dataset, frame_labels, load_dataset, sample_record, save_dataset,
    ManifestEntry, ManifestHeader, StoredDataset, DATASET_FORMAT, DATASET_VERSION,
};
pub use experiment::{
    evaluate_model, latency_cdf_csv, render_evaluation, render_sweep, run_experiment,
    run_on_dataset, run_sweep, split_train_eval, sweep_csv, EvaluationReport, ExperimentConfig,
    ExperimentOutput, ExperimentReport, RunHeader, SampleVerdict, SplitSummary, SweepAxis,
    SweepRow, REPORT_SCHEMA_VERSION,
};
pub use metrics::{
    binary_metrics, compute_metrics, BinaryTally, ClassMetrics, ConfusionTally, MetricsReport,
};
pub use persist::{
    check_compatible, decode_model, encode_model, load_model, model_digest, save_model,
    MODEL_VERSION,
};
