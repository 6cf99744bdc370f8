//! Streaming detection: per-frame features into a rolling window, both
//! stacks plus fusion after every frame, threshold alerts with a cooldown,
//! and scoring of detections against ground truth.

mod budget;
mod scoring;
mod stream;

pub use budget::{realtime_budget_check, sustained_budget, BudgetReport, FramePipeline, PassthroughPipeline};
pub use scoring::{
    judge_sample, measure_timeliness, ActionTimeliness, GroundTruth, SampleOutcome,
    TimelinessReport, MATCH_SLACK, TIMELINESS_ALPHAS,
};
pub use stream::{
    alert_decision, detect_offline, AlertGate, frame_timestamp, Detection, DetectorConfig, StreamState,
};
