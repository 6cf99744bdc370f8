use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Detection, DetectorConfig};
use crate::motion::ActionKind;

/// Slack after an action's end during which an alert still counts for it (s).
pub const MATCH_SLACK: f64 = 0.5;

/// Fractions of the nominal action time at which timeliness is reported.
pub const TIMELINESS_ALPHAS: [f64; 3] = [0.5, 0.7, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub action: ActionKind,
    /// `(start, end)` in seconds; `None` for normal driving.
    pub interval: Option<(f64, f64)>,
}

impl GroundTruth {
    /// Alerts with timestamps in `[start, end + MATCH_SLACK]` belong to the action.
    pub fn matches(&self, t: f64) -> bool {
        self.interval
            .is_some_and(|(s, e)| t >= s && t <= e + MATCH_SLACK)
    }
}

/// Verdict for one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub truth: ActionKind,
    pub predicted: ActionKind,
    pub alerts: usize,
    /// First matching alert minus action start, for detected actions.
    pub latency: Option<f64>,
}

impl SampleOutcome {
    pub fn correct(&self) -> bool {
        self.truth == self.predicted
    }
}

fn strongest_action(detections: &[&Detection]) -> Option<ActionKind> {
    let mut totals: Vec<(ActionKind, f64)> = Vec::new();
    for d in detections {
        for &(kind, p) in &d.action_scores {
            match totals.iter_mut().find(|(k, _)| *k == kind) {
                Some(t) => t.1 += p,
                None => totals.push((kind, p)),
            }
        }
    }
    let mut best: Option<(ActionKind, f64)> = None;
    for (k, v) in totals {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k)
}

/// Score a recording from its detections.
///
/// A drowsy recording counts as detected when an alert falls in its match
/// window; a normal recording is wrong as soon as any alert fires. The
/// reported action is the one with the largest summed score over the
/// above-threshold frames in the match window (the whole recording for
/// normal driving).
pub fn judge_sample(detections: &[Detection], truth: &GroundTruth, config: &DetectorConfig) -> SampleOutcome {
    let relevant = |d: &&Detection| truth.interval.is_none() || truth.matches(d.timestamp);
    let alerts: Vec<&Detection> = detections.iter().filter(|d| d.alert).filter(relevant).collect();
    let predicted = if alerts.is_empty() {
        ActionKind::Normal
    } else {
        let hot: Vec<&Detection> = detections
            .iter()
            .filter(relevant)
            .filter(|d| d.above(config.threshold))
            .collect();
        strongest_action(&hot).unwrap_or(ActionKind::Normal)
    };
    let latency = match truth.interval {
        Some((start, _)) if predicted == truth.action => alerts.first().map(|d| d.timestamp - start),
        _ => None,
    };
    SampleOutcome {
        truth: truth.action,
        predicted,
        alerts: alerts.len(),
        latency,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTimeliness {
    pub action: ActionKind,
    pub total_time: f64,
    pub samples: usize,
    pub detected: usize,
    pub missed: usize,
    /// Sorted latencies of correctly detected samples (empirical CDF support).
    pub latencies: Vec<f64>,
    /// `(alpha, fraction of detected samples with latency <= alpha * T)`.
    pub within: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelinessReport {
    pub actions: Vec<ActionTimeliness>,
    /// Pooled over all actions, same alphas.
    pub overall_within: Vec<(f64, Option<f64>)>,
}

impl TimelinessReport {
    pub fn overall_at(&self, alpha: f64) -> Option<f64> {
        self.overall_within
            .iter()
            .find(|(a, _)| (a - alpha).abs() < 1e-12)
            .and_then(|(_, f)| *f)
    }
}

fn fraction(hits: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| hits as f64 / n as f64)
}

/// Latency statistics over correctly detected drowsy actions.
pub fn measure_timeliness(outcomes: &[SampleOutcome]) -> TimelinessReport {
    let mut per: BTreeMap<ActionKind, ActionTimeliness> = BTreeMap::new();
    for kind in ActionKind::DROWSY {
        per.insert(
            kind,
            ActionTimeliness {
                action: kind,
                total_time: kind.total_time().expect("drowsy actions have a duration"),
                samples: 0,
                detected: 0,
                missed: 0,
                latencies: Vec::new(),
                within: Vec::new(),
            },
        );
    }
    for o in outcomes {
        let Some(entry) = per.get_mut(&o.truth) else {
            continue;
        };
        entry.samples += 1;
        match o.latency {
            Some(l) => {
                entry.detected += 1;
                entry.latencies.push(l);
            }
            None => entry.missed += 1,
        }
    }
    let mut pooled_hits = vec![0usize; TIMELINESS_ALPHAS.len()];
    let mut pooled_n = 0;
    for entry in per.values_mut() {
        entry.latencies.sort_by(f64::total_cmp);
        pooled_n += entry.latencies.len();
        for (i, &alpha) in TIMELINESS_ALPHAS.iter().enumerate() {
            let bound = alpha * entry.total_time;
            let hits = entry.latencies.iter().filter(|&&l| l <= bound + 1e-9).count();
            pooled_hits[i] += hits;
            entry.within.push((alpha, fraction(hits, entry.latencies.len())));
        }
    }
    TimelinessReport {
        actions: per.into_values().collect(),
        overall_within: TIMELINESS_ALPHAS
            .iter()
            .zip(pooled_hits)
            .map(|(&a, h)| (a, fraction(h, pooled_n)))
            .collect(),
    }
}
