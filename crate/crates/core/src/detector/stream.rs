use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dsp::FeatureExtractor;
use crate::error::{Error, Result};
use crate::motion::ActionKind;
use crate::neural::DrowsyModel;
use crate::signal::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Alert when `R` exceeds this value.
    pub threshold: f64,
    /// Minimum time between two alerts (s).
    pub cooldown: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            cooldown: 5.0,
        }
    }
}

/// Classifier output for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_index: u64,
    /// Nominal end time of the frame, `(frame_index + 1) * frame_length` (s).
    pub timestamp: f64,
    pub p_short: Vec<f64>,
    pub p_long: Vec<f64>,
    #[serde(rename = "R")]
    pub r: f64,
    pub alert: bool,
    /// Per drowsy action, the probability the owning stack assigns to it.
    pub action_scores: Vec<(ActionKind, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_within_action: Option<f64>,
}

impl Detection {
    pub fn above(&self, threshold: f64) -> bool {
        self.r > threshold
    }
}

/// Alert iff `r > threshold` and no alert fired in the last `cooldown` seconds.
pub fn alert_decision(r: f64, time: f64, last_alert: Option<f64>, config: &DetectorConfig) -> bool {
    r > config.threshold && last_alert.is_none_or(|t| time - t >= config.cooldown)
}

/// Applies [`alert_decision`] frame by frame, remembering the last alert.
#[derive(Debug, Clone, Default)]
pub struct AlertGate {
    last: Option<f64>,
}

impl AlertGate {
    pub fn last_alert(&self) -> Option<f64> {
        self.last
    }

    pub fn decide(&mut self, r: f64, time: f64, config: &DetectorConfig) -> bool {
        let alert = alert_decision(r, time, self.last, config);
        if alert {
            self.last = Some(time);
        }
        alert
    }
}

pub fn frame_timestamp(index: u64, frame_length: f64) -> f64 {
    (index + 1) as f64 * frame_length
}

fn detection(model: &DrowsyModel, history: &[&[f64]], frame_index: u64, timestamp: f64) -> Result<Detection> {
    let inf = model.infer(history)?;
    let action_scores = model.action_scores(&inf);
    let mut probs = inf.probs.into_iter();
    Ok(Detection {
        frame_index,
        timestamp,
        p_short: probs.next().unwrap_or_default(),
        p_long: probs.next().unwrap_or_default(),
        r: inf.r,
        alert: false,
        action_scores,
        latency_within_action: None,
    })
}

/// Online detector: extracts features for each incoming frame, keeps the
/// most recent window of feature vectors, and classifies after every frame.
#[derive(Debug, Clone)]
pub struct StreamState {
    model: Arc<DrowsyModel>,
    extractor: FeatureExtractor,
    config: DetectorConfig,
    buffer: VecDeque<Vec<f64>>,
    capacity: usize,
    next_index: u64,
    clock: AlertGate,
}

impl StreamState {
    pub fn new(model: Arc<DrowsyModel>, config: DetectorConfig) -> Result<Self> {
        let extractor = FeatureExtractor::new(model.dsp.clone())?;
        if extractor.dim() != model.feature_dim() {
            return Err(Error::Incompatible {
                what: "model",
                detail: format!(
                    "front end yields {} features, model expects {}",
                    extractor.dim(),
                    model.feature_dim()
                ),
            });
        }
        let capacity = model.history_len();
        Ok(Self {
            model,
            extractor,
            config,
            buffer: VecDeque::with_capacity(capacity),
            capacity,
            next_index: 0,
            clock: AlertGate::default(),
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn expected_index(&self) -> u64 {
        self.next_index
    }

    /// Forget all history; the next frame must have index `next_index`.
    pub fn reset(&mut self, next_index: u64) {
        self.buffer.clear();
        self.next_index = next_index;
        self.clock = AlertGate::default();
    }

    pub fn push_frame(&mut self, frame: &Frame) -> Result<Detection> {
        self.check_order(frame.index)?;
        let features = self.extractor.extract(frame)?;
        self.accept(frame.index, features.phases)
    }

    /// Feed an already extracted feature vector (e.g. from a feature dump).
    pub fn push_features(&mut self, index: u64, features: Vec<f64>) -> Result<Detection> {
        self.check_order(index)?;
        if features.len() != self.model.feature_dim() {
            return Err(Error::Shape {
                context: "streamed feature vector",
                expected: self.model.feature_dim(),
                actual: features.len(),
            });
        }
        self.accept(index, features)
    }

    fn check_order(&self, index: u64) -> Result<()> {
        if index != self.next_index {
            return Err(Error::OutOfOrder {
                expected: self.next_index,
                actual: index,
            });
        }
        Ok(())
    }

    fn accept(&mut self, index: u64, features: Vec<f64>) -> Result<Detection> {
        let timestamp = frame_timestamp(index, self.model.dsp.frame_length);
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(features);
        self.next_index = index + 1;
        let history: Vec<&[f64]> = self.buffer.iter().map(|v| v.as_slice()).collect();
        let mut det = detection(&self.model, &history, index, timestamp)?;
        det.alert = self.clock.decide(det.r, timestamp, &self.config);
        Ok(det)
    }
}

/// Batch pass over the feature vectors of a whole recording; produces the
/// same detections as streaming the frames one by one.
pub fn detect_offline(
    model: &DrowsyModel,
    features: &[&[f64]],
    config: &DetectorConfig,
) -> Result<Vec<Detection>> {
    let window = model.history_len();
    let mut clock = AlertGate::default();
    let mut out = Vec::with_capacity(features.len());
    for i in 0..features.len() {
        let start = (i + 1).saturating_sub(window);
        let timestamp = frame_timestamp(i as u64, model.dsp.frame_length);
        let mut det = detection(model, &features[start..=i], i as u64, timestamp)?;
        det.alert = clock.decide(det.r, timestamp, config);
        out.push(det);
    }
    Ok(out)
}
