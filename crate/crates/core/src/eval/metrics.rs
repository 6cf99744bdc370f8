use serde::{Deserialize, Serialize};

use crate::motion::ActionKind;

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryTally {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl BinaryTally {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Ratio, or `None` when the denominator is zero.
fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Metrics of one class; undefined ratios are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub false_alarm: Option<f64>,
    pub missing_alarm: Option<f64>,
}

pub fn binary_metrics(t: &BinaryTally) -> ClassMetrics {
    ClassMetrics {
        accuracy: ratio(t.tp + t.tn, t.total()),
        precision: ratio(t.tp, t.tp + t.fp),
        recall: ratio(t.tp, t.tp + t.fn_),
        false_alarm: ratio(t.fp, t.fp + t.tn),
        missing_alarm: ratio(t.fn_, t.tp + t.fn_),
    }
}

/// Multi-class confusion counts over samples, rows = truth, columns = prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTally {
    pub classes: Vec<ActionKind>,
    pub counts: Vec<Vec<u64>>,
}

impl Default for ConfusionTally {
    fn default() -> Self {
        Self::new(ActionKind::ALL.to_vec())
    }
}

impl ConfusionTally {
    pub fn new(classes: Vec<ActionKind>) -> Self {
        let n = classes.len();
        Self {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    fn index(&self, k: ActionKind) -> usize {
        self.classes
            .iter()
            .position(|&c| c == k)
            .unwrap_or_else(|| panic!("class {k} not in tally"))
    }

    pub fn record(&mut self, truth: ActionKind, predicted: ActionKind) {
        let (i, j) = (self.index(truth), self.index(predicted));
        self.counts[i][j] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Correct over total samples.
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.correct(), self.total())
    }

    pub fn binary(&self, class: ActionKind) -> BinaryTally {
        let k = self.index(class);
        let n = self.classes.len();
        let tp = self.counts[k][k];
        let row: u64 = self.counts[k].iter().sum();
        let col: u64 = (0..n).map(|i| self.counts[i][k]).sum();
        BinaryTally::new(tp, col - tp, self.total() + tp - row - col, row - tp)
    }

    /// Drowsy (any action) versus normal driving.
    pub fn drowsy_vs_normal(&self) -> BinaryTally {
        let mut t = BinaryTally::default();
        for (i, &truth) in self.classes.iter().enumerate() {
            for (j, &pred) in self.classes.iter().enumerate() {
                let c = self.counts[i][j];
                match (truth.is_drowsy(), pred.is_drowsy()) {
                    (true, true) => t.tp += c,
                    (false, true) => t.fp += c,
                    (false, false) => t.tn += c,
                    (true, false) => t.fn_ += c,
                }
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: u64,
    pub accuracy: Option<f64>,
    pub per_class: Vec<(ActionKind, ClassMetrics)>,
    pub drowsy_vs_normal: ClassMetrics,
}

impl MetricsReport {
    pub fn class(&self, kind: ActionKind) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|(k, _)| *k == kind).map(|(_, m)| m)
    }
}

pub fn compute_metrics(tally: &ConfusionTally) -> MetricsReport {
    MetricsReport {
        samples: tally.total(),
        accuracy: tally.accuracy(),
        per_class: tally
            .classes
            .iter()
            .map(|&k| (k, binary_metrics(&tally.binary(k))))
            .collect(),
        drowsy_vs_normal: binary_metrics(&tally.drowsy_vs_normal()),
    }
}
