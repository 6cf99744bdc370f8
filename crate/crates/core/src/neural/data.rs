use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::ActionKind;

/// Feature sequence of one recording with per-frame labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub id: u64,
    pub action: ActionKind,
    pub interval: Option<(f64, f64)>,
    pub frame_length: f64,
    pub frame_labels: Vec<ActionKind>,
    /// `frames x dim`.
    pub features: Array2<f64>,
}

impl SequenceRecord {
    pub fn frames(&self) -> usize {
        self.features.nrows()
    }

    /// The (up to) `len` frames ending at `end`, oldest first.
    pub fn history(&self, end: usize, len: usize) -> Vec<&[f64]> {
        let start = (end + 1).saturating_sub(len);
        (start..=end)
            .map(|i| self.features.row(i).to_slice().expect("contiguous"))
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SequenceDataset {
    pub dim: usize,
    pub records: Vec<SequenceRecord>,
}

/// A training window: frames ending at `end` of record `record`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub record: usize,
    pub end: usize,
}

impl SequenceDataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: SequenceRecord) -> Result<()> {
        if record.features.ncols() != self.dim {
            return Err(Error::Shape {
                context: "dataset feature dimension",
                expected: self.dim,
                actual: record.features.ncols(),
            });
        }
        if record.frame_labels.len() != record.frames() {
            return Err(Error::Shape {
                context: "dataset frame labels",
                expected: record.frames(),
                actual: record.frame_labels.len(),
            });
        }
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Every window ending at every frame of the given records.
    pub fn windows(&self, records: &[usize]) -> Vec<Window> {
        records
            .iter()
            .flat_map(|&r| (0..self.records[r].frames()).map(move |end| Window { record: r, end }))
            .collect()
    }

    pub fn label(&self, w: Window) -> ActionKind {
        self.records[w.record].frame_labels[w.end]
    }

    /// Time-major `T*B x D` batch with zero left padding.
    pub fn gather(&self, windows: &[Window], timesteps: usize) -> Array2<f64> {
        let batch = windows.len();
        let mut x = Array2::zeros((timesteps * batch, self.dim));
        for (b, w) in windows.iter().enumerate() {
            let rec = &self.records[w.record];
            for t in 0..timesteps {
                let back = timesteps - 1 - t;
                if back <= w.end {
                    x.row_mut(t * batch + b).assign(&rec.features.row(w.end - back));
                }
            }
        }
        x
    }
}
