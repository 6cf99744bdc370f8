use ndarray::{Array1, Array2};

use super::arch::StackSpec;
use super::data::{SequenceDataset, Window};
use super::{FusionDnn, LstmStack};
use crate::dsp::FeatureConfig;
use crate::error::{Error, Result};
use crate::motion::ActionKind;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedStack {
    pub spec: StackSpec,
    pub net: LstmStack,
}

/// Trained stacks plus fusion network, tied to the front-end configuration
/// whose features they were trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct DrowsyModel {
    pub architecture: String,
    pub dsp: FeatureConfig,
    pub stacks: Vec<TrainedStack>,
    pub fusion: FusionDnn,
}

/// Per-stack final-timestep probabilities and the fused drowsiness `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub probs: Vec<Vec<f64>>,
    pub r: f64,
}

impl DrowsyModel {
    pub fn feature_dim(&self) -> usize {
        self.stacks[0].net.input_dim()
    }

    /// Longest window any stack looks at.
    pub fn history_len(&self) -> usize {
        self.stacks.iter().map(|s| s.spec.timesteps).max().unwrap_or(0)
    }

    /// Classify the window ending at the last element of `history`
    /// (oldest first); missing history is zero padded.
    pub fn infer(&self, history: &[&[f64]]) -> Result<Inference> {
        let mut probs = Vec::with_capacity(self.stacks.len());
        for s in &self.stacks {
            let take = history.len().min(s.spec.timesteps);
            probs.push(s.net.predict(&history[history.len() - take..])?);
        }
        let d: Vec<f64> = probs.concat();
        let r = self.fusion.forward(&d)?;
        Ok(Inference { probs, r })
    }

    /// Batched inference over dataset windows; returns the fusion input
    /// matrix (concatenated stack probabilities) and `R` per window.
    pub fn infer_windows(&self, data: &SequenceDataset, windows: &[Window]) -> Result<(Array2<f64>, Array1<f64>)> {
        if data.dim != self.feature_dim() {
            return Err(Error::Shape {
                context: "model feature dimension",
                expected: self.feature_dim(),
                actual: data.dim,
            });
        }
        let width: usize = self.stacks.iter().map(|s| s.spec.classes.len()).sum();
        let mut d = Array2::zeros((windows.len(), width));
        const CHUNK: usize = 256;
        for (c, chunk) in windows.chunks(CHUNK).enumerate() {
            let mut col = 0;
            for s in &self.stacks {
                let x = data.gather(chunk, s.spec.timesteps);
                let p = s.net.infer(&x, chunk.len(), false)?;
                let k = p.ncols();
                d.slice_mut(ndarray::s![c * CHUNK..c * CHUNK + chunk.len(), col..col + k])
                    .assign(&p);
                col += k;
            }
        }
        let r = self.fusion.forward_batch(&d)?;
        Ok((d, r))
    }

    /// Evidence for each drowsy action, taken from the stack that models it.
    pub fn action_scores(&self, inference: &Inference) -> Vec<(ActionKind, f64)> {
        ActionKind::DROWSY
            .iter()
            .filter_map(|&kind| {
                self.stacks.iter().zip(&inference.probs).find_map(|(s, p)| {
                    s.spec
                        .classes
                        .iter()
                        .position(|&c| c == kind)
                        .map(|k| (kind, p[k]))
                })
            })
            .collect()
    }
}
