use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::StreamState;
use crate::error::Result;
use crate::signal::Frame;

/// Anything that consumes frames in real time.
pub trait FramePipeline {
    fn process(&mut self, frame: &Frame) -> Result<()>;
}

impl FramePipeline for StreamState {
    fn process(&mut self, frame: &Frame) -> Result<()> {
        self.push_frame(frame).map(|_| ())
    }
}

/// Does nothing; gives the measurement floor.
#[derive(Debug, Default, Clone, Copy)]
pub struct PassthroughPipeline;

impl FramePipeline for PassthroughPipeline {
    fn process(&mut self, frame: &Frame) -> Result<()> {
        std::hint::black_box(frame);
        Ok(())
    }
}

/// Wall-clock seconds spent processing one frame.
pub fn realtime_budget_check<P: FramePipeline + ?Sized>(pipeline: &mut P, frame: &Frame) -> Result<f64> {
    let start = Instant::now();
    pipeline.process(frame)?;
    Ok(start.elapsed().as_secs_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub frames: usize,
    pub mean: f64,
    pub p50: f64,
    pub p99: f64,
    pub max: f64,
    /// Real-time budget per frame (s).
    pub budget: f64,
}

impl BudgetReport {
    pub fn within_budget(&self) -> bool {
        self.p99 < self.budget
    }
}

/// Time every frame of a sustained run; `frames` are processed in order.
pub fn sustained_budget<P: FramePipeline + ?Sized>(pipeline: &mut P, frames: &[Frame], budget: f64) -> Result<BudgetReport> {
    let mut times = Vec::with_capacity(frames.len());
    for f in frames {
        times.push(realtime_budget_check(pipeline, f)?);
    }
    let n = times.len();
    let mean = times.iter().sum::<f64>() / n.max(1) as f64;
    times.sort_by(f64::total_cmp);
    let pct = |q: f64| {
        if n == 0 {
            0.0
        } else {
            times[((q * n as f64).ceil() as usize).clamp(1, n) - 1]
        }
    };
    Ok(BudgetReport {
        frames: n,
        mean,
        p50: pct(0.5),
        p99: pct(0.99),
        max: times.last().copied().unwrap_or(0.0),
        budget,
    })
}
