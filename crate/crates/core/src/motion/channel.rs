use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ActionKind, MotionProfile, PhaseMarker, SPEED_OF_SOUND};
use crate::error::{Error, Result};
use crate::signal::{AudioBuffer, DEFAULT_CARRIER, DEFAULT_FRAME_LENGTH, DEFAULT_SAMPLE_RATE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticPath {
    /// Propagation delay (s).
    pub delay: f64,
    pub gain: f64,
}

/// How path length maps to carrier delay.
///
/// `OneWay` delays by `d/c`, giving the `(Δv/c)·f0` shift. `RoundTrip` delays
/// by `2d/c`, the physical factor for a reflector moving toward a co-located
/// speaker and microphone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PathConvention {
    #[default]
    OneWay,
    RoundTrip,
}

impl PathConvention {
    pub fn factor(self) -> f64 {
        match self {
            PathConvention::OneWay => 1.0,
            PathConvention::RoundTrip => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub static_paths: Vec<StaticPath>,
    pub moving_path_gain: f64,
    pub noise_std: f64,
    pub speed_of_sound: f64,
    #[serde(default)]
    pub convention: PathConvention,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            static_paths: vec![
                // Speaker-to-microphone leakage across the handset body.
                StaticPath { delay: 0.1 / SPEED_OF_SOUND, gain: 1.0 },
                StaticPath { delay: 0.004, gain: 0.05 },
            ],
            moving_path_gain: 0.2,
            noise_std: 0.01,
            speed_of_sound: SPEED_OF_SOUND,
            convention: PathConvention::OneWay,
        }
    }
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.static_paths.iter().any(|p| !(p.gain >= 0.0) || !(p.delay >= 0.0)) {
            return Err(Error::param("static_paths", "gains and delays must be non-negative"));
        }
        if !(self.moving_path_gain >= 0.0) {
            return Err(Error::param("moving_path_gain", "must be non-negative"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::param("noise_std", "must be non-negative"));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(Error::param("speed_of_sound", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub f0: f64,
    pub fs: f64,
    /// Frame length used for the per-frame step annotations.
    pub frame_length: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            f0: DEFAULT_CARRIER,
            fs: DEFAULT_SAMPLE_RATE,
            frame_length: DEFAULT_FRAME_LENGTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SampleSource {
    #[default]
    Simulated,
}

/// Per-frame annotation: the action and the step of it the frame belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepLabel {
    pub action: ActionKind,
    pub step: String,
}

impl StepLabel {
    pub fn normal() -> Self {
        Self {
            action: ActionKind::Normal,
            step: "none".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub audio: AudioBuffer,
    pub action: ActionKind,
    pub action_interval: Option<(f64, f64)>,
    pub phase_markers: Vec<PhaseMarker>,
    pub frame_length: f64,
    /// One entry per whole frame of `audio`.
    pub steps: Vec<StepLabel>,
    pub source: SampleSource,
    pub seed: u64,
}

impl LabeledSample {
    /// Frame-level class: the action when the frame's midpoint lies in the
    /// action interval, otherwise `Normal`.
    pub fn frame_actions(&self) -> Vec<ActionKind> {
        self.steps.iter().map(|s| s.action).collect()
    }
}

pub(crate) fn annotate_frames(profile: &MotionProfile, n_frames: usize, frame_length: f64) -> Vec<StepLabel> {
    (0..n_frames)
        .map(|i| {
            let mid = (i as f64 + 0.5) * frame_length;
            match profile.step_at(mid) {
                Some(step) => StepLabel {
                    action: profile.action,
                    step: step.to_string(),
                },
                None => StepLabel::normal(),
            }
        })
        .collect()
}

/// Renders the microphone signal for `profile` through `channel`:
/// static paths, the moving reflection delayed by `d(t)/c` (or `2d(t)/c`),
/// and white Gaussian noise drawn from `seed`.
pub fn synthesize_received(
    profile: &MotionProfile,
    channel: &ChannelSpec,
    opts: &SynthesisOptions,
    seed: u64,
) -> Result<LabeledSample> {
    channel.validate()?;
    let SynthesisOptions { f0, fs, frame_length } = *opts;
    if !(fs > 0.0) {
        return Err(Error::param("fs", "must be positive"));
    }
    if f0 >= fs / 2.0 {
        return Err(Error::AboveNyquist { f0, nyquist: fs / 2.0 });
    }
    if !(frame_length > 0.0) {
        return Err(Error::param("frame_length", "must be positive"));
    }
    let len = (profile.duration * fs).round() as usize;
    let w = 2.0 * PI * f0;

    // The static paths share one frequency, so they collapse to one phasor.
    let (re, im) = channel.static_paths.iter().fold((0.0, 0.0), |(re, im), p| {
        let phi = w * p.delay;
        (re + p.gain * phi.cos(), im + p.gain * phi.sin())
    });
    let static_gain = re.hypot(im);
    let static_phase = im.atan2(re);

    let delay_per_metre = channel.convention.factor() / channel.speed_of_sound;
    let gm = channel.moving_path_gain;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, channel.noise_std).map_err(|e| Error::param("noise_std", e.to_string()))?;

    let samples: Vec<f64> = (0..len)
        .map(|k| {
            let t = k as f64 / fs;
            let mut x = static_gain * (w * t - static_phase).cos();
            if gm != 0.0 {
                x += gm * (w * (t - profile.path_length(t) * delay_per_metre)).cos();
            }
            if channel.noise_std > 0.0 {
                x += noise.sample(&mut rng);
            }
            x
        })
        .collect();
    let audio = AudioBuffer::new(samples, fs)?;
    let per_frame = (frame_length * fs).round() as usize;
    let n_frames = if per_frame == 0 { 0 } else { len / per_frame };
    Ok(LabeledSample {
        audio,
        action: profile.action,
        action_interval: profile.action_interval,
        phase_markers: profile.phase_markers.clone(),
        frame_length,
        steps: annotate_frames(profile, n_frames, frame_length),
        source: SampleSource::Simulated,
        seed,
    })
}
