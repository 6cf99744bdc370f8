use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::filter::{BandpassFilter, FilterSpec};
use super::spectrum::{FrameMeta, Spectrum, SpectrumAnalyzer, DEFAULT_FFT_SIZE};
use super::{undersample, BandSpec, UndersamplePlan};
use crate::error::{Error, Result};
use crate::signal::{segment_frames, AudioBuffer, Frame, DEFAULT_FRAME_LENGTH, DEFAULT_SAMPLE_RATE};

/// Phases of the FFT bins covering the folded target band, one per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub phases: Vec<f64>,
    /// Magnitudes of the same bins; only filled when diagnostics are enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    /// Inclusive range of FFT bins that produced `phases`.
    pub band_bins: (usize, usize),
    pub frame_meta: FrameMeta,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.phases.len()
    }
}

/// Angle of `c` in (-pi, pi].
pub fn wrapped_phase(re: f64, im: f64) -> f64 {
    let p = im.atan2(re);
    if p <= -PI {
        PI
    } else {
        p
    }
}

/// Inclusive range of bins whose centre frequency lies in the folded band.
pub fn band_bin_range(band: &BandSpec, plan: &UndersamplePlan, fft_size: usize) -> Result<(usize, usize)> {
    let resolution = plan.fs_star() / fft_size as f64;
    let (lo, hi) = plan.aliased_band(band);
    let first = (lo / resolution).ceil() as usize;
    let last = ((hi / resolution).floor() as usize).min(fft_size / 2);
    if first > last {
        return Err(Error::EmptyBand);
    }
    Ok((first, last))
}

pub fn phase_features(spectrum: &Spectrum, band: &BandSpec, plan: &UndersamplePlan) -> Result<FeatureVector> {
    if spectrum.frame_meta.sample_rate != plan.fs_star() {
        return Err(Error::RateMismatch {
            expected: plan.fs_star(),
            actual: spectrum.frame_meta.sample_rate,
        });
    }
    let range = band_bin_range(band, plan, spectrum.fft_size())?;
    Ok(select_bins(spectrum, range, false))
}

fn select_bins(spectrum: &Spectrum, (first, last): (usize, usize), amplitude: bool) -> FeatureVector {
    let bins = &spectrum.bins[first..=last];
    FeatureVector {
        phases: bins.iter().map(|c| wrapped_phase(c.re, c.im)).collect(),
        amplitudes: amplitude.then(|| bins.iter().map(|c| c.norm()).collect()),
        band_bins: (first, last),
        frame_meta: spectrum.frame_meta,
    }
}

/// Full front-end configuration; two extractors with equal configs produce
/// identical features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate: f64,
    pub frame_length: f64,
    pub band: BandSpec,
    pub factor: usize,
    pub fft_size: usize,
    pub window: String,
    pub filter: FilterSpec,
    /// Also emit bin magnitudes (diagnostics only).
    #[serde(default)]
    pub include_amplitude: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            frame_length: DEFAULT_FRAME_LENGTH,
            band: BandSpec::default(),
            factor: 8,
            fft_size: DEFAULT_FFT_SIZE,
            window: "rectangular".into(),
            filter: FilterSpec::default(),
            include_amplitude: false,
        }
    }
}

impl FeatureConfig {
    /// Default configuration at another frame length, growing the FFT to the
    /// next power of two when the decimated frame no longer fits.
    pub fn with_frame_length(frame_length: f64) -> Self {
        let mut config = Self {
            frame_length,
            ..Self::default()
        };
        let decimated = config.frame_samples().div_ceil(config.factor);
        config.fft_size = DEFAULT_FFT_SIZE.max(decimated.next_power_of_two());
        config
    }

    pub fn frame_samples(&self) -> usize {
        (self.frame_length * self.sample_rate).round() as usize
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Band-pass, decimate, FFT and phase selection with all stages precomputed.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    plan: UndersamplePlan,
    filter: BandpassFilter,
    analyzer: SpectrumAnalyzer,
    range: (usize, usize),
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        if !(config.frame_length > 0.0) {
            return Err(Error::param("frame_length", "must be positive"));
        }
        let plan = UndersamplePlan::new(config.sample_rate, config.factor, &config.band)?;
        let filter = BandpassFilter::design(&config.band, config.sample_rate, &config.filter)?;
        let analyzer = SpectrumAnalyzer::new(config.fft_size, &config.window)?;
        let decimated = plan.output_len(config.frame_samples());
        if decimated > config.fft_size {
            return Err(Error::FrameTooLong {
                len: decimated,
                fft_size: config.fft_size,
            });
        }
        let range = band_bin_range(&config.band, &plan, config.fft_size)?;
        Ok(Self {
            config,
            plan,
            filter,
            analyzer,
            range,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn plan(&self) -> &UndersamplePlan {
        &self.plan
    }

    pub fn filter(&self) -> &BandpassFilter {
        &self.filter
    }

    pub fn dim(&self) -> usize {
        self.range.1 - self.range.0 + 1
    }

    pub fn band_bins(&self) -> (usize, usize) {
        self.range
    }

    fn check_rate(&self, frame: &Frame) -> Result<()> {
        if frame.sample_rate != self.config.sample_rate {
            return Err(Error::RateMismatch {
                expected: self.config.sample_rate,
                actual: frame.sample_rate,
            });
        }
        Ok(())
    }

    /// Band-passed and decimated frame, computing only the retained outputs.
    pub fn decimate(&self, frame: &Frame) -> Result<Frame> {
        self.check_rate(frame)?;
        Ok(Frame {
            samples: self.filter.apply_strided(&frame.samples, self.plan.n()),
            sample_rate: self.plan.fs_star(),
            index: frame.index,
            start_time: frame.start_time,
        })
    }

    pub fn extract(&self, frame: &Frame) -> Result<FeatureVector> {
        let spectrum = self.analyzer.transform(&self.decimate(frame)?)?;
        Ok(select_bins(&spectrum, self.range, self.config.include_amplitude))
    }

    /// Same result as [`extract`](Self::extract), running every stage on the
    /// full-rate signal before decimating.
    pub fn extract_staged(&self, frame: &Frame) -> Result<FeatureVector> {
        self.check_rate(frame)?;
        let filtered = Frame {
            samples: self.filter.apply(&frame.samples),
            ..frame.clone()
        };
        let decimated = undersample(&filtered, &self.plan)?;
        let spectrum = self.analyzer.transform(&decimated)?;
        Ok(select_bins(&spectrum, self.range, self.config.include_amplitude))
    }

    /// Segment `audio` into frames and extract each one.
    pub fn extract_audio(&self, audio: &AudioBuffer) -> Result<Vec<FeatureVector>> {
        segment_frames(audio, self.config.frame_length)?
            .iter()
            .map(|f| self.extract(f))
            .collect()
    }
}

pub fn extract_features(frame: &Frame, config: &FeatureConfig) -> Result<FeatureVector> {
    FeatureExtractor::new(config.clone())?.extract(frame)
}
