use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled mono audio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::param("sample_rate", format!("must be positive, got {sample_rate}")));
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample(index));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds, `len / sample_rate`.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// A contiguous chunk of a buffer; the unit of feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub index: u64,
    pub start_time: f64,
}

impl Frame {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration()
    }
}

/// Cosine carrier `amplitude * cos(2π f0 k / fs)` with phase origin at sample 0.
pub fn generate_tone(f0: f64, fs: f64, duration: f64, amplitude: f64) -> Result<AudioBuffer> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::param("fs", format!("must be positive, got {fs}")));
    }
    if !(f0 > 0.0) {
        return Err(Error::param("f0", format!("must be positive, got {f0}")));
    }
    if f0 >= fs / 2.0 {
        return Err(Error::AboveNyquist {
            f0,
            nyquist: fs / 2.0,
        });
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::param("duration", format!("must be positive, got {duration}")));
    }
    if !amplitude.is_finite() {
        return Err(Error::param("amplitude", "must be finite"));
    }
    let len = (duration * fs).round() as usize;
    let w = 2.0 * PI * f0 / fs;
    let samples = (0..len).map(|k| amplitude * (w * k as f64).cos()).collect();
    AudioBuffer::new(samples, fs)
}

/// Cuts `buffer` into back-to-back frames of `round(frame_length * fs)` samples.
///
/// A trailing partial frame is dropped; a buffer shorter than one frame yields
/// no frames.
pub fn segment_frames(buffer: &AudioBuffer, frame_length: f64) -> Result<Vec<Frame>> {
    if !(frame_length.is_finite() && frame_length > 0.0) {
        return Err(Error::param(
            "frame_length",
            format!("must be positive, got {frame_length}"),
        ));
    }
    let fs = buffer.sample_rate();
    let per_frame = (frame_length * fs).round() as usize;
    if per_frame == 0 {
        return Err(Error::param("frame_length", "shorter than one sample"));
    }
    Ok(buffer
        .samples()
        .chunks_exact(per_frame)
        .enumerate()
        .map(|(i, chunk)| Frame {
            samples: chunk.to_vec(),
            sample_rate: fs,
            index: i as u64,
            start_time: i as f64 * frame_length,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rustfft::{num_complex::Complex, FftPlanner};

    fn power_spectrum(x: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        buf[..=x.len() / 2].iter().map(|c| c.norm_sqr()).collect()
    }

    #[test]
    fn tone_starts_at_cosine_peak() {
        let tone = generate_tone(20_000.0, 44_100.0, 1.0, 1.0).unwrap();
        assert_eq!(tone.len(), 44_100);
        assert_eq!(tone.samples()[0], 1.0);
        assert_eq!(tone.duration(), 1.0);
    }

    #[test]
    fn tone_peak_bin_is_the_carrier() {
        let tone = generate_tone(20_000.0, 44_100.0, 1.0, 1.0).unwrap();
        let p = power_spectrum(tone.samples());
        let peak = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        // 1 s of audio gives 1 Hz bins.
        assert!((peak as f64 - 20_000.0).abs() <= 1.0, "peak at {peak}");
    }

    #[test]
    fn zero_amplitude_is_silence() {
        let tone = generate_tone(20_000.0, 44_100.0, 0.5, 0.0).unwrap();
        assert!(tone.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn tone_at_or_above_nyquist_is_rejected() {
        assert!(matches!(
            generate_tone(22_050.0, 44_100.0, 1.0, 1.0),
            Err(Error::AboveNyquist { .. })
        ));
        assert!(generate_tone(20_000.0, 44_100.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn segmentation_counts() {
        let one = generate_tone(1_000.0, 44_100.0, 1.0, 1.0).unwrap();
        let frames = segment_frames(&one, 0.25).unwrap();
        assert_eq!(frames.len(), 4);
        assert!(frames.iter().all(|f| f.samples.len() == 11_025));
        assert_eq!(frames[3].start_time, 0.75);

        let quarter = generate_tone(1_000.0, 44_100.0, 0.25, 1.0).unwrap();
        assert_eq!(segment_frames(&quarter, 0.25).unwrap().len(), 1);

        let almost = generate_tone(1_000.0, 44_100.0, 0.999, 1.0).unwrap();
        assert_eq!(segment_frames(&almost, 0.25).unwrap().len(), 3);

        let short = generate_tone(1_000.0, 44_100.0, 0.1, 1.0).unwrap();
        assert!(segment_frames(&short, 0.25).unwrap().is_empty());
        assert!(segment_frames(&short, 0.0).is_err());
    }

    #[test]
    fn rejects_non_finite_samples() {
        assert!(matches!(
            AudioBuffer::new(vec![0.0, f64::NAN], 8_000.0),
            Err(Error::NonFiniteSample(1))
        ));
        assert!(AudioBuffer::new(vec![0.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn frames_partition_the_prefix(len in 0usize..5000, frame_len in 1usize..700) {
            let samples: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin()).collect();
            let buf = AudioBuffer::new(samples.clone(), 1000.0).unwrap();
            let frames = segment_frames(&buf, frame_len as f64 / 1000.0).unwrap();
            prop_assert_eq!(frames.len(), len / frame_len);
            let joined: Vec<f64> = frames.iter().flat_map(|f| f.samples.iter().copied()).collect();
            prop_assert_eq!(&joined[..], &samples[..frames.len() * frame_len]);
            for (i, f) in frames.iter().enumerate() {
                prop_assert_eq!(f.index, i as u64);
            }
        }

        // Bin-aligned carriers put nearly all energy within two bins.
        #[test]
        fn tone_is_spectrally_pure(bin in 1usize..1023) {
            let fs = 2048.0;
            let tone = generate_tone(bin as f64, fs, 1.0, 0.8).unwrap();
            let p = power_spectrum(tone.samples());
            let total: f64 = p.iter().sum();
            let near: f64 = p[bin.saturating_sub(2)..=(bin + 2).min(p.len() - 1)].iter().sum();
            prop_assert!(near >= 0.99 * total);
        }
    }
}
