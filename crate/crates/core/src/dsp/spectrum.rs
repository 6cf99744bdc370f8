use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{Named, Registry};
use crate::signal::Frame;

pub const DEFAULT_FFT_SIZE: usize = 2048;

/// Where a spectrum or feature vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub index: u64,
    pub start_time: f64,
    /// Rate of the samples that were transformed (Hz).
    pub sample_rate: f64,
    pub len: usize,
}

impl FrameMeta {
    pub fn of(frame: &Frame) -> Self {
        Self {
            index: frame.index,
            start_time: frame.start_time,
            sample_rate: frame.sample_rate,
            len: frame.samples.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<Complex64>,
    pub bin_resolution: f64,
    pub frame_meta: FrameMeta,
}

impl Spectrum {
    pub fn fft_size(&self) -> usize {
        self.bins.len()
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.bin_resolution
    }

    /// Index of the largest-magnitude bin in the non-negative half.
    pub fn peak_bin(&self) -> usize {
        self.bins[..=self.bins.len() / 2]
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (k, c)| {
                let m = c.norm_sqr();
                if m > best.1 {
                    (k, m)
                } else {
                    best
                }
            })
            .0
    }
}

/// Taper applied to the samples before zero padding.
pub trait FftWindow: Named + Send + Sync {
    fn coefficients(&self, len: usize) -> Vec<f64>;
}

struct Rectangular;

impl Named for Rectangular {
    fn name(&self) -> &str {
        "rectangular"
    }
}

impl FftWindow for Rectangular {
    fn coefficients(&self, len: usize) -> Vec<f64> {
        vec![1.0; len]
    }
}

struct Hann;

impl Named for Hann {
    fn name(&self) -> &str {
        "hann"
    }
}

impl FftWindow for Hann {
    fn coefficients(&self, len: usize) -> Vec<f64> {
        if len < 2 {
            return vec![1.0; len];
        }
        (0..len)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (len - 1) as f64).cos())
            .collect()
    }
}

pub fn window_registry() -> &'static Registry<dyn FftWindow> {
    static REGISTRY: OnceLock<Registry<dyn FftWindow>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut r: Registry<dyn FftWindow> = Registry::new("window");
        r.register(Arc::new(Rectangular));
        r.register(Arc::new(Hann));
        r
    })
}

/// Reusable zero-padded FFT of a fixed size with a precomputed window.
#[derive(Clone)]
pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    size: usize,
    window: Arc<dyn FftWindow>,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer")
            .field("size", &self.size)
            .field("window", &self.window.name())
            .finish()
    }
}

impl SpectrumAnalyzer {
    pub fn new(size: usize, window: &str) -> Result<Self> {
        if size == 0 {
            return Err(Error::param("fft_size", "must be positive"));
        }
        Ok(Self {
            fft: FftPlanner::new().plan_fft_forward(size),
            size,
            window: window_registry().get(window)?,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn window(&self) -> &str {
        self.window.name()
    }

    pub fn transform(&self, frame: &Frame) -> Result<Spectrum> {
        let len = frame.samples.len();
        if len > self.size {
            return Err(Error::FrameTooLong {
                len,
                fft_size: self.size,
            });
        }
        let mut bins = vec![Complex64::new(0.0, 0.0); self.size];
        for (b, &x) in bins.iter_mut().zip(&frame.samples) {
            b.re = x;
        }
        if self.window.name() != "rectangular" {
            for (b, w) in bins.iter_mut().zip(self.window.coefficients(len)) {
                b.re *= w;
            }
        }
        self.fft.process(&mut bins);
        Ok(Spectrum {
            bins,
            bin_resolution: frame.sample_rate / self.size as f64,
            frame_meta: FrameMeta::of(frame),
        })
    }
}

/// Rectangular-window 2048-point DFT of the zero-padded frame.
pub fn fft_spectrum(frame: &Frame) -> Result<Spectrum> {
    SpectrumAnalyzer::new(DEFAULT_FFT_SIZE, "rectangular")?.transform(frame)
}
