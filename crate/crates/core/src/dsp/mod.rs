//! Audio frame to phase feature vector: band-pass filter, band-pass
//! undersampling, zero-padded FFT and selection of the bins that hold the
//! folded target band.
//!
//! With the defaults (44.1 kHz, 19.8 to 20.2 kHz, n = 8) the band folds to
//! 1850..2250 Hz at 5512.5 Hz, spectrally inverted, and a 0.25 s frame
//! decimates to 1379 samples zero-padded to 2048 points.

mod band;
mod dump;
mod features;
mod filter;
mod spectrum;

pub use band::{alias_frequency, undersample, valid_undersampling_rates, BandSpec, UndersamplePlan};
pub use dump::{read_feature_dump, write_feature_dump, DumpHeader, DumpRow};
pub use features::{
    band_bin_range, extract_features, phase_features, wrapped_phase, FeatureConfig,
    FeatureExtractor, FeatureVector,
};
pub use filter::{bandpass, BandpassFilter, FilterSpec};
pub use spectrum::{
    fft_spectrum, window_registry, FftWindow, FrameMeta, Spectrum, SpectrumAnalyzer,
    DEFAULT_FFT_SIZE,
};
