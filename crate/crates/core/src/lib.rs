//! Acoustic drowsy-driving detection.
//!
//! A phone emits a 20 kHz tone and listens to its own reflections. Head and
//! hand motion shifts the reflected carrier by a few tens of hertz; the
//! pipeline band-passes each 0.25 s frame, undersamples it so the band folds
//! to ~2 kHz, keeps the FFT phases of the folded band and feeds them to two
//! LSTM classifiers whose outputs a small dense network fuses into a
//! drowsiness probability.

pub mod detector;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod motion;
pub mod neural;
pub mod registry;
pub mod signal;

pub use error::{Error, Result};
