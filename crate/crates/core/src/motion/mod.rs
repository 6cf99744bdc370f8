//! Synthetic received-signal generator.
//!
//! A body part moving in front of the phone changes the length `d(t)` of the
//! speaker → reflector → microphone path; delaying the carrier by `d(t)/c`
//! produces the Doppler shift the detector keys on.

mod channel;
mod corpus;
mod profile;

pub use channel::{
    synthesize_received, ChannelSpec, LabeledSample, PathConvention, SampleSource, StaticPath,
    StepLabel, SynthesisOptions,
};
pub use corpus::{generate_corpus, ChannelRanges, Corpus, CorpusSpec, SampleRecipe, Span};
pub use profile::{
    motion_profile, pattern_registry, ActionKind, ActionPattern, Drift, MotionProfile,
    PhaseMarker, ProfileParams, Segment,
};

use crate::error::{Error, Result};

/// Speed of sound in air (m/s).
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Largest path speed keeping the shift inside ±200 Hz of a 20 kHz carrier.
pub const DEFAULT_V_MAX: f64 = 3.43;

/// Frequency offset `(Δv / c) · f0` seen for relative velocity `delta_v`.
///
/// Positive `delta_v` means source and observer approach each other.
pub fn doppler_shift(delta_v: f64, f0: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::param("c", format!("must be positive, got {c}")));
    }
    if !(delta_v.abs() < c) {
        return Err(Error::Nonphysical {
            velocity: delta_v,
            c,
        });
    }
    Ok(delta_v / c * f0)
}

/// SplitMix64 finalizer; derives independent per-item seeds from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
