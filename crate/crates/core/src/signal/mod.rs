//! Audio primitives shared by the rest of the pipeline: sampled buffers,
//! fixed-length frames, carrier generation and 16-bit PCM WAV persistence.

mod audio;
mod wav;

pub use audio::{generate_tone, segment_frames, AudioBuffer, Frame};
pub use wav::{read_wav, write_wav, ClipMode};

/// Default microphone sampling rate (Hz).
pub const DEFAULT_SAMPLE_RATE: f64 = 44_100.0;
/// Default emitted carrier (Hz).
pub const DEFAULT_CARRIER: f64 = 20_000.0;
/// Default frame length (s).
pub const DEFAULT_FRAME_LENGTH: f64 = 0.25;
