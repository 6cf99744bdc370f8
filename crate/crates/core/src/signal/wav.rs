//! 16-bit PCM mono WAV I/O.
//!
//! Samples map to integers as `round(x * 32768)` clamped to the i16 range and
//! back as `k / 32768`, so reading then writing a valid file reproduces its
//! samples exactly and the write/read error of any sample in [-1, 1] is at
//! most 2^-15 (reached only at +1.0).

use std::path::Path;

use hound::{SampleFormat, WavSpec};

use super::AudioBuffer;
use crate::error::{Error, Result};

const SCALE: f64 = 32768.0;

/// Handling of samples outside [-1, 1] on write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClipMode {
    #[default]
    Clip,
    Reject,
}

fn to_pcm(x: f64) -> i16 {
    (x * SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn write_wav(path: impl AsRef<Path>, buffer: &AudioBuffer, mode: ClipMode) -> Result<()> {
    let path = path.as_ref();
    if mode == ClipMode::Reject {
        if let Some((index, &value)) = buffer
            .samples()
            .iter()
            .enumerate()
            .find(|(_, s)| s.abs() > 1.0)
        {
            return Err(Error::SampleOutOfRange { index, value });
        }
    }
    let rate = buffer.sample_rate();
    if rate.fract() != 0.0 || rate > u32::MAX as f64 {
        return Err(Error::WavFormat(format!("sample rate {rate} is not an integer")));
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: rate as u32,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    let mut w16 = writer.get_i16_writer(buffer.len() as u32);
    for &s in buffer.samples() {
        w16.write_sample(to_pcm(s));
    }
    w16.flush().map_err(|e| map_hound(path, e))?;
    writer.finalize().map_err(|e| map_hound(path, e))
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::WavFormat(format!(
            "expected mono, found {} channels",
            spec.channels
        )));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::WavFormat(format!(
            "expected 16-bit PCM, found {:?} {} bits",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| map_hound(path, e))?;
    AudioBuffer::new(samples, spec.sample_rate as f64)
}

fn map_hound(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io)
            if matches!(
                io.kind(),
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied
            ) =>
        {
            Error::io(path, io)
        }
        other => Error::WavFormat(format!("{}: {other}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::generate_tone;

    #[test]
    fn silence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("silence.wav");
        let silence = AudioBuffer::new(vec![0.0; 44_100], 44_100.0).unwrap();
        write_wav(&path, &silence, ClipMode::Clip).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back, silence);
        // 44-byte canonical header + 2 bytes per sample.
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 44 + 2 * 44_100);
    }

    #[test]
    fn tone_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tone.wav");
        let tone = generate_tone(20_000.0, 44_100.0, 0.5, 1.0).unwrap();
        write_wav(&path, &tone, ClipMode::Reject).unwrap();
        let back = read_wav(&path).unwrap();
        let err = tone
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 2f64.powi(-15), "max error {err}");
    }

    #[test]
    fn read_then_write_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.wav");
        let b = dir.path().join("b.wav");
        let samples: Vec<i16> = (0..4000).map(|i| ((i * 7919) % 65536) as u16 as i16).collect();
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&a, spec).unwrap();
        for &s in &samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        write_wav(&b, &read_wav(&a).unwrap(), ClipMode::Reject).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn clip_and_reject_modes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loud.wav");
        let loud = AudioBuffer::new(vec![0.5, 1.5, -2.0], 8000.0).unwrap();
        assert!(matches!(
            write_wav(&path, &loud, ClipMode::Reject),
            Err(Error::SampleOutOfRange { index: 1, .. })
        ));
        write_wav(&path, &loud, ClipMode::Clip).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.samples(), &[0.5, 32767.0 / 32768.0, -1.0]);
    }

    #[test]
    fn rejects_stereo_float_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let stereo = dir.path().join("stereo.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&stereo, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&stereo), Err(Error::WavFormat(_))));

        let float = dir.path().join("float.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&float, spec).unwrap();
        w.write_sample(0.25f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&float), Err(Error::WavFormat(_))));

        let garbage = dir.path().join("garbage.wav");
        std::fs::write(&garbage, b"RIFF\x10\x00\x00\x00WAVEjunkjunk").unwrap();
        assert!(matches!(read_wav(&garbage), Err(Error::WavFormat(_))));
    }
}
