use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::FeatureExtractor;
use crate::error::{Error, Result};
use crate::motion::{generate_corpus, ActionKind, CorpusSpec, LabeledSample};
use crate::neural::{SequenceDataset, SequenceRecord};
use crate::signal::{read_wav, write_wav, AudioBuffer, ClipMode};

pub const DATASET_FORMAT: &str = "drowsense-corpus";
pub const DATASET_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.jsonl";
const MANIFEST_DIGEST: &str = "manifest.sha256";

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Frame `i` carries the action when its midpoint lies in `[start, end)`.
pub fn frame_labels(action: ActionKind, interval: Option<(f64, f64)>, frames: usize, frame_length: f64) -> Vec<ActionKind> {
    (0..frames)
        .map(|i| {
            let mid = (i as f64 + 0.5) * frame_length;
            match interval {
                Some((s, e)) if mid >= s && mid < e => action,
                _ => ActionKind::Normal,
            }
        })
        .collect()
}

/// Feature sequence of one recording at the extractor's frame length.
pub fn audio_record(
    id: u64,
    action: ActionKind,
    interval: Option<(f64, f64)>,
    audio: &AudioBuffer,
    extractor: &FeatureExtractor,
) -> Result<SequenceRecord> {
    let vectors = extractor.extract_audio(audio)?;
    let dim = extractor.dim();
    let mut features = Array2::zeros((vectors.len(), dim));
    for (mut row, v) in features.rows_mut().into_iter().zip(&vectors) {
        row.assign(&ndarray::ArrayView1::from(&v.phases[..]));
    }
    let frame_length = extractor.config().frame_length;
    Ok(SequenceRecord {
        id,
        action,
        interval,
        frame_length,
        frame_labels: frame_labels(action, interval, vectors.len(), frame_length),
        features,
    })
}

pub fn sample_record(id: u64, sample: &LabeledSample, extractor: &FeatureExtractor) -> Result<SequenceRecord> {
    audio_record(id, sample.action, sample.action_interval, &sample.audio, extractor)
}

/// Synthesize a corpus and extract its features; record ids are the corpus
/// sample indices.
pub fn build_dataset(spec: &CorpusSpec, seed: u64, extractor: &FeatureExtractor) -> Result<SequenceDataset> {
    let mut data = SequenceDataset::new(extractor.dim());
    for item in generate_corpus(spec, seed)? {
        let (recipe, sample) = item?;
        data.push(sample_record(recipe.index, &sample, extractor)?)?;
    }
    Ok(data)
}

/// First manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub spec: CorpusSpec,
    pub samples: usize,
}

/// One recording in a stored corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: u64,
    pub action: ActionKind,
    pub interval: Option<(f64, f64)>,
    pub seed: u64,
    pub sample_rate: f64,
    pub samples: usize,
    /// The WAV holds `audio / scale`; loading multiplies back.
    pub scale: f64,
    pub wav: String,
    pub wav_sha256: String,
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Write `spec` at `seed` to `dir` as WAVs plus a checksummed manifest;
/// returns the number of recordings.
pub fn save_dataset(dir: impl AsRef<Path>, spec: &CorpusSpec, seed: u64) -> Result<usize> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let corpus = generate_corpus(spec, seed)?;
    let header = ManifestHeader {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        seed,
        spec: spec.clone(),
        samples: corpus.len(),
    };
    let mut manifest = serde_json::to_string(&header)?;
    manifest.push('\n');
    for item in corpus {
        let (recipe, sample) = item?;
        let peak = sample.audio.samples().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let scale = peak.max(1.0);
        let scaled = AudioBuffer::new(
            sample.audio.samples().iter().map(|x| x / scale).collect(),
            sample.audio.sample_rate(),
        )?;
        let name = format!("{:05}_{}.wav", recipe.index, recipe.action.name().to_ascii_lowercase());
        let path = dir.join(&name);
        write_wav(&path, &scaled, ClipMode::Reject)?;
        let entry = ManifestEntry {
            id: recipe.index,
            action: recipe.action,
            interval: sample.action_interval,
            seed: recipe.seed,
            sample_rate: sample.audio.sample_rate(),
            samples: sample.audio.len(),
            scale,
            wav: name,
            wav_sha256: file_digest(&path)?,
        };
        manifest.push_str(&serde_json::to_string(&entry)?);
        manifest.push('\n');
    }
    let mpath = dir.join(MANIFEST);
    fs::write(&mpath, manifest.as_bytes()).map_err(|e| Error::io(&mpath, e))?;
    let dpath = dir.join(MANIFEST_DIGEST);
    fs::write(&dpath, format!("{}  {MANIFEST}\n", hex(&Sha256::digest(manifest.as_bytes()))))
        .map_err(|e| Error::io(&dpath, e))?;
    Ok(header.samples)
}

/// A verified corpus on disk; audio is read on demand.
#[derive(Debug, Clone)]
pub struct StoredDataset {
    pub dir: PathBuf,
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
}

/// Open a stored corpus, checking the manifest checksum and format version.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<StoredDataset> {
    let dir = dir.as_ref().to_path_buf();
    let mpath = dir.join(MANIFEST);
    let bytes = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let dpath = dir.join(MANIFEST_DIGEST);
    let digest = fs::read_to_string(&dpath).map_err(|e| Error::io(&dpath, e))?;
    let expected = digest.split_whitespace().next().unwrap_or_default();
    if hex(&Sha256::digest(&bytes)) != expected {
        return Err(Error::Corrupt {
            what: "dataset manifest",
            detail: "checksum mismatch".into(),
        });
    }
    let mut lines = BufReader::new(&bytes[..]).lines();
    let first = lines.next().ok_or_else(|| Error::Corrupt {
        what: "dataset manifest",
        detail: "empty".into(),
    })?;
    let header: ManifestHeader = serde_json::from_str(&first.map_err(|e| Error::io(&mpath, e))?)?;
    if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
        return Err(Error::Incompatible {
            what: "dataset",
            detail: format!(
                "{} v{}, expected {DATASET_FORMAT} v{DATASET_VERSION}",
                header.format, header.version
            ),
        });
    }
    let entries = lines
        .map(|l| Ok(serde_json::from_str(&l.map_err(|e| Error::io(&mpath, e))?)?))
        .collect::<Result<Vec<ManifestEntry>>>()?;
    if entries.len() != header.samples {
        return Err(Error::Corrupt {
            what: "dataset manifest",
            detail: format!("{} entries, header says {}", entries.len(), header.samples),
        });
    }
    Ok(StoredDataset { dir, header, entries })
}

impl StoredDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Audio of one recording, verified against its checksum.
    pub fn audio(&self, entry: &ManifestEntry) -> Result<AudioBuffer> {
        let path = self.dir.join(&entry.wav);
        if file_digest(&path)? != entry.wav_sha256 {
            return Err(Error::Corrupt {
                what: "dataset recording",
                detail: format!("{} checksum mismatch", entry.wav),
            });
        }
        let raw = read_wav(&path)?;
        if raw.len() != entry.samples {
            return Err(Error::Corrupt {
                what: "dataset recording",
                detail: format!("{} has {} samples, manifest says {}", entry.wav, raw.len(), entry.samples),
            });
        }
        let rate = raw.sample_rate();
        AudioBuffer::new(raw.into_samples().into_iter().map(|x| x * entry.scale).collect(), rate)
    }

    /// Feature dataset over every stored recording.
    pub fn features(&self, extractor: &FeatureExtractor) -> Result<SequenceDataset> {
        let mut data = SequenceDataset::new(extractor.dim());
        for e in &self.entries {
            data.push(audio_record(e.id, e.action, e.interval, &self.audio(e)?, extractor)?)?;
        }
        Ok(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_use_frame_midpoints() {
        let l = frame_labels(ActionKind::Nodding, Some((0.3, 0.8)), 4, 0.25);
        assert_eq!(l, [ActionKind::Normal, ActionKind::Nodding, ActionKind::Nodding, ActionKind::Normal]);
        assert!(frame_labels(ActionKind::Normal, None, 3, 0.25).iter().all(|&k| k == ActionKind::Normal));
    }
}
