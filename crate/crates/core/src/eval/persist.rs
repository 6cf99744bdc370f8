use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::hex;
use crate::dsp::FeatureConfig;
use crate::error::{Error, Result};
use crate::neural::{DrowsyModel, FusionDnn, LstmStack, StackSpec, TrainedStack};

const MAGIC: &[u8; 8] = b"DRWSMDL\0";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StackHeader {
    spec: StackSpec,
    input_dim: usize,
    hidden: usize,
    classes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelHeader {
    architecture: String,
    dsp: FeatureConfig,
    dsp_fingerprint: String,
    stacks: Vec<StackHeader>,
    fusion_input: usize,
    fusion_hidden: usize,
    parameters: usize,
}

/// Every tensor of the model in storage order, including running statistics.
fn tensors(model: &DrowsyModel) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for s in &model.stacks {
        let n = &s.net;
        for bn in &n.norms {
            out.extend([&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var].map(|a| a.to_vec()));
        }
        for c in &n.layers {
            out.push(c.w_x.iter().copied().collect());
            out.push(c.w_h.iter().copied().collect());
            out.push(c.b.to_vec());
        }
        out.push(n.head_w.iter().copied().collect());
        out.push(n.head_b.to_vec());
    }
    let f = &model.fusion;
    out.push(f.w1.iter().copied().collect());
    out.push(f.b1.to_vec());
    out.push(f.w2.to_vec());
    out.push(f.b2.to_vec());
    out
}

fn tensors_mut(model: &mut DrowsyModel) -> Vec<ndarray::ArrayViewMutD<'_, f64>> {
    let mut out = Vec::new();
    for s in &mut model.stacks {
        let n = &mut s.net;
        for bn in &mut n.norms {
            out.push(bn.gamma.view_mut().into_dyn());
            out.push(bn.beta.view_mut().into_dyn());
            out.push(bn.running_mean.view_mut().into_dyn());
            out.push(bn.running_var.view_mut().into_dyn());
        }
        for c in &mut n.layers {
            out.push(c.w_x.view_mut().into_dyn());
            out.push(c.w_h.view_mut().into_dyn());
            out.push(c.b.view_mut().into_dyn());
        }
        out.push(n.head_w.view_mut().into_dyn());
        out.push(n.head_b.view_mut().into_dyn());
    }
    let f = &mut model.fusion;
    out.push(f.w1.view_mut().into_dyn());
    out.push(f.b1.view_mut().into_dyn());
    out.push(f.w2.view_mut().into_dyn());
    out.push(f.b2.view_mut().into_dyn());
    out
}

/// Binary model file: magic, version, JSON header, little-endian `f64`
/// parameters, SHA-256 of everything before it.
pub fn encode_model(model: &DrowsyModel) -> Result<Vec<u8>> {
    let params: Vec<f64> = tensors(model).concat();
    let header = ModelHeader {
        architecture: model.architecture.clone(),
        dsp: model.dsp.clone(),
        dsp_fingerprint: model.dsp.fingerprint(),
        stacks: model
            .stacks
            .iter()
            .map(|s| StackHeader {
                spec: s.spec.clone(),
                input_dim: s.net.input_dim(),
                hidden: s.net.hidden(),
                classes: s.net.classes.clone(),
            })
            .collect(),
        fusion_input: model.fusion.input_dim(),
        fusion_hidden: model.fusion.b1.len(),
        parameters: params.len(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(24 + json.len() + 8 * params.len() + 32);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for p in params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    Ok(buf)
}

fn corrupt(detail: impl Into<String>) -> Error {
    Error::Corrupt {
        what: "model file",
        detail: detail.into(),
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<DrowsyModel> {
    if bytes.len() < MAGIC.len() + 12 + 32 || &bytes[..8] != MAGIC {
        return Err(corrupt("not a model file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != MODEL_VERSION {
        return Err(Error::Incompatible {
            what: "model",
            detail: format!("format version {version}, expected {MODEL_VERSION}"),
        });
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum mismatch"));
    }
    let json_len = u64::from_le_bytes(body[12..20].try_into().expect("8 bytes")) as usize;
    let json = body.get(20..20 + json_len).ok_or_else(|| corrupt("truncated header"))?;
    let header: ModelHeader = serde_json::from_slice(json)?;
    if header.dsp.fingerprint() != header.dsp_fingerprint {
        return Err(Error::Incompatible {
            what: "model",
            detail: "front-end fingerprint does not match its configuration".into(),
        });
    }
    let raw = &body[20 + json_len..];
    if raw.len() != 8 * header.parameters {
        return Err(corrupt(format!("{} parameter bytes, expected {}", raw.len(), 8 * header.parameters)));
    }

    let stacks = header
        .stacks
        .iter()
        .map(|s| {
            Ok(TrainedStack {
                spec: s.spec.clone(),
                net: LstmStack::new(s.input_dim, s.hidden, s.spec.layers, s.spec.timesteps, s.classes.clone(), 0)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut model = DrowsyModel {
        architecture: header.architecture,
        dsp: header.dsp,
        stacks,
        fusion: FusionDnn::zeros(header.fusion_input, header.fusion_hidden),
    };
    let mut values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut expected = 0;
    for mut t in tensors_mut(&mut model) {
        expected += t.len();
        for v in t.iter_mut() {
            *v = values.next().ok_or_else(|| corrupt("parameter count below layout"))?;
        }
    }
    if expected != header.parameters {
        return Err(corrupt(format!("layout needs {expected} parameters, file has {}", header.parameters)));
    }
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &DrowsyModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DrowsyModel> {
    let path = path.as_ref();
    decode_model(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Reject a model whose front end differs from `dsp`.
pub fn check_compatible(model: &DrowsyModel, dsp: &FeatureConfig) -> Result<()> {
    let (have, want) = (model.dsp.fingerprint(), dsp.fingerprint());
    if have != want {
        return Err(Error::Incompatible {
            what: "model",
            detail: format!("trained with front end {}, asked for {}", &have[..12], &want[..12]),
        });
    }
    Ok(())
}

/// Hex digest of the encoded model.
pub fn model_digest(model: &DrowsyModel) -> Result<String> {
    Ok(hex(&Sha256::digest(encode_model(model)?)))
}
