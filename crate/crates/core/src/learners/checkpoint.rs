//! Binary checkpoint: magic, format version, length-prefixed JSON header,
//! then every parameter as little-endian f64.
//!
//! Blob order: per layer the weights row by row and the bias, then for each
//! PCA present (input first) its mean and its basis column by column.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::features::FREQUENCY_SCALES;
use super::{Learner, LearnerKind, ModelInfo, Standardizer, EXT_DIM};
use crate::error::{Error, Result};
use crate::io::{f64_from_le_bytes, f64_to_le_bytes};
use crate::nn::{Activation, DenseNet, Layer};
use crate::pca::Pca;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"TFLEARN\0";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Refuse headers larger than this when reading.
const MAX_HEADER: u64 = 64 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerHeader {
    input: usize,
    output: usize,
    activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PcaHeader {
    dim: usize,
    k: usize,
    singular_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    info: ModelInfo,
    frequency_scales: Option<Vec<f64>>,
    layers: Vec<LayerHeader>,
    input_pca: Option<PcaHeader>,
    output_pca: Option<PcaHeader>,
    ext_standardization: Option<Standardizer>,
    parameter_count: usize,
}

fn pca_header(p: &Pca) -> PcaHeader {
    PcaHeader {
        dim: p.dim(),
        k: p.k(),
        singular_values: p.singular_values().to_vec(),
    }
}

pub fn to_bytes(learner: &Learner) -> Result<Vec<u8>> {
    let mut blob = Vec::new();
    for l in &learner.net.layers {
        for i in 0..l.w.nrows() {
            blob.extend(l.w.row(i).iter());
        }
        blob.extend(l.b.iter());
    }
    for p in [&learner.input_pca, &learner.output_pca]
        .into_iter()
        .flatten()
    {
        blob.extend_from_slice(p.mean());
        blob.extend_from_slice(p.basis().as_slice());
    }
    let header = Header {
        info: learner.info.clone(),
        frequency_scales: (learner.info.kind == LearnerKind::Ffn)
            .then(|| FREQUENCY_SCALES.to_vec()),
        layers: learner
            .net
            .layers
            .iter()
            .map(|l| LayerHeader {
                input: l.input_dim(),
                output: l.output_dim(),
                activation: l.activation,
            })
            .collect(),
        input_pca: learner.input_pca.as_ref().map(pca_header),
        output_pca: learner.output_pca.as_ref().map(pca_header),
        ext_standardization: learner.ext.clone(),
        parameter_count: learner.net.param_count(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(28 + json.len() + 8 * blob.len());
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
    out.extend_from_slice(&f64_to_le_bytes(&blob));
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("checkpoint truncated in {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
}

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn from_bytes(bytes: &[u8]) -> Result<Learner> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != CHECKPOINT_MAGIC {
        return Err(fmt_err("not a learner checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(r.take(4, "version")?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(fmt_err(format!(
            "checkpoint version {version} unsupported (expected {CHECKPOINT_VERSION})"
        )));
    }
    let header_len = r.u64("header length")?;
    if header_len > MAX_HEADER {
        return Err(fmt_err("checkpoint header too large"));
    }
    let header: Header = serde_json::from_slice(r.take(header_len as usize, "header")?)?;
    let blob_len = r.u64("blob length")?;
    let blob_bytes = r.take(
        usize::try_from(blob_len)
            .ok()
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| fmt_err("blob length overflows"))?,
        "parameters",
    )?;
    if r.pos != bytes.len() {
        return Err(fmt_err("trailing bytes after checkpoint"));
    }
    let blob = f64_from_le_bytes(blob_bytes)?;
    if blob.iter().any(|v| !v.is_finite()) {
        return Err(fmt_err("non-finite parameter in checkpoint"));
    }
    build(header, &blob)
}

fn build(h: Header, blob: &[f64]) -> Result<Learner> {
    let info = h.info;
    if info.n < 2 || h.layers.is_empty() {
        return Err(fmt_err("checkpoint describes an empty model"));
    }
    let mut expected = 0usize;
    for l in &h.layers {
        expected = l
            .input
            .checked_add(1)
            .and_then(|i| i.checked_mul(l.output))
            .and_then(|p| p.checked_add(expected))
            .ok_or_else(|| fmt_err("layer sizes overflow"))?;
    }
    if expected != h.parameter_count {
        return Err(fmt_err("parameter count does not match layer sizes"));
    }
    for p in [&h.input_pca, &h.output_pca].into_iter().flatten() {
        expected = p
            .dim
            .checked_mul(p.k + 1)
            .and_then(|v| v.checked_add(expected))
            .ok_or_else(|| fmt_err("PCA sizes overflow"))?;
    }
    if blob.len() != expected {
        return Err(Error::dims(expected, blob.len(), "checkpoint parameters"));
    }

    let mut pos = 0;
    let mut next = |len: usize| {
        let s = &blob[pos..pos + len];
        pos += len;
        s
    };
    let mut layers = Vec::with_capacity(h.layers.len());
    for l in &h.layers {
        let w = DMatrix::from_row_slice(l.output, l.input, next(l.input * l.output));
        let b = DVector::from_column_slice(next(l.output));
        layers.push(Layer {
            w,
            b,
            activation: l.activation,
        });
    }
    let net = DenseNet::from_layers(layers)?;
    let mut read_pca = |p: &Option<PcaHeader>| -> Result<Option<Pca>> {
        p.as_ref()
            .map(|p| {
                let mean = next(p.dim).to_vec();
                let basis = next(p.dim * p.k).to_vec();
                Pca::from_parts(mean, basis, p.k, p.singular_values.clone())
            })
            .transpose()
    };
    let input_pca = read_pca(&h.input_pca)?;
    let output_pca = read_pca(&h.output_pca)?;

    // architecture consistency
    let n = info.n;
    match info.kind {
        LearnerKind::Ffn => {
            if h.frequency_scales.as_deref() != Some(&FREQUENCY_SCALES[..]) {
                return Err(fmt_err("unsupported Fourier frequency scales"));
            }
            if net.input_dim() != 2 * FREQUENCY_SCALES.len() * n || net.output_dim() != n {
                return Err(fmt_err("FFN dimensions do not match the series length"));
            }
            if input_pca.is_some() || output_pca.is_some() || h.ext_standardization.is_some() {
                return Err(fmt_err("FFN checkpoint carries PCA or parameter data"));
            }
        }
        LearnerKind::Pca | LearnerKind::Pcax => {
            let (Some(ip), Some(op)) = (&input_pca, &output_pca) else {
                return Err(fmt_err("Dense-PCA checkpoint lacks its PCA models"));
            };
            let ext_dim = match (&h.ext_standardization, info.kind) {
                (Some(s), LearnerKind::Pcax)
                    if s.mean.len() == EXT_DIM && s.std.len() == EXT_DIM =>
                {
                    EXT_DIM
                }
                (None, LearnerKind::Pca) => 0,
                _ => {
                    return Err(fmt_err(
                        "parameter standardization inconsistent with model kind",
                    ))
                }
            };
            if ip.dim() != n || op.dim() != n {
                return Err(fmt_err("PCA dimension does not match the series length"));
            }
            if net.input_dim() != ip.k() + ext_dim || net.output_dim() != op.k() {
                return Err(fmt_err("network dimensions do not match the PCA sizes"));
            }
        }
    }
    Ok(Learner {
        info,
        net,
        input_pca,
        output_pca,
        ext: h.ext_standardization,
    })
}

pub fn save_checkpoint(learner: &Learner, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, to_bytes(learner)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Learner> {
    from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
