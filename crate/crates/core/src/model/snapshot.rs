//! Flat binary weight snapshots.
//!
//! Byte layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic  b"AVBW"
//! 4       4     u32    format version (1)
//! 8       8     u64    header length H in bytes
//! 16      H     UTF-8 JSON header {"config": ModelConfig, "tensors": [{"name", "shape"}]}
//! 16+H    ...   f64 payload, tensors concatenated in header order, row-major
//! ```
//!
//! Vectors have shape `[n]`, matrices `[rows, cols]`. Tensor order is
//! `embedding, visual_codebook, positions, padding`, then for each layer `l`
//! `layers.l.{ln1_gain, ln1_bias, wq, wk, wv, wo, ln2_gain, ln2_bias, w1, b1, w2, b2}`,
//! then `final_gain, final_bias, prior_bias`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::weights::{LayerWeights, ModelWeights};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"AVBW";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub config: ModelConfig,
    pub tensors: Vec<TensorEntry>,
}

enum Tensor<'a> {
    Vector(&'a [f64]),
    Matrix(&'a Matrix),
}

impl Tensor<'_> {
    fn shape(&self) -> Vec<usize> {
        match self {
            Tensor::Vector(v) => vec![v.len()],
            Tensor::Matrix(m) => vec![m.rows(), m.cols()],
        }
    }

    fn data(&self) -> &[f64] {
        match self {
            Tensor::Vector(v) => v,
            Tensor::Matrix(m) => m.data(),
        }
    }
}

fn tensors(w: &ModelWeights) -> Vec<(String, Tensor<'_>)> {
    let mut out = vec![
        ("embedding".to_string(), Tensor::Matrix(&w.embedding)),
        ("visual_codebook".to_string(), Tensor::Matrix(&w.visual_codebook)),
        ("positions".to_string(), Tensor::Matrix(&w.positions)),
        ("padding".to_string(), Tensor::Vector(&w.padding)),
    ];
    for (l, layer) in w.layers.iter().enumerate() {
        let fields: [(&str, Tensor<'_>); 12] = [
            ("ln1_gain", Tensor::Vector(&layer.ln1_gain)),
            ("ln1_bias", Tensor::Vector(&layer.ln1_bias)),
            ("wq", Tensor::Matrix(&layer.wq)),
            ("wk", Tensor::Matrix(&layer.wk)),
            ("wv", Tensor::Matrix(&layer.wv)),
            ("wo", Tensor::Matrix(&layer.wo)),
            ("ln2_gain", Tensor::Vector(&layer.ln2_gain)),
            ("ln2_bias", Tensor::Vector(&layer.ln2_bias)),
            ("w1", Tensor::Matrix(&layer.w1)),
            ("b1", Tensor::Vector(&layer.b1)),
            ("w2", Tensor::Matrix(&layer.w2)),
            ("b2", Tensor::Vector(&layer.b2)),
        ];
        out.extend(fields.into_iter().map(|(n, t)| (format!("layers.{l}.{n}"), t)));
    }
    out.push(("final_gain".to_string(), Tensor::Vector(&w.final_gain)));
    out.push(("final_bias".to_string(), Tensor::Vector(&w.final_bias)));
    out.push(("prior_bias".to_string(), Tensor::Vector(&w.prior_bias)));
    out
}

pub fn write_snapshot(mut out: impl Write, config: &ModelConfig, weights: &ModelWeights) -> Result<()> {
    let list = tensors(weights);
    let header = SnapshotHeader {
        config: config.clone(),
        tensors: list
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape(),
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    for (_, t) in &list {
        for x in t.data() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Snapshot(format!("truncated file: {e}")))?;
    Ok(buf)
}

struct Payload<'a, R> {
    reader: &'a mut R,
    entries: std::slice::Iter<'a, TensorEntry>,
}

impl<R: Read> Payload<'_, R> {
    fn next_values(&mut self, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
        let entry = self
            .entries
            .next()
            .ok_or_else(|| Error::Snapshot(format!("missing tensor {name}")))?;
        if entry.name != name || entry.shape != shape {
            return Err(Error::Snapshot(format!(
                "expected {name} {shape:?}, found {} {:?}",
                entry.name, entry.shape
            )));
        }
        let n: usize = shape.iter().product();
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(f64::from_le_bytes(read_exact::<8>(self.reader)?));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Snapshot(format!("non-finite value in {name}")));
        }
        Ok(values)
    }

    fn vector(&mut self, name: &str, n: usize) -> Result<Vec<f64>> {
        self.next_values(name, &[n])
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let data = self.next_values(name, &[rows, cols])?;
        Matrix::new(rows, cols, data)
    }
}

pub fn read_snapshot(mut input: impl Read) -> Result<(ModelConfig, ModelWeights)> {
    if &read_exact::<4>(&mut input)? != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_exact::<4>(&mut input)?);
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(read_exact::<8>(&mut input)?) as usize;
    let mut header = vec![0u8; header_len];
    input
        .read_exact(&mut header)
        .map_err(|e| Error::Snapshot(format!("truncated header: {e}")))?;
    let header: SnapshotHeader = serde_json::from_slice(&header)
        .map_err(|e| Error::Snapshot(format!("bad header: {e}")))?;
    let config = header.config;
    config.validate()?;

    let d = config.hidden_dim;
    let v = config.vocab_size;
    let hidden = config.construction.mlp_ratio * d;
    let mut p = Payload {
        reader: &mut input,
        entries: header.tensors.iter(),
    };
    let embedding = p.matrix("embedding", v, d)?;
    let visual_codebook = p.matrix("visual_codebook", v, d)?;
    let positions = p.matrix("positions", config.max_positions, d)?;
    let padding = p.vector("padding", d)?;
    let mut layers = Vec::with_capacity(config.n_layers);
    for l in 0..config.n_layers {
        let n = |s: &str| format!("layers.{l}.{s}");
        layers.push(LayerWeights {
            ln1_gain: p.vector(&n("ln1_gain"), d)?,
            ln1_bias: p.vector(&n("ln1_bias"), d)?,
            wq: p.matrix(&n("wq"), d, d)?,
            wk: p.matrix(&n("wk"), d, d)?,
            wv: p.matrix(&n("wv"), d, d)?,
            wo: p.matrix(&n("wo"), d, d)?,
            ln2_gain: p.vector(&n("ln2_gain"), d)?,
            ln2_bias: p.vector(&n("ln2_bias"), d)?,
            w1: p.matrix(&n("w1"), hidden, d)?,
            b1: p.vector(&n("b1"), hidden)?,
            w2: p.matrix(&n("w2"), d, hidden)?,
            b2: p.vector(&n("b2"), d)?,
        });
    }
    let final_gain = p.vector("final_gain", d)?;
    let final_bias = p.vector("final_bias", d)?;
    let prior_bias = p.vector("prior_bias", v)?;
    if p.entries.next().is_some() {
        return Err(Error::Snapshot("unexpected trailing tensor entries".into()));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Snapshot("trailing bytes after payload".into()));
    }
    Ok((
        config,
        ModelWeights {
            embedding,
            visual_codebook,
            positions,
            padding,
            layers,
            final_gain,
            final_bias,
            prior_bias,
        },
    ))
}

pub fn save(path: impl AsRef<Path>, config: &ModelConfig, weights: &ModelWeights) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_snapshot(&mut w, config, weights)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<(ModelConfig, ModelWeights)> {
    let file = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(file))
}
