//! Versioned binary container of named tensors plus string metadata.
//!
//! Layout (all integers little-endian):
//! `MAGIC`, u32 version, u32 metadata count, then per entry u32-length-prefixed
//! key and value; u32 tensor count, then per tensor a u32-length-prefixed
//! name, u32 rank, u64 dims, and the values as f64. Entries are written in
//! sorted name order so identical models give identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use super::cnn::{Conv2d, Layer, Sequential};
use super::dense::{Activation, Dense, Head, Mlp};
use super::svm::LinearSvm;
use super::Tensor;
use crate::error::{Error, Result};
use crate::features::Pca;

pub const MAGIC: &[u8; 8] = b"CASAMDL\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelBundle {
    tensors: BTreeMap<String, Tensor>,
    meta: BTreeMap<String, String>,
}

fn missing(what: &str) -> Error {
    Error::format("<bundle>", format!("missing entry {what:?}"))
}

impl ModelBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn insert_vec(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<()> {
        self.insert(name, Tensor::new(shape, data)?);
        Ok(())
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors.get(name).ok_or_else(|| missing(name))
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.insert(key.into(), value.into());
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta.get(key).map(String::as_str).ok_or_else(|| missing(key))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.meta(key)?;
        raw.parse()
            .map_err(|_| Error::format("<bundle>", format!("bad value {raw:?} for {key:?}")))
    }

    pub fn has_meta(&self, key: &str) -> bool {
        self.meta.contains_key(key)
    }

    pub fn tensor_names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    /// Copies every entry of `other` under `prefix.`.
    pub fn merge_prefixed(&mut self, prefix: &str, other: &ModelBundle) {
        for (k, v) in &other.tensors {
            self.tensors.insert(format!("{prefix}.{k}"), v.clone());
        }
        for (k, v) in &other.meta {
            self.meta.insert(format!("{prefix}.{k}"), v.clone());
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let put_str = |out: &mut Vec<u8>, s: &str| {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        };
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            put_str(&mut out, name);
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::format("<bundle>", "not a model file (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Unsupported(format!("model file version {version}")));
        }
        let mut bundle = ModelBundle::new();
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let v = r.string()?;
            bundle.meta.insert(k, v);
        }
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let count = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&c| c <= r.remaining() / 8)
                .ok_or_else(|| Error::format("<bundle>", format!("tensor {name:?} runs past end of file")))?;
            let raw = r.take(count * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            bundle.tensors.insert(name, Tensor::new(shape, data)?);
        }
        if r.remaining() != 0 {
            return Err(Error::format("<bundle>", "trailing bytes after last tensor"));
        }
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format { reason, .. } => Error::format(path, reason),
            other => other,
        })
    }

    /// Human-readable dump: metadata plus each tensor's shape and values.
    pub fn to_json(&self) -> Value {
        let tensors: serde_json::Map<String, Value> = self
            .tensors
            .iter()
            .map(|(k, t)| (k.clone(), json!({ "shape": t.shape(), "data": t.data() })))
            .collect();
        json!({ "version": VERSION, "meta": self.meta, "tensors": tensors })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::format("<bundle>", "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::format("<bundle>", "name is not UTF-8"))
    }
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "relu",
        Activation::Sigmoid => "sigmoid",
        Activation::Linear => "linear",
    }
}

fn parse_activation(s: &str) -> Result<Activation> {
    match s {
        "relu" => Ok(Activation::Relu),
        "sigmoid" => Ok(Activation::Sigmoid),
        "linear" => Ok(Activation::Linear),
        other => Err(Error::format("<bundle>", format!("unknown activation {other:?}"))),
    }
}

fn store_dense(b: &mut ModelBundle, p: &str, d: &Dense) -> Result<()> {
    b.insert_vec(format!("{p}.weights"), vec![d.out_dim, d.in_dim], d.weights.clone())?;
    b.insert_vec(format!("{p}.bias"), vec![d.out_dim], d.bias.clone())
}

fn load_dense(b: &ModelBundle, p: &str) -> Result<Dense> {
    let w = b.tensor(&format!("{p}.weights"))?;
    let bias = b.tensor(&format!("{p}.bias"))?;
    match w.shape() {
        [out, inp] if bias.shape() == [*out] => Ok(Dense {
            in_dim: *inp,
            out_dim: *out,
            weights: w.data().to_vec(),
            bias: bias.data().to_vec(),
        }),
        _ => Err(Error::format("<bundle>", format!("bad dense layer shapes at {p:?}"))),
    }
}

/// Saving and restoring a model under a name prefix.
pub trait Persist: Sized {
    fn store(&self, bundle: &mut ModelBundle, prefix: &str) -> Result<()>;
    fn restore(bundle: &ModelBundle, prefix: &str) -> Result<Self>;
}

impl Persist for Mlp {
    fn store(&self, b: &mut ModelBundle, p: &str) -> Result<()> {
        b.set_meta(
            format!("{p}.head"),
            match self.head {
                Head::Logistic => "logistic",
                Head::Softmax => "softmax",
            },
        );
        let acts: Vec<&str> = self.activations.iter().map(|&a| activation_name(a)).collect();
        b.set_meta(format!("{p}.activations"), acts.join(","));
        b.set_meta(format!("{p}.layers"), self.layers.len().to_string());
        for (i, l) in self.layers.iter().enumerate() {
            store_dense(b, &format!("{p}.layer{i}"), l)?;
        }
        Ok(())
    }

    fn restore(b: &ModelBundle, p: &str) -> Result<Self> {
        let head = match b.meta(&format!("{p}.head"))? {
            "logistic" => Head::Logistic,
            "softmax" => Head::Softmax,
            other => return Err(Error::format("<bundle>", format!("unknown head {other:?}"))),
        };
        let acts_raw = b.meta(&format!("{p}.activations"))?;
        let activations = if acts_raw.is_empty() {
            Vec::new()
        } else {
            acts_raw.split(',').map(parse_activation).collect::<Result<Vec<_>>>()?
        };
        let n: usize = b.meta_parse(&format!("{p}.layers"))?;
        let layers = (0..n)
            .map(|i| load_dense(b, &format!("{p}.layer{i}")))
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_layers(layers, activations, head)
    }
}

impl Persist for Sequential {
    fn store(&self, b: &mut ModelBundle, p: &str) -> Result<()> {
        let shape: Vec<String> = self.input_shape.iter().map(usize::to_string).collect();
        b.set_meta(format!("{p}.input_shape"), shape.join(","));
        let mut kinds = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let lp = format!("{p}.l{i:02}");
            kinds.push(match layer {
                Layer::Conv2d(c) => {
                    b.insert_vec(format!("{lp}.weights"), vec![c.out_ch, c.in_ch, 3, 3], c.weights.clone())?;
                    b.insert_vec(format!("{lp}.bias"), vec![c.out_ch], c.bias.clone())?;
                    "conv3x3"
                }
                Layer::Relu => "relu",
                Layer::Sigmoid => "sigmoid",
                Layer::MaxPool2 => "maxpool2",
                Layer::Flatten => "flatten",
                Layer::Dense(d) => {
                    store_dense(b, &lp, d)?;
                    "dense"
                }
            });
        }
        b.set_meta(format!("{p}.layers"), kinds.join(","));
        Ok(())
    }

    fn restore(b: &ModelBundle, p: &str) -> Result<Self> {
        let input_shape = b
            .meta(&format!("{p}.input_shape"))?
            .split(',')
            .map(|s| s.parse::<usize>().map_err(|_| Error::format("<bundle>", "bad input shape")))
            .collect::<Result<Vec<_>>>()?;
        let kinds = b.meta(&format!("{p}.layers"))?;
        let mut layers = Vec::new();
        for (i, kind) in kinds.split(',').filter(|k| !k.is_empty()).enumerate() {
            let lp = format!("{p}.l{i:02}");
            layers.push(match kind {
                "conv3x3" => {
                    let w = b.tensor(&format!("{lp}.weights"))?;
                    let bias = b.tensor(&format!("{lp}.bias"))?;
                    let [out_ch, in_ch, 3, 3] = w.shape() else {
                        return Err(Error::format("<bundle>", format!("bad conv shape at {lp:?}")));
                    };
                    Layer::Conv2d(Conv2d {
                        in_ch: *in_ch,
                        out_ch: *out_ch,
                        weights: w.data().to_vec(),
                        bias: bias.data().to_vec(),
                    })
                }
                "relu" => Layer::Relu,
                "sigmoid" => Layer::Sigmoid,
                "maxpool2" => Layer::MaxPool2,
                "flatten" => Layer::Flatten,
                "dense" => Layer::Dense(load_dense(b, &lp)?),
                other => return Err(Error::format("<bundle>", format!("unknown layer kind {other:?}"))),
            });
        }
        Sequential::new(input_shape, layers)
    }
}

impl Persist for LinearSvm {
    fn store(&self, b: &mut ModelBundle, p: &str) -> Result<()> {
        b.insert_vec(format!("{p}.w"), vec![self.w.len()], self.w.clone())?;
        b.insert_vec(format!("{p}.b"), vec![1], vec![self.b])?;
        b.insert_vec(format!("{p}.c"), vec![1], vec![self.c])
    }

    fn restore(b: &ModelBundle, p: &str) -> Result<Self> {
        Ok(LinearSvm {
            w: b.tensor(&format!("{p}.w"))?.data().to_vec(),
            b: b.tensor(&format!("{p}.b"))?.data()[0],
            c: b.tensor(&format!("{p}.c"))?.data()[0],
        })
    }
}

impl Persist for Pca {
    fn store(&self, b: &mut ModelBundle, p: &str) -> Result<()> {
        let k = self.n_components();
        b.insert_vec(format!("{p}.mean"), vec![self.input_dim()], self.mean().to_vec())?;
        b.insert_vec(format!("{p}.components"), vec![k, self.input_dim()], self.components().to_vec())?;
        b.insert_vec(format!("{p}.eigenvalues"), vec![k], self.eigenvalues().to_vec())
    }

    fn restore(b: &ModelBundle, p: &str) -> Result<Self> {
        let ev = b.tensor(&format!("{p}.eigenvalues"))?.data().to_vec();
        Pca::from_parts(
            ev.len(),
            b.tensor(&format!("{p}.mean"))?.data().to_vec(),
            b.tensor(&format!("{p}.components"))?.data().to_vec(),
            ev,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bytes_round_trip_and_are_deterministic() {
        let mut b = ModelBundle::new();
        b.insert_vec("z", vec![2, 2], vec![1.0, -2.0, 3.5, f64::MIN_POSITIVE]).unwrap();
        b.insert_vec("a", vec![0], vec![]).unwrap();
        b.set_meta("kind", "test");
        let bytes = b.to_bytes();
        assert_eq!(ModelBundle::from_bytes(&bytes).unwrap(), b);
        assert_eq!(b.clone().to_bytes(), bytes);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut b = ModelBundle::new();
        b.insert_vec("x", vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let bytes = b.to_bytes();
        assert!(matches!(ModelBundle::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Format { .. })));
        assert!(matches!(ModelBundle::from_bytes(b"NOTAMODEL"), Err(Error::Format { .. })));
        let mut future = bytes.clone();
        future[8] = 9;
        assert!(matches!(ModelBundle::from_bytes(&future), Err(Error::Unsupported(_))));
    }

    #[test]
    fn networks_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mlp = Mlp::new(&[4, 3, 2], &[Activation::Sigmoid], Head::Softmax, &mut rng).unwrap();
        let cnn = Sequential::new(
            vec![1, 4, 4],
            vec![
                Layer::Conv2d(Conv2d::glorot(1, 2, &mut rng)),
                Layer::Relu,
                Layer::MaxPool2,
                Layer::Flatten,
                Layer::Dense(Dense::glorot(8, 3, &mut rng)),
            ],
        )
        .unwrap();
        let svm = LinearSvm {
            w: vec![0.5, -1.0],
            b: 0.25,
            c: 1.0,
        };
        let mut b = ModelBundle::new();
        mlp.store(&mut b, "mlp").unwrap();
        cnn.store(&mut b, "cnn").unwrap();
        svm.store(&mut b, "svm").unwrap();
        let b = ModelBundle::from_bytes(&b.to_bytes()).unwrap();
        assert_eq!(Mlp::restore(&b, "mlp").unwrap(), mlp);
        assert_eq!(Sequential::restore(&b, "cnn").unwrap(), cnn);
        assert_eq!(LinearSvm::restore(&b, "svm").unwrap(), svm);
        let json = b.to_json();
        assert_eq!(json["tensors"]["svm.b"]["data"][0], 0.25);
    }
}
