//! Binary checkpoints for the three networks and run manifests.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "ASHT1" | version u32 | kind u8 | meta_len u32 | meta (JSON)
//! | n_arrays u32 | { name_len u32 | name | ndim u32 | dims u64… | values f64… }*
//! | sha256 of everything above (32 bytes)
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decoders::{Decoder, DecoderSpec, LabelKind};
use crate::error::{Error, Result};
use crate::nn::ParamLayout;
use crate::policy::{PolicyConfig, PolicyNet};

pub const MAGIC: &[u8; 5] = b"ASHT1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Policy,
    Monitor,
    Inference,
}

impl ModelKind {
    fn code(self) -> u8 {
        match self {
            ModelKind::Policy => 0,
            ModelKind::Monitor => 1,
            ModelKind::Inference => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(ModelKind::Policy),
            1 => Some(ModelKind::Monitor),
            2 => Some(ModelKind::Inference),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Policy => "policy",
            ModelKind::Monitor => "monitor",
            ModelKind::Inference => "inference",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    /// sha256 hex of the configuration that produced the model
    pub config_digest: String,
    /// architecture description needed to rebuild the model
    pub model: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub meta: CheckpointMeta,
    pub arrays: Vec<NamedArray>,
}

#[derive(Serialize, Deserialize)]
struct PolicyModel {
    encoding: crate::decoders::StepEncoding,
    config: PolicyConfig,
}

fn split_params(layout: &ParamLayout, params: &[f64]) -> Vec<NamedArray> {
    layout
        .blocks()
        .iter()
        .map(|b| NamedArray {
            name: b.name.clone(),
            shape: if b.cols == 1 { vec![b.rows] } else { vec![b.rows, b.cols] },
            values: params[b.range()].to_vec(),
        })
        .collect()
}

fn join_params(layout: &ParamLayout, arrays: &[NamedArray]) -> Result<Vec<f64>> {
    let bad = |m: String| Error::Checkpoint(m);
    if arrays.len() != layout.blocks().len() {
        return Err(bad(format!(
            "expected {} arrays, found {}",
            layout.blocks().len(),
            arrays.len()
        )));
    }
    let mut params = Vec::with_capacity(layout.len());
    for (b, a) in layout.blocks().iter().zip(arrays) {
        let shape = if b.cols == 1 { vec![b.rows] } else { vec![b.rows, b.cols] };
        if a.name != b.name || a.shape != shape {
            return Err(bad(format!(
                "array `{}` {:?} does not match expected `{}` {:?}",
                a.name, a.shape, b.name, shape
            )));
        }
        params.extend_from_slice(&a.values);
    }
    Ok(params)
}

/// sha256 hex of arbitrary bytes.
pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Checkpoint {
    pub fn from_policy(net: &PolicyNet, seed: u64, config_digest: &str) -> Self {
        let model = serde_json::to_value(PolicyModel {
            encoding: net.encoding,
            config: net.config.clone(),
        })
        .expect("policy description serializes");
        Self {
            kind: ModelKind::Policy,
            meta: CheckpointMeta {
                seed,
                config_digest: config_digest.to_string(),
                model,
            },
            arrays: split_params(net.layout(), &net.params),
        }
    }

    pub fn from_decoder(dec: &Decoder, seed: u64, config_digest: &str) -> Self {
        let kind = match dec.spec.label_kind {
            LabelKind::Class => ModelKind::Inference,
            LabelKind::Scalar => ModelKind::Monitor,
        };
        Self {
            kind,
            meta: CheckpointMeta {
                seed,
                config_digest: config_digest.to_string(),
                model: serde_json::to_value(&dec.spec).expect("decoder description serializes"),
            },
            arrays: split_params(dec.encoder.layout(), &dec.encoder.params),
        }
    }

    fn expect(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds a {} model, a {kind} model was requested",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn to_policy(&self) -> Result<PolicyNet> {
        self.expect(ModelKind::Policy)?;
        let m: PolicyModel =
            serde_json::from_value(self.meta.model.clone()).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let net = PolicyNet::zeros(m.encoding, m.config.clone())?;
        let params = join_params(net.layout(), &self.arrays)?;
        PolicyNet::from_params(m.encoding, m.config, params)
    }

    /// Rebuild a decoder of the requested kind (monitor or inference).
    pub fn to_decoder(&self, kind: ModelKind) -> Result<Decoder> {
        if kind == ModelKind::Policy {
            return Err(Error::Checkpoint("a policy is not a decoder".into()));
        }
        self.expect(kind)?;
        let spec: DecoderSpec =
            serde_json::from_value(self.meta.model.clone()).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let template = crate::nn::Encoder::zeros(spec.encoder_config())?;
        let params = join_params(template.layout(), &self.arrays)?;
        Decoder::from_params(spec, params)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.push(self.kind.code());
        let meta = serde_json::to_vec(&self.meta).expect("metadata serializes");
        b.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        b.extend_from_slice(&meta);
        b.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for a in &self.arrays {
            b.extend_from_slice(&(a.name.len() as u32).to_le_bytes());
            b.extend_from_slice(a.name.as_bytes());
            b.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
            for &d in &a.shape {
                b.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &a.values {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&b);
        b.extend_from_slice(&digest);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < MAGIC.len() + 32 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(bad("digest mismatch: file is corrupt or truncated"));
        }
        let mut r = Reader { buf: body, pos: MAGIC.len() };
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (expected {VERSION})"
            )));
        }
        let kind = ModelKind::from_code(r.u8()?).ok_or_else(|| bad("unknown model kind"))?;
        let meta_len = r.u32()? as usize;
        let meta: CheckpointMeta =
            serde_json::from_slice(r.take(meta_len)?).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let n = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| bad("array name is not UTF-8"))?;
            let ndim = r.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape.push(r.u64()? as usize);
            }
            let count = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| bad("array too large"))?;
            let raw = r.take(count.checked_mul(8).ok_or_else(|| bad("array too large"))?)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            arrays.push(NamedArray { name, shape, values });
        }
        if r.pos != body.len() {
            return Err(bad("trailing bytes after arrays"));
        }
        Ok(Self { kind, meta, arrays })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    ckpt.save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::load(path)
}

/// Record of one artifact-producing run. Holds no timestamps so reruns with
/// the same inputs reproduce it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// artifact path (relative to the run directory) → sha256 hex
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(run_id: impl Into<String>, command: impl Into<String>, config: serde_json::Value) -> Self {
        Self {
            run_id: run_id.into(),
            command: command.into(),
            config,
            seeds: BTreeMap::new(),
            artifacts: BTreeMap::new(),
        }
    }

    /// Hash a file inside `dir` and record it.
    pub fn record(&mut self, dir: &Path, relative: &str) -> Result<()> {
        let path = dir.join(relative);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.artifacts.insert(relative.to_string(), digest_hex(&bytes));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        std::fs::write(&path, s).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let s = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::Parse {
            path,
            message: e.to_string(),
        })
    }

    /// Every listed artifact exists and matches its digest.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for (rel, want) in &self.artifacts {
            let path = dir.join(rel);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let got = digest_hex(&bytes);
            if &got != want {
                return Err(Error::Checkpoint(format!("artifact {rel} digest {got} != recorded {want}")));
            }
        }
        Ok(())
    }
}
