//! `FDAT1` checkpoint files.
//!
//! Layout: the 5-byte magic `FDAT1`, a little-endian `u32` header length, a
//! JSON header, then every tensor's little-endian `f32` buffer in header
//! order. Nothing may follow the last buffer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framing;
use crate::model::{Model, ModelConfig};
use crate::tensor::{DType, Tensor};

pub const MAGIC: &[u8; 5] = b"FDAT1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: DType,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub config: ModelConfig,
    pub seed: u64,
    /// Free-form metadata such as the training step.
    #[serde(default)]
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub seed: u64,
    pub meta: serde_json::Value,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            config: self.config.clone(),
            seed: self.seed,
            meta: self.meta.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(name, t)| TensorEntry { name: name.clone(), shape: t.shape().to_vec(), dtype: DType::F32 })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let payload: usize = self.tensors.iter().map(|(_, t)| 4 * t.numel()).sum();
        let mut out = framing::write_header(MAGIC, &json, payload)?;
        for (_, t) in &self.tensors {
            framing::push_f32s(&mut out, t.data());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (json, mut at) = framing::read_header(bytes, MAGIC)?;
        let header: Header = framing::parse_header(json, MAGIC.len() + framing::PREFIX_LEN)?;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in header.tensors {
            if entry.dtype != DType::F32 {
                return Err(Error::format(
                    at as u64,
                    format!("tensor `{}` has dtype {}; only f32 is stored", entry.name, entry.dtype),
                ));
            }
            if entry.shape.contains(&0) {
                return Err(Error::format(at as u64, format!("tensor `{}` has a zero extent", entry.name)));
            }
            let numel: usize = entry.shape.iter().product();
            let data = framing::read_f32s(bytes, at, numel, &format!("tensor `{}`", entry.name))?;
            tensors.push((entry.name, Tensor::new(entry.shape, data)?));
            at += 4 * numel;
        }
        framing::expect_end(bytes, at)?;
        Ok(Checkpoint { config: header.config, seed: header.seed, meta: header.meta, tensors })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl Model<f32> {
    pub fn to_checkpoint(&self, meta: serde_json::Value) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            seed: self.store.seed(),
            meta,
            tensors: self.store.iter().map(|(_, p)| (p.name.clone(), p.value.clone())).collect(),
        }
    }

    /// Builds a model of `config` and fills it from `ckpt`. Tensors the
    /// model does not own (e.g. optimizer moments) are ignored.
    pub fn from_checkpoint_with(ckpt: &Checkpoint, config: ModelConfig) -> Result<Self> {
        let mut model = Model::build(config, ckpt.seed)?;
        let ids: Vec<_> = model.store.ids().collect();
        for id in ids {
            let name = model.store.name(id).to_string();
            let value = ckpt.tensor(&name).ok_or_else(|| Error::MissingTensor { name: name.clone() })?;
            model.store.assign(&name, value.clone())?;
        }
        Ok(model)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        Self::from_checkpoint_with(ckpt, ckpt.config.clone())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint(serde_json::Value::Null).write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lineformer::AttentionImpl;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Model<f32> {
        Model::build(ModelConfig::tiny(), 11).unwrap()
    }

    #[test]
    fn roundtrip_is_forward_identical() {
        let model = Model::<f32>::build(ModelConfig::default(), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fdat");
        model.save(&path).unwrap();
        let loaded = Model::load(&path).unwrap();
        assert_eq!(loaded.store, model.store);
        let x = Tensor::uniform(vec![1, 4, 16, 16], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(2));
        let a = model.infer(&x, AttentionImpl::Linear).unwrap();
        let b = loaded.infer(&x, AttentionImpl::Linear).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn header_lists_every_parameter() {
        let model = tiny();
        let bytes = model.to_checkpoint(serde_json::Value::Null).to_bytes().unwrap();
        let len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[9..9 + len]).unwrap();
        let names: Vec<&str> =
            header["tensors"].as_array().unwrap().iter().map(|t| t["name"].as_str().unwrap()).collect();
        let expected: Vec<&str> = model.store.iter().map(|(_, p)| p.name.as_str()).collect();
        assert_eq!(names, expected);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = tiny().to_checkpoint(serde_json::Value::Null).to_bytes().unwrap();
        let cut = bytes.len() - 3;
        match Checkpoint::from_bytes(&bytes[..cut]) {
            Err(Error::Format { offset, detail }) => {
                assert!(offset < cut as u64);
                assert!(detail.contains("truncated"), "{detail}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
        assert!(matches!(Checkpoint::from_bytes(b"FDAT2...."), Err(Error::Format { offset: 0, .. })));
        assert!(matches!(Checkpoint::from_bytes(&bytes[..7]), Err(Error::Format { offset: 5, .. })));
        assert!(matches!(Checkpoint::from_bytes(&bytes[..20]), Err(Error::Format { offset: 9, .. })));
    }

    #[test]
    fn mismatched_config_names_tensor() {
        let ckpt = tiny().to_checkpoint(serde_json::Value::Null);
        let wider = ModelConfig { base_channels: 8, ..ModelConfig::tiny() };
        match Model::from_checkpoint_with(&ckpt, wider) {
            Err(Error::ShapeMismatch { name, .. }) => assert_eq!(name, "enc.stem.weight"),
            other => panic!("expected shape mismatch, got {other:?}"),
        }
        let no_fda = ModelConfig { use_fda: false, ..ModelConfig::tiny() };
        let deeper = ModelConfig { num_scales: 3, window_heights: vec![3; 3], ..ModelConfig::tiny() };
        assert!(Model::from_checkpoint_with(&ckpt, no_fda).is_ok());
        let ckpt_no_fda = Model::<f32>::build(ModelConfig { use_fda: false, ..ModelConfig::tiny() }, 1)
            .unwrap()
            .to_checkpoint(serde_json::Value::Null);
        assert!(matches!(
            Model::from_checkpoint_with(&ckpt_no_fda, ModelConfig::tiny()),
            Err(Error::MissingTensor { .. })
        ));
        assert!(Model::from_checkpoint_with(&ckpt, deeper).is_err());
    }
}
