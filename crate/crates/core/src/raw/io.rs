//! `FRAW1` tensor files and PPM previews.
//!
//! `FRAW1` layout: magic, `u32` LE header length, JSON header
//! `{shape, dtype, pattern, ratio}`, little-endian `f32` payload.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framing;
use crate::raw::bayer::CfaPattern;
use crate::tensor::{DType, Tensor};

pub const RAW_MAGIC: &[u8; 5] = b"FRAW1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RawHeader {
    shape: Vec<usize>,
    dtype: DType,
    /// Present for packed raw, absent for rendered RGB.
    pattern: Option<CfaPattern>,
    ratio: Option<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawFile {
    pub tensor: Tensor<f32>,
    pub pattern: Option<CfaPattern>,
    pub ratio: Option<f32>,
}

impl RawFile {
    pub fn packed(tensor: Tensor<f32>, ratio: Option<f32>) -> Self {
        RawFile { tensor, pattern: Some(CfaPattern::Rggb), ratio }
    }

    pub fn rgb(tensor: Tensor<f32>) -> Self {
        RawFile { tensor, pattern: None, ratio: None }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = RawHeader {
            shape: self.tensor.shape().to_vec(),
            dtype: DType::F32,
            pattern: self.pattern,
            ratio: self.ratio,
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = framing::write_header(RAW_MAGIC, &json, 4 * self.tensor.numel())?;
        framing::push_f32s(&mut out, self.tensor.data());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (json, at) = framing::read_header(bytes, RAW_MAGIC)?;
        let header: RawHeader = framing::parse_header(json, RAW_MAGIC.len() + framing::PREFIX_LEN)?;
        if header.dtype != DType::F32 {
            return Err(Error::format(at as u64, format!("unsupported dtype {}", header.dtype)));
        }
        if header.shape.is_empty() || header.shape.contains(&0) {
            return Err(Error::format(at as u64, format!("invalid shape {:?}", header.shape)));
        }
        let numel = header.shape.iter().product();
        let data = framing::read_f32s(bytes, at, numel, "payload")?;
        framing::expect_end(bytes, at + 4 * numel)?;
        Ok(RawFile { tensor: Tensor::new(header.shape, data)?, pattern: header.pattern, ratio: header.ratio })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Binary P6 with maxval 255 from a `[3, H, W]` image in `[0, 1]`.
pub fn encode_ppm(rgb: &Tensor<f32>) -> Result<Vec<u8>> {
    let &[3, h, w] = rgb.shape() else {
        return Err(Error::dim("encode_ppm", format!("expected [3, H, W], got {:?}", rgb.shape())));
    };
    let mut out = Vec::with_capacity(20 + 3 * h * w);
    write!(out, "P6\n{w} {h}\n255\n")?;
    let d = rgb.data();
    for i in 0..h * w {
        for c in 0..3 {
            let v = d[c * h * w + i];
            let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            out.push((v * 255.0).round() as u8);
        }
    }
    Ok(out)
}

pub fn write_ppm(path: impl AsRef<Path>, rgb: &Tensor<f32>) -> Result<()> {
    std::fs::write(path, encode_ppm(rgb)?)?;
    Ok(())
}
