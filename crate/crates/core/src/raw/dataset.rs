//! Synthetic paired samples and their on-disk form.
//!
//! Sample `i` of a set depends only on `(seed, i)`: its RNG is the ChaCha
//! stream `i` of `seed`, from which the scene seed, the noise seed and the
//! amplification ratio are drawn.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raw::bayer::{amplify, bayer_pack};
use crate::raw::io::RawFile;
use crate::raw::isp::simple_isp;
use crate::raw::noise::{add_low_light_noise, NoiseModel};
use crate::raw::scene::synth_scene;
use crate::tensor::Tensor;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    /// Amplified noisy packed raw, `[4, H/2, W/2]`.
    pub x: Tensor<f32>,
    /// Clean packed raw, `[4, H/2, W/2]`.
    pub y_raw: Tensor<f32>,
    /// `simple_isp(y_raw)`, `[3, H, W]`.
    pub y_rgb: Tensor<f32>,
    pub ratio: f32,
}

impl SamplePair {
    pub fn packed_dims(&self) -> (usize, usize) {
        (self.x.shape()[1], self.x.shape()[2])
    }

    /// Crops a `size × size` packed window at `(top, left)` together with the
    /// matching `2·size` window of the sRGB target.
    pub fn crop(&self, top: usize, left: usize, size: usize) -> Result<SamplePair> {
        let (h, w) = self.packed_dims();
        if size == 0 || top + size > h || left + size > w {
            return Err(Error::dim(
                "crop",
                format!("window {size}x{size} at ({top}, {left}) exceeds packed extent {h}x{w}"),
            ));
        }
        Ok(SamplePair {
            x: crop_planes(&self.x, top, left, size),
            y_raw: crop_planes(&self.y_raw, top, left, size),
            y_rgb: crop_planes(&self.y_rgb, 2 * top, 2 * left, 2 * size),
            ratio: self.ratio,
        })
    }
}

fn crop_planes(t: &Tensor<f32>, top: usize, left: usize, size: usize) -> Tensor<f32> {
    let (c, h, w) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let mut out = Vec::with_capacity(c * size * size);
    for ci in 0..c {
        for y in top..top + size {
            let row = (ci * h + y) * w;
            out.extend_from_slice(&t.data()[row + left..row + left + size]);
        }
    }
    Tensor::new(vec![c, size, size], out).expect("crop shape is consistent")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub count: usize,
    /// Mosaic height; the packed tensors are half of this.
    pub height: usize,
    pub width: usize,
    pub ratios: Vec<f32>,
    pub photon_scale: f64,
    pub read_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let noise = NoiseModel::default();
        SynthConfig {
            seed: 0,
            count: 32,
            height: 128,
            width: 128,
            ratios: vec![50.0, 100.0, 250.0],
            photon_scale: noise.k,
            read_noise: noise.sigma_r,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || !self.height.is_multiple_of(2) || !self.width.is_multiple_of(2) {
            return Err(Error::config(format!("sample size {}x{} must be even and positive", self.height, self.width)));
        }
        if self.ratios.is_empty() || self.ratios.iter().any(|&r| !(r >= 1.0)) {
            return Err(Error::config(format!("ratios must be non-empty and >= 1, got {:?}", self.ratios)));
        }
        NoiseModel { k: self.photon_scale, sigma_r: self.read_noise, seed: 0 }.validate()
    }

    pub fn sample(&self, index: usize) -> Result<SamplePair> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let scene_seed: u64 = rng.random();
        let noise_seed: u64 = rng.random();
        let ratio = self.ratios[rng.random_range(0..self.ratios.len())];

        let clean = synth_scene(scene_seed, self.height, self.width)?;
        let nm = NoiseModel { k: self.photon_scale, sigma_r: self.read_noise, seed: noise_seed };
        let noisy = add_low_light_noise(&clean, &nm, 1.0 / ratio)?;
        let y_raw = bayer_pack(&clean);
        Ok(SamplePair { x: amplify(&bayer_pack(&noisy), ratio)?, y_rgb: simple_isp(&y_raw)?, y_raw, ratio })
    }

    pub fn generate(&self) -> Result<Vec<SamplePair>> {
        (0..self.count).map(|i| self.sample(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub x: String,
    pub y_raw: String,
    pub y_rgb: String,
    pub ratio: f32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub synth: SynthConfig,
    pub samples: Vec<ManifestEntry>,
}

/// Writes every sample of `cfg` to `dir` plus `manifest.json`.
pub fn write_dataset(dir: impl AsRef<Path>, cfg: &SynthConfig) -> Result<Manifest> {
    cfg.validate()?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut samples = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let s = cfg.sample(i)?;
        let entry = ManifestEntry {
            x: format!("{i:05}_x.fraw"),
            y_raw: format!("{i:05}_y_raw.fraw"),
            y_rgb: format!("{i:05}_y_rgb.fraw"),
            ratio: s.ratio,
        };
        RawFile::packed(s.x, Some(s.ratio)).write(dir.join(&entry.x))?;
        RawFile::packed(s.y_raw, None).write(dir.join(&entry.y_raw))?;
        RawFile::rgb(s.y_rgb).write(dir.join(&entry.y_rgb))?;
        samples.push(entry);
    }
    let manifest = Manifest { synth: cfg.clone(), samples };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    std::fs::write(dir.join(MANIFEST), json)?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let bytes = std::fs::read(dir.as_ref().join(MANIFEST))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(0, format!("invalid manifest: {e}")))
}

fn expect_shape(path: &Path, t: &Tensor<f32>, expected: &[usize]) -> Result<()> {
    if t.shape() != expected {
        return Err(Error::ShapeMismatch {
            name: path.display().to_string(),
            expected: expected.to_vec(),
            found: t.shape().to_vec(),
        });
    }
    Ok(())
}

/// Loads every sample listed in `dir/manifest.json`.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<SamplePair>> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut out = Vec::with_capacity(manifest.samples.len());
    for entry in &manifest.samples {
        let path = |name: &str| -> PathBuf { dir.join(name) };
        let x = RawFile::read(path(&entry.x))?;
        let y_raw = RawFile::read(path(&entry.y_raw))?;
        let y_rgb = RawFile::read(path(&entry.y_rgb))?;
        let &[4, h, w] = x.tensor.shape() else {
            return Err(Error::ShapeMismatch {
                name: entry.x.clone(),
                expected: vec![4, 0, 0],
                found: x.tensor.shape().to_vec(),
            });
        };
        expect_shape(&path(&entry.y_raw), &y_raw.tensor, &[4, h, w])?;
        expect_shape(&path(&entry.y_rgb), &y_rgb.tensor, &[3, 2 * h, 2 * w])?;
        out.push(SamplePair { x: x.tensor, y_raw: y_raw.tensor, y_rgb: y_rgb.tensor, ratio: entry.ratio });
    }
    Ok(out)
}
