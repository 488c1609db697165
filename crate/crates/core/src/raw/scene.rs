//! Procedural clean scenes.
//!
//! A latent linear RGB image is drawn at tile resolution (one value per 2×2
//! Bayer tile) from smooth gradients, random rectangles and hard half-plane
//! edges, then mosaiced with the inverse white-balance gains so that the ISP
//! maps it back to neutral colours.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::raw::bayer::{plane_of, BayerFrame};
use crate::raw::isp::WB_GAINS;
use crate::tensor::Tensor;

const RECTANGLES: usize = 6;
const EDGES: usize = 2;

/// Latent linear RGB at tile resolution, `[3, th, tw]`, values in `[0, 1]`.
pub fn synth_latent(seed: u64, th: usize, tw: usize) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = vec![0.0f32; 3 * th * tw];
    let plane = th * tw;

    for c in 0..3 {
        let base: f32 = rng.random_range(0.1..0.5);
        let gx: f32 = rng.random_range(-0.3..0.3);
        let gy: f32 = rng.random_range(-0.3..0.3);
        for y in 0..th {
            for x in 0..tw {
                let u = x as f32 / tw as f32;
                let v = y as f32 / th as f32;
                img[c * plane + y * tw + x] = base + gx * u + gy * v;
            }
        }
    }

    for _ in 0..RECTANGLES {
        let y0 = rng.random_range(0..th);
        let x0 = rng.random_range(0..tw);
        let y1 = rng.random_range(y0..th) + 1;
        let x1 = rng.random_range(x0..tw) + 1;
        let colour: [f32; 3] = [rng.random(), rng.random(), rng.random()];
        for (c, &value) in colour.iter().enumerate() {
            for y in y0..y1 {
                img[c * plane + y * tw + x0..c * plane + y * tw + x1].fill(value);
            }
        }
    }

    for _ in 0..EDGES {
        let angle: f32 = rng.random_range(0.0..std::f32::consts::TAU);
        let offset: f32 = rng.random_range(-0.3..0.3);
        let gain: f32 = rng.random_range(0.5..1.5);
        let (s, co) = angle.sin_cos();
        for y in 0..th {
            for x in 0..tw {
                let u = x as f32 / tw as f32 - 0.5;
                let v = y as f32 / th as f32 - 0.5;
                if u * co + v * s > offset {
                    for c in 0..3 {
                        img[c * plane + y * tw + x] *= gain;
                    }
                }
            }
        }
    }

    img.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Tensor::new(vec![3, th, tw], img).expect("latent shape is consistent")
}

/// Mosaics a tile-resolution latent into an RGGB frame, dividing each
/// colour by its white-balance gain.
pub fn mosaic_latent(latent: &Tensor<f32>) -> Result<BayerFrame> {
    let &[3, th, tw] = latent.shape() else {
        return Err(crate::error::Error::dim(
            "mosaic_latent",
            format!("expected [3, H/2, W/2], got {:?}", latent.shape()),
        ));
    };
    let (h, w) = (2 * th, 2 * tw);
    let plane = th * tw;
    let colour_of_plane = [0, 1, 1, 2];
    let mut data = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let c = colour_of_plane[plane_of(y, x)];
            data[y * w + x] = latent.data()[c * plane + (y / 2) * tw + x / 2] / WB_GAINS[c];
        }
    }
    BayerFrame::new(h, w, data)
}

/// Clean RGGB frame of `height × width` for `seed`.
pub fn synth_scene(seed: u64, height: usize, width: usize) -> Result<BayerFrame> {
    if !height.is_multiple_of(2) || !width.is_multiple_of(2) || height == 0 || width == 0 {
        return Err(crate::error::Error::dim(
            "synth_scene",
            format!("axes H={height} and W={width} must be even and positive"),
        ));
    }
    mosaic_latent(&synth_latent(seed, height / 2, width / 2))
}
