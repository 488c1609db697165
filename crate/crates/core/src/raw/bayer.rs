//! RGGB mosaics and their packed four-plane form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Colour filter layout. Only RGGB is supported; anything else fails to
/// deserialize.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CfaPattern {
    #[default]
    Rggb,
}

/// A single-channel mosaic normalized to `[0, 1]` by its black and white
/// levels.
#[derive(Clone, Debug, PartialEq)]
pub struct BayerFrame {
    height: usize,
    width: usize,
    data: Vec<f32>,
    pub pattern: CfaPattern,
    pub black_level: f32,
    pub white_level: f32,
}

impl BayerFrame {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || !height.is_multiple_of(2) || !width.is_multiple_of(2) {
            return Err(Error::dim("bayer frame", format!("axes H={height} and W={width} must be even and positive")));
        }
        if data.len() != height * width {
            return Err(Error::dim("bayer frame", format!("buffer has {} values for {height}x{width}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::dim("bayer frame", format!("non-finite value at index {i}")));
        }
        Ok(BayerFrame { height, width, data, pattern: CfaPattern::Rggb, black_level: 0.0, white_level: 1.0 })
    }

    /// Normalizes sensor counts by `(v − black) / (white − black)`.
    pub fn from_sensor(
        height: usize,
        width: usize,
        counts: &[u16],
        black_level: f32,
        white_level: f32,
    ) -> Result<Self> {
        if white_level <= black_level {
            return Err(Error::config(format!("white level {white_level} must exceed black level {black_level}")));
        }
        let scale = white_level - black_level;
        let data = counts.iter().map(|&c| (c as f32 - black_level) / scale).collect();
        let mut frame = BayerFrame::new(height, width, data)?;
        frame.black_level = black_level;
        frame.white_level = white_level;
        Ok(frame)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn at(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

/// Plane index of mosaic site `(y, x)` in `[R, G1, G2, B]` order.
pub fn plane_of(y: usize, x: usize) -> usize {
    2 * (y % 2) + (x % 2)
}

/// `[H, W]` mosaic to `[4, H/2, W/2]` planes ordered R, G1, G2, B.
pub fn bayer_pack(frame: &BayerFrame) -> Tensor<f32> {
    let (h, w) = (frame.height / 2, frame.width / 2);
    let mut out = vec![0.0; 4 * h * w];
    for y in 0..frame.height {
        for x in 0..frame.width {
            out[(plane_of(y, x) * h + y / 2) * w + x / 2] = frame.at(y, x);
        }
    }
    Tensor::new(vec![4, h, w], out).expect("packed shape is consistent")
}

pub fn bayer_unpack(packed: &Tensor<f32>) -> Result<BayerFrame> {
    let &[4, h, w] = packed.shape() else {
        return Err(Error::dim("bayer_unpack", format!("expected [4, H/2, W/2], got {:?}", packed.shape())));
    };
    let (height, width) = (2 * h, 2 * w);
    let src = packed.data();
    let mut data = vec![0.0; height * width];
    for y in 0..height {
        for x in 0..width {
            data[y * width + x] = src[(plane_of(y, x) * h + y / 2) * w + x / 2];
        }
    }
    BayerFrame::new(height, width, data)
}

/// `clamp(x · ratio, 0, 1)`.
pub fn amplify(x: &Tensor<f32>, ratio: f32) -> Result<Tensor<f32>> {
    if !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(Error::config(format!("amplification ratio must be finite and >= 1, got {ratio}")));
    }
    Ok(x.map(|v| (v * ratio).clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_tile() {
        let f = BayerFrame::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(bayer_pack(&f).data(), &[0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn checkerboard_greens_are_constant() {
        // Greens sit where y + x is odd.
        let f = BayerFrame::new(4, 6, (0..24).map(|i| ((i / 6 + i % 6) % 2) as f32).collect()).unwrap();
        let p = bayer_pack(&f);
        let plane = |c: usize| &p.data()[c * 6..(c + 1) * 6];
        assert!(plane(1).iter().all(|&v| v == 1.0));
        assert!(plane(2).iter().all(|&v| v == 1.0));
        assert!(plane(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn odd_extents_rejected() {
        assert!(matches!(BayerFrame::new(3, 4, vec![0.0; 12]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn amplify_laws() {
        let x = Tensor::new(vec![3], vec![0.0, 0.5, 0.02]).unwrap();
        assert_eq!(amplify(&x, 1.0).unwrap(), x);
        assert_eq!(amplify(&x, 100.0).unwrap().data()[2], 1.0);
        assert!(matches!(amplify(&x, 0.5), Err(Error::Config(_))));
    }

    #[test]
    fn sensor_normalization() {
        let f = BayerFrame::from_sensor(2, 2, &[512, 16384, 512, 8448], 512.0, 16384.0).unwrap();
        assert_eq!(f.data()[0], 0.0);
        assert_eq!(f.data()[1], 1.0);
        assert!((f.data()[3] - 0.5).abs() < 1e-6);
    }
}
