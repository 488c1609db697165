//! Fixed reference ISP used to render the clean sRGB targets.
//!
//! Packed RGGB → white balance → bilinear demosaic → colour matrix →
//! clamp to `[0, 1]` → gamma `1/2.2`. Borders are mirrored without repeating
//! the edge sample (index −1 reads index 1), which keeps the Bayer phase.

use crate::error::{Error, Result};
use crate::raw::bayer::plane_of;
use crate::tensor::Tensor;

/// Gains for R, G and B.
pub const WB_GAINS: [f32; 3] = [2.0, 1.0, 1.5];

/// Camera RGB to output RGB. Each row sums to one so neutral stays neutral.
pub const CCM: [[f64; 3]; 3] = [[1.6, -0.4, -0.2], [-0.3, 1.5, -0.2], [0.0, -0.5, 1.5]];

pub const GAMMA: f64 = 2.2;

const KERNEL: [[f64; 3]; 3] = [[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]];

fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let j = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    j.clamp(0, n - 1) as usize
}

/// Colour index (0 R, 1 G, 2 B) sampled at mosaic site `(y, x)`.
fn colour_at(y: usize, x: usize) -> usize {
    [0, 1, 1, 2][plane_of(y, x)]
}

/// `[4, h, w]` packed raw to `[3, 2h, 2w]` sRGB.
pub fn simple_isp(packed: &Tensor<f32>) -> Result<Tensor<f32>> {
    let &[4, ph, pw] = packed.shape() else {
        return Err(Error::dim("simple_isp", format!("expected [4, H/2, W/2], got {:?}", packed.shape())));
    };
    let (h, w) = (2 * ph, 2 * pw);
    let src = packed.data();

    let mut mosaic = vec![0.0f64; h * w];
    for y in 0..h {
        for x in 0..w {
            let v = src[(plane_of(y, x) * ph + y / 2) * pw + x / 2] as f64;
            mosaic[y * w + x] = v * WB_GAINS[colour_at(y, x)] as f64;
        }
    }

    let mut out = vec![0.0f32; 3 * h * w];
    for y in 0..h {
        for x in 0..w {
            let mut num = [0.0f64; 3];
            let mut den = [0.0f64; 3];
            for (dy, krow) in KERNEL.iter().enumerate() {
                let yy = mirror(y as isize + dy as isize - 1, h);
                for (dx, &k) in krow.iter().enumerate() {
                    let xx = mirror(x as isize + dx as isize - 1, w);
                    let c = colour_at(yy, xx);
                    num[c] += k * mosaic[yy * w + xx];
                    den[c] += k;
                }
            }
            let cam = [num[0] / den[0], num[1] / den[1], num[2] / den[2]];
            for (c, row) in CCM.iter().enumerate() {
                let lin = row[0] * cam[0] + row[1] * cam[1] + row[2] * cam[2];
                out[(c * h + y) * w + x] = lin.clamp(0.0, 1.0).powf(1.0 / GAMMA) as f32;
            }
        }
    }
    Tensor::new(vec![3, h, w], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(r: f32, g: f32, b: f32) -> Tensor<f32> {
        let mut data = vec![r; 4];
        data.extend([g; 8]);
        data.extend([b; 4]);
        Tensor::new(vec![4, 2, 2], data).unwrap()
    }

    #[test]
    fn white_balanced_gray_stays_neutral() {
        let out = simple_isp(&flat(0.25 / 2.0, 0.25, 0.25 / 1.5)).unwrap();
        let expected = 0.25f64.powf(1.0 / GAMMA) as f32;
        assert!(out.data().iter().all(|&v| (v - expected).abs() < 1e-6));
    }

    #[test]
    fn brighter_flat_raw_is_brighter() {
        let dim = simple_isp(&flat(0.1, 0.2, 0.1)).unwrap();
        let bright = simple_isp(&flat(0.15, 0.3, 0.15)).unwrap();
        assert!(dim.data().iter().zip(bright.data()).all(|(a, b)| b > a));
    }

    #[test]
    fn ccm_rows_sum_to_one() {
        for row in CCM {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mirror_keeps_parity() {
        assert_eq!(mirror(-1, 4), 1);
        assert_eq!(mirror(4, 4), 2);
        assert_eq!(mirror(2, 4), 2);
    }
}
