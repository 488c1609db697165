//! Pixel shuffle / unshuffle and channel concatenation.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// `[N, C·r², H, W] → [N, C, H·r, W·r]`; channel `c·r² + i·r + j` lands at
/// sub-pixel offset `(i, j)`.
pub fn pixel_shuffle<T: Element>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4("pixel_shuffle")?;
    if r == 0 || c % (r * r) != 0 {
        return Err(Error::dim("pixel_shuffle", format!("axis C={c} is not divisible by r²={}", r * r)));
    }
    let co = c / (r * r);
    let mut out = vec![T::zero(); x.numel()];
    let xd = x.data();
    for ni in 0..n {
        for oc in 0..co {
            for i in 0..r {
                for j in 0..r {
                    let ic = oc * r * r + i * r + j;
                    for y in 0..h {
                        for xx in 0..w {
                            let src = ((ni * c + ic) * h + y) * w + xx;
                            let dst = ((ni * co + oc) * h * r + y * r + i) * w * r + xx * r + j;
                            out[dst] = xd[src];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, co, h * r, w * r], out)
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle<T: Element>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4("pixel_unshuffle")?;
    if r == 0 || h % r != 0 || w % r != 0 {
        return Err(Error::dim("pixel_unshuffle", format!("axes H={h}, W={w} must be divisible by r={r}")));
    }
    let (ho, wo) = (h / r, w / r);
    let cout = c * r * r;
    let mut out = vec![T::zero(); x.numel()];
    let xd = x.data();
    for ni in 0..n {
        for ic in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let oc = ic * r * r + i * r + j;
                    for y in 0..ho {
                        for xx in 0..wo {
                            let src = ((ni * c + ic) * h + y * r + i) * w + xx * r + j;
                            let dst = ((ni * cout + oc) * ho + y) * wo + xx;
                            out[dst] = xd[src];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, cout, ho, wo], out)
}

/// Concatenates NCHW tensors along the channel axis.
pub fn concat_channels<T: Element>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts.first().ok_or_else(|| Error::Usage("concat of zero tensors".into()))?;
    let [n, _, h, w] = first.dims4("concat_channels")?;
    let mut ctot = 0;
    for (i, p) in parts.iter().enumerate() {
        let [pn, pc, ph, pw] = p.dims4("concat_channels")?;
        if (pn, ph, pw) != (n, h, w) {
            return Err(Error::dim(
                "concat_channels",
                format!("part {i} has N,H,W = {pn},{ph},{pw}; expected {n},{h},{w}"),
            ));
        }
        ctot += pc;
    }
    let mut out = Vec::with_capacity(n * ctot * h * w);
    for ni in 0..n {
        for p in parts {
            let pc = p.shape()[1];
            out.extend_from_slice(&p.data()[ni * pc * h * w..(ni + 1) * pc * h * w]);
        }
    }
    Tensor::new(vec![n, ctot, h, w], out)
}
