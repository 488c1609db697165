//! Grouped 2-D convolution over NCHW tensors.
//!
//! `groups == Cin` gives a depth-wise convolution, a 1×1 kernel gives a
//! point-wise one. Both the forward and the backward pass are direct loops;
//! the innermost loop walks contiguous output columns.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Conv2dSpec {
    pub const fn new(stride: usize, padding: usize, groups: usize) -> Self {
        Conv2dSpec { stride, padding, groups }
    }

    /// Stride 1 with "same" padding for an odd kernel.
    pub const fn same(kernel: usize, groups: usize) -> Self {
        Conv2dSpec::new(1, kernel / 2, groups)
    }
}

/// Resolved extents of one convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub spec: Conv2dSpec,
}

impl ConvGeometry {
    pub fn resolve(x: &[usize], w: &[usize], bias: Option<&[usize]>, spec: Conv2dSpec) -> Result<Self> {
        const OP: &str = "conv2d";
        let &[n, cin, h, wd] = x else {
            return Err(Error::dim(OP, format!("input must be NCHW, got {x:?}")));
        };
        let &[cout, cin_pg, kh, kw] = w else {
            return Err(Error::dim(OP, format!("weight must be [Cout,Cin/groups,kh,kw], got {w:?}")));
        };
        if spec.stride == 0 {
            return Err(Error::config("conv2d stride must be positive"));
        }
        if spec.groups == 0 || cin % spec.groups != 0 {
            return Err(Error::config(format!("conv2d groups={} does not divide input channels {cin}", spec.groups)));
        }
        if cout % spec.groups != 0 {
            return Err(Error::config(format!("conv2d groups={} does not divide output channels {cout}", spec.groups)));
        }
        if cin_pg * spec.groups != cin {
            return Err(Error::dim(
                OP,
                format!(
                    "axis C of input is {cin} but weight axis 1 is {cin_pg} with groups={} (expects {})",
                    spec.groups,
                    cin / spec.groups
                ),
            ));
        }
        if let Some(b) = bias {
            if b != [cout] {
                return Err(Error::dim(OP, format!("bias shape {b:?} does not match weight axis 0 (Cout={cout})")));
            }
        }
        let ph = h + 2 * spec.padding;
        let pw = wd + 2 * spec.padding;
        if kh > ph || kw > pw {
            return Err(Error::dim(OP, format!("kernel {kh}x{kw} exceeds padded input {ph}x{pw} on axes H/W")));
        }
        Ok(ConvGeometry {
            n,
            cin,
            h,
            w: wd,
            cout,
            kh,
            kw,
            out_h: (ph - kh) / spec.stride + 1,
            out_w: (pw - kw) / spec.stride + 1,
            spec,
        })
    }

    pub fn out_shape(&self) -> [usize; 4] {
        [self.n, self.cout, self.out_h, self.out_w]
    }

    /// Multiply-accumulates: N·Cout·H'·W'·(Cin/groups)·kh·kw.
    pub fn macs(&self) -> u64 {
        (self.n * self.cout * self.out_h * self.out_w * (self.cin / self.spec.groups) * self.kh * self.kw) as u64
    }

    fn cin_per_group(&self) -> usize {
        self.cin / self.spec.groups
    }

    fn cout_per_group(&self) -> usize {
        self.cout / self.spec.groups
    }
}

/// Output positions `o` in `0..out_len` whose input tap `o*stride + k - pad`
/// falls inside `0..in_len`.
#[inline]
fn valid_range(k: usize, pad: usize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    let hi = if in_len + pad > k { ((in_len - 1 + pad - k) / stride + 1).min(out_len) } else { 0 };
    (lo, hi.max(lo))
}

pub fn conv2d<T: Element>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    spec: Conv2dSpec,
) -> Result<Tensor<T>> {
    let g = ConvGeometry::resolve(x.shape(), w.shape(), bias.map(|b| b.shape()), spec)?;
    let out = conv2d_forward(&g, x.data(), w.data(), bias.map(|b| b.data()));
    Tensor::new(g.out_shape().to_vec(), out)
}

pub(crate) fn conv2d_forward<T: Element>(g: &ConvGeometry, x: &[T], w: &[T], bias: Option<&[T]>) -> Vec<T> {
    let (s, pad) = (g.spec.stride, g.spec.padding);
    let plane_in = g.h * g.w;
    let plane_out = g.out_h * g.out_w;
    let cin_pg = g.cin_per_group();
    let cout_pg = g.cout_per_group();
    let mut out = vec![T::zero(); g.n * g.cout * plane_out];

    for n in 0..g.n {
        for co in 0..g.cout {
            let grp = co / cout_pg;
            let o_base = (n * g.cout + co) * plane_out;
            let o_plane = &mut out[o_base..o_base + plane_out];
            if let Some(b) = bias {
                o_plane.iter_mut().for_each(|v| *v = b[co]);
            }
            for cl in 0..cin_pg {
                let ci = grp * cin_pg + cl;
                let i_plane = &x[(n * g.cin + ci) * plane_in..][..plane_in];
                for ky in 0..g.kh {
                    let (oy_lo, oy_hi) = valid_range(ky, pad, s, g.h, g.out_h);
                    for kx in 0..g.kw {
                        let wv = w[((co * cin_pg + cl) * g.kh + ky) * g.kw + kx];
                        let (ox_lo, ox_hi) = valid_range(kx, pad, s, g.w, g.out_w);
                        for oy in oy_lo..oy_hi {
                            let iy = oy * s + ky - pad;
                            let i_row = &i_plane[iy * g.w..][..g.w];
                            let o_row = &mut o_plane[oy * g.out_w..][..g.out_w];
                            if s == 1 {
                                let off = kx as isize - pad as isize;
                                for ox in ox_lo..ox_hi {
                                    o_row[ox] = o_row[ox] + wv * i_row[(ox as isize + off) as usize];
                                }
                            } else {
                                for ox in ox_lo..ox_hi {
                                    o_row[ox] = o_row[ox] + wv * i_row[ox * s + kx - pad];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) struct ConvGrads<T> {
    pub x: Vec<T>,
    pub w: Vec<T>,
    pub bias: Option<Vec<T>>,
}

pub(crate) fn conv2d_backward<T: Element>(
    g: &ConvGeometry,
    x: &[T],
    w: &[T],
    has_bias: bool,
    gy: &[T],
) -> ConvGrads<T> {
    let (s, pad) = (g.spec.stride, g.spec.padding);
    let plane_in = g.h * g.w;
    let plane_out = g.out_h * g.out_w;
    let cin_pg = g.cin_per_group();
    let cout_pg = g.cout_per_group();
    let mut gx = vec![T::zero(); x.len()];
    let mut gw = vec![T::zero(); w.len()];
    let mut gb = has_bias.then(|| vec![T::zero(); g.cout]);

    for n in 0..g.n {
        for co in 0..g.cout {
            let grp = co / cout_pg;
            let go_plane = &gy[(n * g.cout + co) * plane_out..][..plane_out];
            if let Some(gb) = gb.as_mut() {
                gb[co] = gb[co] + go_plane.iter().copied().sum::<T>();
            }
            for cl in 0..cin_pg {
                let ci = grp * cin_pg + cl;
                let i_base = (n * g.cin + ci) * plane_in;
                for ky in 0..g.kh {
                    let (oy_lo, oy_hi) = valid_range(ky, pad, s, g.h, g.out_h);
                    for kx in 0..g.kw {
                        let widx = ((co * cin_pg + cl) * g.kh + ky) * g.kw + kx;
                        let wv = w[widx];
                        let (ox_lo, ox_hi) = valid_range(kx, pad, s, g.w, g.out_w);
                        let mut acc = T::zero();
                        for oy in oy_lo..oy_hi {
                            let iy = oy * s + ky - pad;
                            let go_row = &go_plane[oy * g.out_w..][..g.out_w];
                            let row_off = i_base + iy * g.w;
                            for ox in ox_lo..ox_hi {
                                let ix = ox * s + kx - pad;
                                let gv = go_row[ox];
                                acc = acc + x[row_off + ix] * gv;
                                gx[row_off + ix] = gx[row_off + ix] + wv * gv;
                            }
                        }
                        gw[widx] = gw[widx] + acc;
                    }
                }
            }
        }
    }
    ConvGrads { x: gx, w: gw, bias: gb }
}
