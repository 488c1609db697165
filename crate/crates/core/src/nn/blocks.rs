//! Building blocks shared by the encoder and both decoders.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::params::{Bound, ParamId, ParamStore};
use crate::ops::conv::Conv2dSpec;
use crate::ops::norm::norm_macs;
use crate::tensor::Element;

pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const GROUP_NORM_EPS: f64 = 1e-5;
const L2_EPS: f64 = 1e-12;

/// A convolution with its weight, optional bias and geometry.
#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub spec: Conv2dSpec,
}

impl ConvLayer {
    pub fn new<T: Element>(
        store: &mut ParamStore<T>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        spec: Conv2dSpec,
    ) -> Self {
        let weight = store.kaiming_uniform(format!("{name}.weight"), [cout, cin / spec.groups, kernel, kernel]);
        let bias = Some(store.filled(format!("{name}.bias"), &[cout], 0.0));
        ConvLayer { weight, bias, cin, cout, kernel, spec }
    }

    pub fn pointwise<T: Element>(store: &mut ParamStore<T>, name: &str, cin: usize, cout: usize) -> Self {
        Self::new(store, name, cin, cout, 1, Conv2dSpec::new(1, 0, 1))
    }

    pub fn depthwise<T: Element>(store: &mut ParamStore<T>, name: &str, channels: usize, kernel: usize) -> Self {
        Self::new(store, name, channels, channels, kernel, Conv2dSpec::same(kernel, channels))
    }

    pub fn forward<T: Element>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        tape.conv2d(x, p[self.weight], self.bias.map(|b| p[b]), self.spec)
    }

    pub fn out_extent(&self, len: usize) -> usize {
        (len + 2 * self.spec.padding - self.kernel) / self.spec.stride + 1
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> u64 {
        (n * self.cout
            * self.out_extent(h)
            * self.out_extent(w)
            * (self.cin / self.spec.groups)
            * self.kernel
            * self.kernel) as u64
    }
}

fn expect_channels<T: Element>(tape: &Tape<T>, x: Var, op: &'static str, channels: usize) -> Result<[usize; 4]> {
    let dims = tape.value(x).dims4(op)?;
    if dims[1] != channels {
        return Err(Error::dim(op, format!("axis C of input is {} but the block expects {channels}", dims[1])));
    }
    Ok(dims)
}

/// Channel-independent denoising block:
/// `x + PConv₂(GELU(PConv₁(DConv₇ₓ₇(x))))`.
#[derive(Clone, Debug)]
pub struct CidBlock {
    pub channels: usize,
    pub expansion: usize,
    pub depthwise: ConvLayer,
    pub expand: ConvLayer,
    pub project: ConvLayer,
}

impl CidBlock {
    pub const KERNEL: usize = 7;

    pub fn new<T: Element>(store: &mut ParamStore<T>, name: &str, channels: usize, expansion: usize) -> Self {
        let hidden = channels * expansion;
        CidBlock {
            channels,
            expansion,
            depthwise: ConvLayer::depthwise(store, &format!("{name}.dw"), channels, Self::KERNEL),
            expand: ConvLayer::pointwise(store, &format!("{name}.pw1"), channels, hidden),
            project: ConvLayer::pointwise(store, &format!("{name}.pw2"), hidden, channels),
        }
    }

    pub fn forward<T: Element>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        expect_channels(tape, x, "cid_block", self.channels)?;
        let y = self.depthwise.forward(tape, p, x)?;
        let y = self.expand.forward(tape, p, y)?;
        let y = tape.gelu(y);
        let y = self.project.forward(tape, p, y)?;
        tape.add(x, y)
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> u64 {
        self.depthwise.macs(n, h, w) + self.expand.macs(n, h, w) + self.project.macs(n, h, w)
    }
}

/// Strided 2×2 convolution: `[N, C, H, W] → [N, 2C, H/2, W/2]`.
#[derive(Clone, Debug)]
pub struct Downsample {
    pub conv: ConvLayer,
}

impl Downsample {
    pub fn new<T: Element>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Self {
        Downsample { conv: ConvLayer::new(store, name, channels, 2 * channels, 2, Conv2dSpec::new(2, 0, 1)) }
    }

    pub fn forward<T: Element>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        let [_, _, h, w] = expect_channels(tape, x, "downsample", self.conv.cin)?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::dim("downsample", format!("axes H={h} and W={w} must both be even")));
        }
        self.conv.forward(tape, p, x)
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> u64 {
        self.conv.macs(n, h, w)
    }
}

/// 1×1 convolution to `2C` channels then a ×2 pixel shuffle:
/// `[N, C, H, W] → [N, C/2, 2H, 2W]`.
#[derive(Clone, Debug)]
pub struct Upsample {
    pub conv: ConvLayer,
}

impl Upsample {
    pub fn new<T: Element>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Result<Self> {
        if !channels.is_multiple_of(2) {
            return Err(Error::config(format!("upsample needs an even channel count, got {channels}")));
        }
        Ok(Upsample { conv: ConvLayer::pointwise(store, name, channels, 2 * channels) })
    }

    pub fn forward<T: Element>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        let [_, c, _, _] = tape.value(x).dims4("upsample")?;
        if c % 2 != 0 {
            return Err(Error::dim("upsample", format!("axis C={c} must be even")));
        }
        expect_channels(tape, x, "upsample", self.conv.cin)?;
        let y = self.conv.forward(tape, p, x)?;
        tape.pixel_shuffle(y, 2)
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> u64 {
        self.conv.macs(n, h, w)
    }
}

/// LayerNorm then point-wise and 3×3 depth-wise projections for Q, K, V.
#[derive(Clone, Debug)]
pub struct QkvProjection {
    pub channels: usize,
    pub norm_gamma: ParamId,
    pub norm_beta: ParamId,
    pub pointwise: [ConvLayer; 3],
    pub depthwise: [ConvLayer; 3],
}

impl QkvProjection {
    pub const KERNEL: usize = 3;

    pub fn new<T: Element>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Self {
        let norm_gamma = store.filled(format!("{name}.norm.gamma"), &[channels], 1.0);
        let norm_beta = store.filled(format!("{name}.norm.beta"), &[channels], 0.0);
        let pw = |store: &mut ParamStore<T>, which: &str| {
            ConvLayer::pointwise(store, &format!("{name}.{which}_pw"), channels, channels)
        };
        let pointwise = [pw(store, "q"), pw(store, "k"), pw(store, "v")];
        let dw = |store: &mut ParamStore<T>, which: &str| {
            ConvLayer::depthwise(store, &format!("{name}.{which}_dw"), channels, Self::KERNEL)
        };
        let depthwise = [dw(store, "q"), dw(store, "k"), dw(store, "v")];
        QkvProjection { channels, norm_gamma, norm_beta, pointwise, depthwise }
    }

    pub fn forward<T: Element>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<[Var; 3]> {
        expect_channels(tape, x, "qkv_project", self.channels)?;
        let normed = tape.layer_norm(x, p[self.norm_gamma], p[self.norm_beta], LAYER_NORM_EPS)?;
        let mut out = [normed; 3];
        for (slot, (pw, dw)) in out.iter_mut().zip(self.pointwise.iter().zip(&self.depthwise)) {
            let y = pw.forward(tape, p, normed)?;
            *slot = dw.forward(tape, p, y)?;
        }
        Ok(out)
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> u64 {
        norm_macs(n * self.channels * h * w)
            + self.pointwise.iter().chain(&self.depthwise).map(|c| c.macs(n, h, w)).sum::<u64>()
    }
}

/// Channel-to-channel attention with a global receptive field:
/// `x + PConv(softmax(t · Q̂K̂ᵀ) · V)` where `Q̂`, `K̂` are the per-channel
/// L2-normalized `C × HW` matrices and `t` is a learned temperature.
#[derive(Clone, Debug)]
pub struct ChannelAttention {
    pub channels: usize,
    pub qkv: QkvProjection,
    pub temperature: ParamId,
    pub output: ConvLayer,
}

impl ChannelAttention {
    pub fn new<T: Element>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Self {
        ChannelAttention {
            channels,
            qkv: QkvProjection::new(store, name, channels),
            temperature: store.filled(format!("{name}.temperature"), &[1], 1.0),
            output: ConvLayer::pointwise(store, &format!("{name}.out_pw"), channels, channels),
        }
    }

    /// The attention map `softmax(t · Q̂K̂ᵀ)`, shape `[N, C, C]`.
    pub fn attention_map<T: Element>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<(Var, Var)> {
        let [q, k, v] = self.qkv.forward(tape, p, x)?;
        let q = tape.l2_normalize_planes(q, L2_EPS)?;
        let k = tape.l2_normalize_planes(k, L2_EPS)?;
        let scores = tape.channel_gram(q, k)?;
        let scores = tape.scale_by(scores, p[self.temperature])?;
        Ok((tape.softmax_last(scores)?, v))
    }

    pub fn forward<T: Element>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        let (attn, v) = self.attention_map(tape, p, x)?;
        let mixed = tape.channel_mix(attn, v)?;
        let y = self.output.forward(tape, p, mixed)?;
        tape.add(x, y)
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> u64 {
        let c = self.channels;
        let numel = (n * c * h * w) as u64;
        self.qkv.macs(n, h, w)
            + 2 * numel // two plane normalizations
            + 2 * (n * c * c * h * w) as u64 // gram and mix
            + self.output.macs(n, h, w)
    }
}
