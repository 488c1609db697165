//! The full network: a shared raw encoder, per-scale feature domain
//! adaptation, an sRGB decoder and an auxiliary raw decoder.
//!
//! The train graph runs both decoders off one encoder evaluation. The
//! inference graph stops after the sRGB decoder and never touches the raw
//! decoder, so its output is bitwise equal to the train graph's `y_rgb`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::lineformer::attention::AttentionImpl;
use crate::lineformer::fda::LineAttentionParams;
use crate::nn::blocks::{ChannelAttention, CidBlock, ConvLayer, Downsample, Upsample};
use crate::nn::params::{Bound, ParamStore};
use crate::ops::conv::Conv2dSpec;
use crate::tensor::{Element, Tensor};

/// Name of the tape counter bumped once per encoder evaluation.
pub const ENCODER_COUNTER: &str = "encoder";

const MAX_SCALES: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdaKind {
    #[default]
    Lineformer,
    Conv,
    ChannelAttention,
}

impl FdaKind {
    pub const ALL: [FdaKind; 3] = [FdaKind::Lineformer, FdaKind::Conv, FdaKind::ChannelAttention];

    pub fn name(self) -> &'static str {
        match self {
            FdaKind::Lineformer => "lineformer",
            FdaKind::Conv => "conv",
            FdaKind::ChannelAttention => "channel_attention",
        }
    }
}

impl std::str::FromStr for FdaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FdaKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::config(format!("unknown fda_kind `{s}` (expected lineformer, conv or channel_attention)"))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub num_scales: usize,
    pub base_channels: usize,
    pub cid_blocks_per_scale: usize,
    pub cid_expansion: usize,
    /// Line attention window height for each scale, finest first.
    pub window_heights: Vec<usize>,
    pub groupnorm_groups: usize,
    pub use_fda: bool,
    pub use_raw_supervision: bool,
    pub fda_kind: FdaKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_scales: 3,
            base_channels: 16,
            cid_blocks_per_scale: 2,
            cid_expansion: 2,
            window_heights: vec![7; 3],
            groupnorm_groups: 4,
            use_fda: true,
            use_raw_supervision: true,
            fda_kind: FdaKind::Lineformer,
        }
    }
}

impl ModelConfig {
    /// Small enough for f64 gradient checks and the smoke training runs.
    pub fn tiny() -> Self {
        ModelConfig {
            num_scales: 2,
            base_channels: 4,
            cid_blocks_per_scale: 1,
            cid_expansion: 2,
            window_heights: vec![3, 3],
            groupnorm_groups: 2,
            ..ModelConfig::default()
        }
    }

    pub fn channels_at(&self, scale: usize) -> usize {
        self.base_channels << scale
    }

    /// Spatial extents of the packed input must be multiples of this.
    pub fn spatial_multiple(&self) -> usize {
        1 << (self.num_scales - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_scales == 0 || self.num_scales > MAX_SCALES {
            return Err(Error::config(format!("num_scales must be in 1..={MAX_SCALES}, got {}", self.num_scales)));
        }
        if self.base_channels == 0 {
            return Err(Error::config("base_channels must be positive"));
        }
        if self.cid_expansion == 0 {
            return Err(Error::config("cid_expansion must be positive"));
        }
        if self.groupnorm_groups == 0 || !self.base_channels.is_multiple_of(self.groupnorm_groups) {
            return Err(Error::config(format!(
                "base_channels ({}) must be divisible by groupnorm_groups ({})",
                self.base_channels, self.groupnorm_groups
            )));
        }
        if self.window_heights.len() != self.num_scales {
            return Err(Error::config(format!(
                "window_heights has {} entries but num_scales is {}",
                self.window_heights.len(),
                self.num_scales
            )));
        }
        if let Some(h) = self.window_heights.iter().find(|&&h| h == 0 || h % 2 == 0) {
            return Err(Error::config(format!("window_heights entries must be odd and positive, got {h}")));
        }
        Ok(())
    }

    /// Checks a packed input shape `[N, 4, H, W]` against this config.
    pub fn check_input(&self, shape: &[usize]) -> Result<[usize; 4]> {
        let [n, c, h, w]: [usize; 4] = shape
            .try_into()
            .map_err(|_| Error::dim("model input", format!("expected rank 4 [N,4,H,W], got {shape:?}")))?;
        if c != 4 {
            return Err(Error::dim("model input", format!("axis C must be 4 packed Bayer planes, got {c}")));
        }
        let m = self.spatial_multiple();
        if h % m != 0 || w % m != 0 {
            return Err(Error::dim(
                "model input",
                format!("axes H={h} and W={w} must be multiples of {m} for {} scales", self.num_scales),
            ));
        }
        Ok([n, c, h, w])
    }
}

/// The adaptation block applied to one encoder scale.
#[derive(Clone, Debug)]
pub enum FdaBlock {
    Lineformer(LineAttentionParams),
    Conv(CidBlock),
    ChannelAttention(ChannelAttention),
}

impl FdaBlock {
    pub fn forward<T: Element>(&self, tape: &mut Tape<T>, p: &Bound, x: Var, kind: AttentionImpl) -> Result<Var> {
        match self {
            FdaBlock::Lineformer(b) => b.forward(tape, p, x, kind),
            FdaBlock::Conv(b) => b.forward(tape, p, x),
            FdaBlock::ChannelAttention(b) => b.forward(tape, p, x),
        }
    }

    pub fn macs(&self, kind: AttentionImpl, n: usize, h: usize, w: usize) -> u64 {
        match self {
            FdaBlock::Lineformer(b) => b.macs(kind, n, h, w),
            FdaBlock::Conv(b) => b.macs(n, h, w),
            FdaBlock::ChannelAttention(b) => b.macs(n, h, w),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EncoderStage {
    pub down: Option<Downsample>,
    pub blocks: Vec<CidBlock>,
}

#[derive(Clone, Debug)]
pub struct RgbStage {
    /// Upsampling from the next coarser scale; absent at the deepest scale.
    pub up: Option<Upsample>,
    pub attention: ChannelAttention,
    pub block: CidBlock,
}

#[derive(Clone, Debug)]
pub struct RawStage {
    pub up: Option<Upsample>,
    /// Fuses the upsampled features with the concatenated skip, `2C → C`.
    pub fuse: Option<ConvLayer>,
    pub block: CidBlock,
}

/// Which part of the network a block belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Encoder,
    Fda,
    RgbDecoder,
    RawDecoder,
}

impl Branch {
    pub fn in_inference(self) -> bool {
        self != Branch::RawDecoder
    }
}

/// Analytic cost of one named block at a given input shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCost {
    pub name: String,
    pub branch: Branch,
    pub macs: u64,
    pub params: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ForwardOptions {
    pub attention: AttentionImpl,
    /// Stops gradients from the sRGB branch reaching the encoder.
    pub detach_rgb_input: bool,
    /// Stops gradients from the raw branch reaching the encoder.
    pub detach_raw_input: bool,
}

impl ForwardOptions {
    pub fn with_attention(attention: AttentionImpl) -> Self {
        ForwardOptions { attention, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NetworkOutputs {
    /// `[N, 3, 2H, 2W]`.
    pub y_rgb: Var,
    /// `[N, 4, H, W]`.
    pub y_raw: Var,
}

#[derive(Clone, Debug)]
pub struct Model<T: Element = f32> {
    pub config: ModelConfig,
    pub store: ParamStore<T>,
    pub stem: ConvLayer,
    pub encoder: Vec<EncoderStage>,
    /// One block per scale when FDA is enabled, otherwise empty.
    pub fda: Vec<FdaBlock>,
    pub rgb: Vec<RgbStage>,
    pub rgb_head: ConvLayer,
    pub raw: Vec<RawStage>,
    pub raw_head: ConvLayer,
}

impl<T: Element> Model<T> {
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new(seed);
        let s = &mut store;
        let cfg = &config;
        let scales = cfg.num_scales;
        let c0 = cfg.base_channels;

        let stem = ConvLayer::new(s, "enc.stem", 4, c0, 3, Conv2dSpec::same(3, 1));
        let mut encoder = Vec::with_capacity(scales);
        for k in 0..scales {
            let c = cfg.channels_at(k);
            let down = (k > 0).then(|| Downsample::new(s, &format!("enc.s{k}.down"), c / 2));
            let blocks = (0..cfg.cid_blocks_per_scale)
                .map(|i| CidBlock::new(s, &format!("enc.s{k}.cid{i}"), c, cfg.cid_expansion))
                .collect();
            encoder.push(EncoderStage { down, blocks });
        }

        let mut fda = Vec::new();
        if cfg.use_fda {
            for k in 0..scales {
                let c = cfg.channels_at(k);
                let name = format!("fda.s{k}");
                fda.push(match cfg.fda_kind {
                    FdaKind::Lineformer => FdaBlock::Lineformer(LineAttentionParams::new(
                        s,
                        &name,
                        c,
                        cfg.window_heights[k],
                        cfg.groupnorm_groups,
                    )?),
                    FdaKind::Conv => FdaBlock::Conv(CidBlock::new(s, &name, c, cfg.cid_expansion)),
                    FdaKind::ChannelAttention => FdaBlock::ChannelAttention(ChannelAttention::new(s, &name, c)),
                });
            }
        }

        let mut rgb = Vec::with_capacity(scales);
        for k in 0..scales {
            let c = cfg.channels_at(k);
            let up = if k + 1 < scales { Some(Upsample::new(s, &format!("rgb.s{k}.up"), 2 * c)?) } else { None };
            rgb.push(RgbStage {
                up,
                attention: ChannelAttention::new(s, &format!("rgb.s{k}.attn"), c),
                block: CidBlock::new(s, &format!("rgb.s{k}.cid"), c, cfg.cid_expansion),
            });
        }
        let rgb_head = ConvLayer::pointwise(s, "rgb.head", c0, 12);

        let mut raw = Vec::with_capacity(scales);
        for k in 0..scales {
            let c = cfg.channels_at(k);
            let (up, fuse) = if k + 1 < scales {
                (
                    Some(Upsample::new(s, &format!("raw.s{k}.up"), 2 * c)?),
                    Some(ConvLayer::pointwise(s, &format!("raw.s{k}.fuse"), 2 * c, c)),
                )
            } else {
                (None, None)
            };
            raw.push(RawStage { up, fuse, block: CidBlock::new(s, &format!("raw.s{k}.cid"), c, cfg.cid_expansion) });
        }
        let raw_head = ConvLayer::pointwise(s, "raw.head", c0, 4);

        Ok(Model { config, store, stem, encoder, fda, rgb, rgb_head, raw, raw_head })
    }

    pub fn param_count(&self) -> usize {
        self.store.numel()
    }

    pub fn line_attention_modules(&self) -> usize {
        self.fda.iter().filter(|b| matches!(b, FdaBlock::Lineformer(_))).count()
    }

    /// Per-scale encoder features `F_en`, finest first.
    pub fn encode(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Vec<Var>> {
        self.config.check_input(tape.value(x).shape())?;
        tape.bump(ENCODER_COUNTER);
        let mut y = self.stem.forward(tape, p, x)?;
        let mut feats = Vec::with_capacity(self.encoder.len());
        for stage in &self.encoder {
            if let Some(down) = &stage.down {
                y = down.forward(tape, p, y)?;
            }
            for block in &stage.blocks {
                y = block.forward(tape, p, y)?;
            }
            feats.push(y);
        }
        Ok(feats)
    }

    /// Maps raw-domain features to the sRGB domain; identity when FDA is off.
    pub fn adapt(&self, tape: &mut Tape<T>, p: &Bound, feats: &[Var], kind: AttentionImpl) -> Result<Vec<Var>> {
        if self.fda.is_empty() {
            return Ok(feats.to_vec());
        }
        feats.iter().zip(&self.fda).map(|(&f, block)| block.forward(tape, p, f, kind)).collect()
    }

    /// Coarse-to-fine decoding with additive skips, then a ×2 pixel shuffle.
    pub fn decode_rgb(&self, tape: &mut Tape<T>, p: &Bound, feats: &[Var]) -> Result<Var> {
        let mut y: Option<Var> = None;
        for (k, stage) in self.rgb.iter().enumerate().rev() {
            let mut d = match (y, &stage.up) {
                (Some(prev), Some(up)) => {
                    let u = up.forward(tape, p, prev)?;
                    tape.add(u, feats[k])?
                }
                _ => feats[k],
            };
            d = stage.attention.forward(tape, p, d)?;
            d = stage.block.forward(tape, p, d)?;
            y = Some(d);
        }
        let y = self.rgb_head.forward(tape, p, y.expect("at least one scale"))?;
        tape.pixel_shuffle(y, 2)
    }

    /// Coarse-to-fine decoding with concatenated skips back to packed raw.
    pub fn decode_raw(&self, tape: &mut Tape<T>, p: &Bound, feats: &[Var]) -> Result<Var> {
        let mut y: Option<Var> = None;
        for (k, stage) in self.raw.iter().enumerate().rev() {
            let d = match (y, &stage.up, &stage.fuse) {
                (Some(prev), Some(up), Some(fuse)) => {
                    let u = up.forward(tape, p, prev)?;
                    let cat = tape.concat_channels(&[u, feats[k]])?;
                    fuse.forward(tape, p, cat)?
                }
                _ => feats[k],
            };
            y = Some(stage.block.forward(tape, p, d)?);
        }
        self.raw_head.forward(tape, p, y.expect("at least one scale"))
    }

    fn rgb_branch(&self, tape: &mut Tape<T>, p: &Bound, feats: &[Var], opts: ForwardOptions) -> Result<Var> {
        let feats =
            if opts.detach_rgb_input { feats.iter().map(|&f| tape.detach(f)).collect() } else { feats.to_vec() };
        let adapted = self.adapt(tape, p, &feats, opts.attention)?;
        self.decode_rgb(tape, p, &adapted)
    }

    /// Both outputs from a single encoder evaluation.
    pub fn forward_train(&self, tape: &mut Tape<T>, p: &Bound, x: Var, opts: ForwardOptions) -> Result<NetworkOutputs> {
        let feats = self.encode(tape, p, x)?;
        let y_rgb = self.rgb_branch(tape, p, &feats, opts)?;
        let raw_feats: Vec<Var> =
            if opts.detach_raw_input { feats.iter().map(|&f| tape.detach(f)).collect() } else { feats };
        let y_raw = self.decode_raw(tape, p, &raw_feats)?;
        Ok(NetworkOutputs { y_rgb, y_raw })
    }

    pub fn forward_infer(&self, tape: &mut Tape<T>, p: &Bound, x: Var, opts: ForwardOptions) -> Result<Var> {
        let feats = self.encode(tape, p, x)?;
        self.rgb_branch(tape, p, &feats, opts)
    }

    /// Runs the inference graph on a gradient-free tape.
    pub fn infer(&self, x: &Tensor<T>, attention: AttentionImpl) -> Result<Tensor<T>> {
        Ok(self.infer_counted(x, attention)?.0)
    }

    /// Like [`Model::infer`], also returning the MACs the tape executed.
    pub fn infer_counted(&self, x: &Tensor<T>, attention: AttentionImpl) -> Result<(Tensor<T>, u64)> {
        let mut tape = Tape::inference();
        let p = self.store.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let y = self.forward_infer(&mut tape, &p, xv, ForwardOptions::with_attention(attention))?;
        let macs = tape.macs();
        Ok((tape.value(y).clone(), macs))
    }

    fn params_under(&self, prefix: &str) -> usize {
        self.store.numel_with_prefix(&format!("{prefix}."))
    }

    /// Analytic per-block costs for a packed input of `input_shape`, in
    /// execution order of the train graph.
    pub fn block_costs(&self, input_shape: &[usize], attention: AttentionImpl) -> Result<Vec<BlockCost>> {
        let [n, _, h0, w0] = self.config.check_input(input_shape)?;
        let mut out = Vec::new();
        let mut push = |name: String, branch: Branch, macs: u64| {
            let params = self.params_under(&name);
            out.push(BlockCost { name, branch, macs, params });
        };
        let dims = |k: usize| (h0 >> k, w0 >> k);

        push("enc.stem".into(), Branch::Encoder, self.stem.macs(n, h0, w0));
        for (k, stage) in self.encoder.iter().enumerate() {
            let (h, w) = dims(k);
            if let Some(down) = &stage.down {
                push(format!("enc.s{k}.down"), Branch::Encoder, down.macs(n, 2 * h, 2 * w));
            }
            for (i, b) in stage.blocks.iter().enumerate() {
                push(format!("enc.s{k}.cid{i}"), Branch::Encoder, b.macs(n, h, w));
            }
        }
        for (k, block) in self.fda.iter().enumerate() {
            let (h, w) = dims(k);
            push(format!("fda.s{k}"), Branch::Fda, block.macs(attention, n, h, w));
        }
        for (k, stage) in self.rgb.iter().enumerate().rev() {
            let (h, w) = dims(k);
            if let Some(up) = &stage.up {
                push(format!("rgb.s{k}.up"), Branch::RgbDecoder, up.macs(n, h / 2, w / 2));
            }
            push(format!("rgb.s{k}.attn"), Branch::RgbDecoder, stage.attention.macs(n, h, w));
            push(format!("rgb.s{k}.cid"), Branch::RgbDecoder, stage.block.macs(n, h, w));
        }
        push("rgb.head".into(), Branch::RgbDecoder, self.rgb_head.macs(n, h0, w0));
        for (k, stage) in self.raw.iter().enumerate().rev() {
            let (h, w) = dims(k);
            if let Some(up) = &stage.up {
                push(format!("raw.s{k}.up"), Branch::RawDecoder, up.macs(n, h / 2, w / 2));
            }
            if let Some(fuse) = &stage.fuse {
                push(format!("raw.s{k}.fuse"), Branch::RawDecoder, fuse.macs(n, h, w));
            }
            push(format!("raw.s{k}.cid"), Branch::RawDecoder, stage.block.macs(n, h, w));
        }
        push("raw.head".into(), Branch::RawDecoder, self.raw_head.macs(n, h0, w0));
        Ok(out)
    }

    pub fn cast<U: Element>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            store: self.store.cast(),
            stem: self.stem.clone(),
            encoder: self.encoder.clone(),
            fda: self.fda.clone(),
            rgb: self.rgb.clone(),
            rgb_head: self.rgb_head.clone(),
            raw: self.raw.clone(),
            raw_head: self.raw_head.clone(),
        }
    }
}
