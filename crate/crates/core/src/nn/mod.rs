pub mod blocks;
pub mod params;

pub use blocks::{ChannelAttention, CidBlock, ConvLayer, Downsample, QkvProjection, Upsample};
pub use params::{Bound, Param, ParamId, ParamStore};
