//! Analytic MAC and parameter accounting.
//!
//! One multiply-accumulate counts as one FLOP. Convolutions cost
//! `N·Cout·H'·W'·(Cin/groups)·kh·kw`, normalizations two MACs per element,
//! line attention `2·N·H·W·C²` (row aggregates plus per-row apply), channel
//! attention `N·C²·HW` each for the gram matrix and the mix. Activations,
//! additions, softmax and reshuffles are free.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lineformer::attention::AttentionImpl;
use crate::model::{BlockCost, Branch, Model};
use crate::tensor::Element;

pub const CONVENTION: &str = "FLOPs = MACs (one multiply-add counted once)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockFlops {
    pub name: String,
    pub branch: Branch,
    pub macs: u64,
    pub params: usize,
    pub in_train: bool,
    pub in_infer: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlopsReport {
    pub convention: String,
    pub input_shape: Vec<usize>,
    pub attention: AttentionImpl,
    pub blocks: Vec<BlockFlops>,
    pub train_macs: u64,
    pub infer_macs: u64,
    pub params_total: usize,
    /// Parameters the inference graph reads.
    pub params_infer: usize,
    pub raw_decoder_macs: u64,
    /// `raw_decoder_macs / train_macs`.
    pub raw_decoder_share: f64,
    pub fda_macs: u64,
    pub fda_params: usize,
}

impl FlopsReport {
    /// Totals are plain sums over `blocks`, so block order does not matter.
    pub fn from_blocks(input_shape: Vec<usize>, attention: AttentionImpl, blocks: Vec<BlockFlops>) -> Self {
        let sum_macs = |f: &dyn Fn(&BlockFlops) -> bool| blocks.iter().filter(|b| f(b)).map(|b| b.macs).sum::<u64>();
        let sum_params =
            |f: &dyn Fn(&BlockFlops) -> bool| blocks.iter().filter(|b| f(b)).map(|b| b.params).sum::<usize>();
        let train_macs = sum_macs(&|b| b.in_train);
        let raw_decoder_macs = sum_macs(&|b| b.branch == Branch::RawDecoder);
        FlopsReport {
            convention: CONVENTION.to_string(),
            attention,
            train_macs,
            infer_macs: sum_macs(&|b| b.in_infer),
            params_total: sum_params(&|_| true),
            params_infer: sum_params(&|b| b.in_infer),
            raw_decoder_macs,
            raw_decoder_share: if train_macs == 0 { 0.0 } else { raw_decoder_macs as f64 / train_macs as f64 },
            fda_macs: sum_macs(&|b| b.branch == Branch::Fda),
            fda_params: sum_params(&|b| b.branch == Branch::Fda),
            input_shape,
            blocks,
        }
    }

    pub fn infer_train_ratio(&self) -> f64 {
        self.infer_macs as f64 / self.train_macs as f64
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.convention);
        let _ = writeln!(out, "# input {:?}, attention {}", self.input_shape, self.attention.name());
        let _ = writeln!(out, "{:<16} {:<12} {:>16} {:>10} {:>6}", "block", "branch", "macs", "params", "infer");
        for b in &self.blocks {
            let _ = writeln!(
                out,
                "{:<16} {:<12} {:>16} {:>10} {:>6}",
                b.name,
                format!("{:?}", b.branch),
                b.macs,
                b.params,
                if b.in_infer { "yes" } else { "no" }
            );
        }
        let _ = writeln!(out, "train MACs        {}", self.train_macs);
        let _ = writeln!(out, "inference MACs    {}", self.infer_macs);
        let _ = writeln!(out, "inference / train {:.4}", self.infer_train_ratio());
        let _ = writeln!(
            out,
            "raw decoder       {} MACs ({:.2}% of train)",
            self.raw_decoder_macs,
            100.0 * self.raw_decoder_share
        );
        let _ = writeln!(out, "FDA               {} MACs, {} params", self.fda_macs, self.fda_params);
        let _ = writeln!(out, "params            {} total, {} at inference", self.params_total, self.params_infer);
        out
    }
}

impl From<BlockCost> for BlockFlops {
    fn from(c: BlockCost) -> Self {
        BlockFlops {
            in_train: true,
            in_infer: c.branch.in_inference(),
            name: c.name,
            branch: c.branch,
            macs: c.macs,
            params: c.params,
        }
    }
}

pub fn count_flops<T: Element>(
    model: &Model<T>,
    input_shape: &[usize],
    attention: AttentionImpl,
) -> Result<FlopsReport> {
    let blocks = model.block_costs(input_shape, attention)?.into_iter().map(BlockFlops::from).collect();
    Ok(FlopsReport::from_blocks(input_shape.to_vec(), attention, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn default_config_inference_is_strictly_cheaper() {
        let model = Model::<f32>::build(ModelConfig::default(), 0).unwrap();
        let r = count_flops(&model, &[1, 4, 256, 256], AttentionImpl::Linear).unwrap();
        assert!(r.infer_macs < r.train_macs);
        assert_eq!(r.train_macs - r.infer_macs, r.raw_decoder_macs);
        assert_eq!(r.params_total, model.param_count());
        assert!(r.to_table().contains("inference / train"));
    }

    #[test]
    fn linear_attention_cost_ignores_window_height() {
        let cost = |h: usize| {
            let config = ModelConfig { window_heights: vec![h; 3], ..ModelConfig::default() };
            let model = Model::<f32>::build(config, 0).unwrap();
            let lin = count_flops(&model, &[1, 4, 32, 32], AttentionImpl::Linear).unwrap();
            let naive = count_flops(&model, &[1, 4, 32, 32], AttentionImpl::Naive).unwrap();
            (lin.fda_macs, naive.fda_macs)
        };
        let (l3, n3) = cost(3);
        let (l7, n7) = cost(7);
        assert_eq!(l3, l7);
        assert!(n7 > n3);
    }
}
