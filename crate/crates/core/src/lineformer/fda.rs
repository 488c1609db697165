//! Feature domain adaptation built around line attention.
//!
//! ```text
//! Fᵗ = line_attention(qkv_project(x))
//! y  = DConv(PConv(PConv(GroupNorm(Fᵗ)) + x))
//! ```

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::lineformer::attention::{attention_macs, check_window, AttentionImpl};
use crate::nn::blocks::{ConvLayer, QkvProjection, GROUP_NORM_EPS};
use crate::nn::params::{Bound, ParamId, ParamStore};
use crate::ops::norm::norm_macs;
use crate::tensor::Element;

#[derive(Clone, Debug)]
pub struct LineAttentionParams {
    pub channels: usize,
    /// Local window height in rows.
    pub h: usize,
    pub groups: usize,
    pub qkv: QkvProjection,
    pub norm_gamma: ParamId,
    pub norm_beta: ParamId,
    pub project: ConvLayer,
    pub refine_pw: ConvLayer,
    pub refine_dw: ConvLayer,
}

impl LineAttentionParams {
    pub const REFINE_KERNEL: usize = 3;

    pub fn new<T: Element>(
        store: &mut ParamStore<T>,
        name: &str,
        channels: usize,
        h: usize,
        groups: usize,
    ) -> Result<Self> {
        check_window(h)?;
        if groups == 0 || !channels.is_multiple_of(groups) {
            return Err(Error::config(format!("group norm needs {channels} channels to split into {groups} groups")));
        }
        Ok(LineAttentionParams {
            channels,
            h,
            groups,
            qkv: QkvProjection::new(store, &format!("{name}.qkv"), channels),
            norm_gamma: store.filled(format!("{name}.gn.gamma"), &[channels], 1.0),
            norm_beta: store.filled(format!("{name}.gn.beta"), &[channels], 0.0),
            project: ConvLayer::pointwise(store, &format!("{name}.proj"), channels, channels),
            refine_pw: ConvLayer::pointwise(store, &format!("{name}.refine_pw"), channels, channels),
            refine_dw: ConvLayer::depthwise(store, &format!("{name}.refine_dw"), channels, Self::REFINE_KERNEL),
        })
    }

    /// `(Q, K, V) = DConv(PConv(LayerNorm(x)))`, each head with its own weights.
    pub fn qkv_project<T: Element>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<[Var; 3]> {
        self.qkv.forward(tape, p, x)
    }

    /// The raw attention output `Fᵗ` before normalization.
    pub fn attend<T: Element>(&self, tape: &mut Tape<T>, p: &Bound, x: Var, kind: AttentionImpl) -> Result<Var> {
        let [q, k, v] = self.qkv_project(tape, p, x)?;
        tape.line_attention(q, k, v, self.h, kind)
    }

    pub fn forward<T: Element>(&self, tape: &mut Tape<T>, p: &Bound, x: Var, kind: AttentionImpl) -> Result<Var> {
        let ft = self.attend(tape, p, x, kind)?;
        let normed = tape.group_norm(ft, self.groups, p[self.norm_gamma], p[self.norm_beta], GROUP_NORM_EPS)?;
        let projected = self.project.forward(tape, p, normed)?;
        let merged = tape.add(projected, x)?;
        let y = self.refine_pw.forward(tape, p, merged)?;
        self.refine_dw.forward(tape, p, y)
    }

    pub fn macs(&self, kind: AttentionImpl, n: usize, h: usize, w: usize) -> u64 {
        self.qkv.macs(n, h, w)
            + attention_macs(kind, n, self.channels, h, w, self.h)
            + norm_macs(n * self.channels * h * w)
            + self.project.macs(n, h, w)
            + self.refine_pw.macs(n, h, w)
            + self.refine_dw.macs(n, h, w)
    }
}

/// Functional form of [`LineAttentionParams::forward`].
pub fn fda_forward<T: Element>(
    tape: &mut Tape<T>,
    p: &Bound,
    params: &LineAttentionParams,
    x: Var,
    kind: AttentionImpl,
) -> Result<Var> {
    params.forward(tape, p, x, kind)
}
