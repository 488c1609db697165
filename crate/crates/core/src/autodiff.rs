//! Reverse-mode automatic differentiation over a Wengert tape.
//!
//! Every operation appends a node holding its output value and, when any
//! input requires a gradient, the information its backward rule needs.
//! Nodes are only ever appended, so the tape is already in topological order
//! and [`Tape::backward`] is a single reverse sweep.
//!
//! Leaf gradients persist across calls to `backward` and accumulate;
//! intermediate gradients live only for the duration of one sweep.
//!
//! The tape also counts multiply-accumulates as operations execute, using the
//! same cost conventions as [`crate::analysis::flops`].

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lineformer::attention::{
    attention_macs, line_attention_backward, line_attention_linear, line_attention_naive, AttentionImpl,
};
use crate::lineformer::streaming::line_attention_streaming;
use crate::ops::activation::{gelu, gelu_backward};
use crate::ops::channel::{
    channel_gram, channel_gram_backward, channel_mix, channel_mix_backward, l2_normalize_backward,
    l2_normalize_forward, softmax_last, softmax_last_backward,
};
use crate::ops::conv::{conv2d_backward, conv2d_forward, Conv2dSpec, ConvGeometry};
use crate::ops::loss::{check_same_shape, l1_backward, l1_loss};
use crate::ops::norm::{
    group_norm_backward, group_norm_forward, layer_norm_backward, layer_norm_forward, norm_macs, NormStats,
};
use crate::ops::shuffle::{concat_channels, pixel_shuffle, pixel_unshuffle};
use crate::tensor::{Element, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Conv2d { x: Var, w: Var, b: Option<Var>, geom: ConvGeometry },
    Gelu { x: Var },
    LayerNorm { x: Var, gamma: Var, beta: Var, stats: NormStats },
    GroupNorm { x: Var, gamma: Var, beta: Var, groups: usize, stats: NormStats },
    Add { a: Var, b: Var },
    Scale { x: Var, factor: T },
    ScaleBy { x: Var, s: Var },
    L1 { pred: Var, target: Var },
    Sum { x: Var },
    Dot { x: Var, weights: Tensor<T> },
    PixelShuffle { x: Var, r: usize },
    PixelUnshuffle { x: Var, r: usize },
    Concat { parts: Vec<Var> },
    LineAttention { q: Var, k: Var, v: Var, h: usize },
    L2Normalize { x: Var, eps: f64, norms: Vec<f64> },
    ChannelGram { q: Var, k: Var },
    Softmax { y_len: usize, x: Var },
    ChannelMix { a: Var, v: Var },
}

struct Node<T> {
    value: Tensor<T>,
    requires_grad: bool,
    op: Op<T>,
    grad: Option<Vec<T>>,
}

pub struct Tape<T = f32> {
    nodes: Vec<Node<T>>,
    grad_enabled: bool,
    macs: u64,
    counters: BTreeMap<&'static str, usize>,
}

impl<T: Element> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn accumulate<T: Element>(slot: &mut Option<Vec<T>>, g: Vec<T>) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a = *a + b),
        None => *slot = Some(g),
    }
}

impl<T: Element> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), grad_enabled: true, macs: 0, counters: BTreeMap::new() }
    }

    /// A tape that records values only; nothing on it requires a gradient.
    pub fn inference() -> Self {
        Tape { grad_enabled: false, ..Self::new() }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Multiply-accumulates executed so far.
    pub fn macs(&self) -> u64 {
        self.macs
    }

    pub fn bump(&mut self, counter: &'static str) {
        *self.counters.entry(counter).or_default() += 1;
    }

    pub fn counter(&self, counter: &str) -> usize {
        self.counters.get(counter).copied().unwrap_or(0)
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, requires_grad: requires_grad && self.grad_enabled, op: Op::Leaf, grad: None });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    /// A new leaf sharing `v`'s value but cut off from its history.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, `None` if no gradient reached it.
    pub fn grad(&self, v: Var) -> Option<Tensor<T>> {
        let node = &self.nodes[v.0];
        node.grad
            .as_ref()
            .map(|g| Tensor::new(node.value.shape().to_vec(), g.clone()).expect("grad matches value shape"))
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Vec<T>> {
        self.nodes[v.0].grad.take()
    }

    pub fn zero_grads(&mut self) {
        self.nodes.iter_mut().for_each(|n| n.grad = None);
    }

    fn push(&mut self, value: Tensor<T>, inputs: &[Var], op: Op<T>, macs: u64) -> Var {
        self.macs += macs;
        let requires_grad = self.grad_enabled && inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, requires_grad, op: if requires_grad { op } else { Op::Leaf }, grad: None });
        Var(self.nodes.len() - 1)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, spec: Conv2dSpec) -> Result<Var> {
        let geom = ConvGeometry::resolve(
            self.value(x).shape(),
            self.value(w).shape(),
            b.map(|b| self.value(b).shape()),
            spec,
        )?;
        let out = conv2d_forward(&geom, self.value(x).data(), self.value(w).data(), b.map(|b| self.value(b).data()));
        let value = Tensor::new(geom.out_shape().to_vec(), out)?;
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(value, &inputs, Op::Conv2d { x, w, b, geom }, geom.macs()))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let value = gelu(self.value(x));
        self.push(value, &[x], Op::Gelu { x }, 0)
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (value, stats) = layer_norm_forward(self.value(x), self.value(gamma), self.value(beta), eps)?;
        let macs = norm_macs(value.numel());
        Ok(self.push(value, &[x, gamma, beta], Op::LayerNorm { x, gamma, beta, stats }, macs))
    }

    pub fn group_norm(&mut self, x: Var, groups: usize, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (value, stats) = group_norm_forward(self.value(x), groups, self.value(gamma), self.value(beta), eps)?;
        let macs = norm_macs(value.numel());
        Ok(self.push(value, &[x, gamma, beta], Op::GroupNorm { x, gamma, beta, groups, stats }, macs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same_shape("add", self.value(a), self.value(b))?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push(value, &[a, b], Op::Add { a, b }, 0))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let factor = T::from_f64(factor);
        let value = self.value(x).map(|v| v * factor);
        self.push(value, &[x], Op::Scale { x, factor }, 0)
    }

    /// Multiplies every element of `x` by the single element of `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var> {
        if !self.value(s).is_scalar() {
            return Err(Error::dim(
                "scale_by",
                format!("factor must hold one element, has shape {:?}", self.value(s).shape()),
            ));
        }
        let f = self.value(s).data()[0];
        let value = self.value(x).map(|v| v * f);
        Ok(self.push(value, &[x, s], Op::ScaleBy { x, s }, 0))
    }

    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let value = l1_loss(self.value(pred), self.value(target))?;
        Ok(self.push(value, &[pred, target], Op::L1 { pred, target }, 0))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum_f64();
        self.push(Tensor::scalar(T::from_f64(s)), &[x], Op::Sum { x }, 0)
    }

    /// `Σ weights ⊙ x` with constant weights; a smooth scalar probe for
    /// gradient checks.
    pub fn dot(&mut self, x: Var, weights: Tensor<T>) -> Result<Var> {
        check_same_shape("dot", self.value(x), &weights)?;
        let s: f64 = self.value(x).data().iter().zip(weights.data()).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
        Ok(self.push(Tensor::scalar(T::from_f64(s)), &[x], Op::Dot { x, weights }, 0))
    }

    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let value = pixel_shuffle(self.value(x), r)?;
        Ok(self.push(value, &[x], Op::PixelShuffle { x, r }, 0))
    }

    pub fn pixel_unshuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let value = pixel_unshuffle(self.value(x), r)?;
        Ok(self.push(value, &[x], Op::PixelUnshuffle { x, r }, 0))
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let value = concat_channels(&values)?;
        Ok(self.push(value, parts, Op::Concat { parts: parts.to_vec() }, 0))
    }

    pub fn line_attention(&mut self, q: Var, k: Var, v: Var, h: usize, kind: AttentionImpl) -> Result<Var> {
        let (qt, kt, vt) = (self.value(q), self.value(k), self.value(v));
        let value = match kind {
            AttentionImpl::Naive => line_attention_naive(qt, kt, vt, h)?,
            AttentionImpl::Linear => line_attention_linear(qt, kt, vt, h)?,
            AttentionImpl::Streaming => line_attention_streaming(qt, kt, vt, h)?.0,
        };
        let [n, c, height, width] = value.dims4("line_attention")?;
        let macs = attention_macs(kind, n, c, height, width, h);
        Ok(self.push(value, &[q, k, v], Op::LineAttention { q, k, v, h }, macs))
    }

    pub fn l2_normalize_planes(&mut self, x: Var, eps: f64) -> Result<Var> {
        let (value, norms) = l2_normalize_forward(self.value(x), eps)?;
        let macs = value.numel() as u64;
        Ok(self.push(value, &[x], Op::L2Normalize { x, eps, norms }, macs))
    }

    pub fn channel_gram(&mut self, q: Var, k: Var) -> Result<Var> {
        let value = channel_gram(self.value(q), self.value(k))?;
        let [n, c, h, w] = self.value(q).dims4("channel_gram")?;
        Ok(self.push(value, &[q, k], Op::ChannelGram { q, k }, (n * c * c * h * w) as u64))
    }

    pub fn softmax_last(&mut self, x: Var) -> Result<Var> {
        let value = softmax_last(self.value(x))?;
        let y_len = *value.shape().last().expect("softmax input has rank >= 1");
        Ok(self.push(value, &[x], Op::Softmax { y_len, x }, 0))
    }

    pub fn channel_mix(&mut self, a: Var, v: Var) -> Result<Var> {
        let value = channel_mix(self.value(a), self.value(v))?;
        let [n, c, h, w] = value.dims4("channel_mix")?;
        Ok(self.push(value, &[a, v], Op::ChannelMix { a, v }, (n * c * c * h * w) as u64))
    }

    /// Back-propagates from a scalar `loss`, accumulating into the gradients
    /// of every leaf that requires one.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root =
            self.nodes.get(loss.0).ok_or_else(|| Error::Usage(format!("loss var {} is not on this tape", loss.0)))?;
        if !root.value.is_scalar() {
            return Err(Error::Usage(format!("backward needs a scalar root, got shape {:?}", root.value.shape())));
        }
        if !root.requires_grad {
            return Ok(());
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let mut send = |v: Var, contribution: Vec<T>| {
                if self.nodes[v.0].requires_grad {
                    accumulate(&mut grads[v.0], contribution);
                }
            };
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Conv2d { x, w, b, geom } => {
                    let cg = conv2d_backward(geom, val(*x).data(), val(*w).data(), b.is_some(), &g);
                    send(*x, cg.x);
                    send(*w, cg.w);
                    if let (Some(b), Some(gb)) = (b, cg.bias) {
                        send(*b, gb);
                    }
                }
                Op::Gelu { x } => send(*x, gelu_backward(val(*x).data(), &g)),
                Op::LayerNorm { x, gamma, beta, stats } => {
                    let ng = layer_norm_backward(val(*x), val(*gamma), stats, &g);
                    send(*x, ng.x);
                    send(*gamma, ng.gamma);
                    send(*beta, ng.beta);
                }
                Op::GroupNorm { x, gamma, beta, groups, stats } => {
                    let ng = group_norm_backward(val(*x), *groups, val(*gamma), stats, &g);
                    send(*x, ng.x);
                    send(*gamma, ng.gamma);
                    send(*beta, ng.beta);
                }
                Op::Add { a, b } => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::Scale { x, factor } => send(*x, g.iter().map(|&v| v * *factor).collect()),
                Op::ScaleBy { x, s } => {
                    let f = val(*s).data()[0];
                    let ds: f64 = val(*x).data().iter().zip(&g).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
                    send(*x, g.iter().map(|&v| v * f).collect());
                    send(*s, vec![T::from_f64(ds)]);
                }
                Op::L1 { pred, target } => {
                    let gp = l1_backward(val(*pred).data(), val(*target).data(), g[0]);
                    send(*target, gp.iter().map(|&v| -v).collect());
                    send(*pred, gp);
                }
                Op::Sum { x } => send(*x, vec![g[0]; val(*x).numel()]),
                Op::Dot { x, weights } => send(*x, weights.data().iter().map(|&w| w * g[0]).collect()),
                Op::PixelShuffle { x, r } => {
                    let gy = Tensor::new(node.value.shape().to_vec(), g)?;
                    send(*x, pixel_unshuffle(&gy, *r)?.into_data());
                }
                Op::PixelUnshuffle { x, r } => {
                    let gy = Tensor::new(node.value.shape().to_vec(), g)?;
                    send(*x, pixel_shuffle(&gy, *r)?.into_data());
                }
                Op::Concat { parts } => {
                    let [n, ctot, h, w] = node.value.dims4("concat_channels")?;
                    let hw = h * w;
                    let mut offset = 0;
                    for &p in parts {
                        let pc = val(p).shape()[1];
                        let mut gp = Vec::with_capacity(n * pc * hw);
                        for ni in 0..n {
                            let start = (ni * ctot + offset) * hw;
                            gp.extend_from_slice(&g[start..start + pc * hw]);
                        }
                        send(p, gp);
                        offset += pc;
                    }
                }
                Op::LineAttention { q, k, v, h } => {
                    let ag = line_attention_backward(val(*q), val(*k), val(*v), *h, &g);
                    send(*q, ag.q);
                    send(*k, ag.k);
                    send(*v, ag.v);
                }
                Op::L2Normalize { x, eps, norms } => {
                    let [_, _, h, w] = val(*x).dims4("l2_normalize_planes")?;
                    send(*x, l2_normalize_backward(val(*x).data(), norms, *eps, h * w, &g));
                }
                Op::ChannelGram { q, k } => {
                    let (gq, gk) = channel_gram_backward(val(*q), val(*k), &g);
                    send(*q, gq);
                    send(*k, gk);
                }
                Op::Softmax { y_len, x } => send(*x, softmax_last_backward(node.value.data(), *y_len, &g)),
                Op::ChannelMix { a, v } => {
                    let (ga, gv) = channel_mix_backward(val(*a), val(*v), &g);
                    send(*a, ga);
                    send(*v, gv);
                }
            }
        }

        for (i, g) in grads.into_iter().enumerate() {
            let node = &mut self.nodes[i];
            if let (Some(g), true, Op::Leaf) = (g, node.requires_grad, &node.op) {
                accumulate(&mut node.grad, g);
            }
        }
        Ok(())
    }
}

/// Central-difference gradient of a scalar function.
pub fn finite_diff_grad(mut f: impl FnMut(&Tensor<f64>) -> f64, x: &Tensor<f64>, step: f64) -> Tensor<f64> {
    let mut probe = x.clone();
    let mut grad = Vec::with_capacity(x.numel());
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let up = f(&probe);
        probe.data_mut()[i] = orig - step;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        grad.push((up - down) / (2.0 * step));
    }
    Tensor::new(x.shape().to_vec(), grad).expect("same shape as x")
}

/// Outcome of comparing analytic and numerical gradients for one input.
#[derive(Clone, Debug)]
pub struct GradCheck {
    pub input: usize,
    pub entries_checked: usize,
    /// `max|analytic − numeric| / max(max|analytic|, max|numeric|)` over the
    /// checked entries.
    pub rel_err: f64,
}

/// Compares `backward` against central differences for every input of
/// `build`, which maps leaf vars to a scalar loss on the given tape.
///
/// With `max_entries`, only that many evenly spaced entries per input are
/// probed numerically.
pub fn check_gradients<F>(
    inputs: &[Tensor<f64>],
    build: F,
    step: f64,
    max_entries: Option<usize>,
) -> Result<Vec<GradCheck>>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let loss = build(&mut tape, &vars)?;
    tape.backward(loss)?;

    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::inference();
        let vars: Vec<Var> = values.iter().map(|t| tape.constant(t.clone())).collect();
        let loss = build(&mut tape, &vars)?;
        Ok(tape.value(loss).data()[0])
    };

    let mut reports = Vec::with_capacity(inputs.len());
    let mut probe: Vec<Tensor<f64>> = inputs.to_vec();
    for (idx, var) in vars.iter().enumerate() {
        let numel = inputs[idx].numel();
        let analytic = tape.grad(*var).map(|g| g.into_data()).unwrap_or_else(|| vec![0.0; numel]);
        let entries: Vec<usize> = match max_entries {
            Some(m) if m < numel => (0..m).map(|j| j * numel / m).collect(),
            _ => (0..numel).collect(),
        };
        let (mut worst, mut scale) = (0.0f64, 0.0f64);
        for &e in &entries {
            let orig = probe[idx].data()[e];
            probe[idx].data_mut()[e] = orig + step;
            let up = eval(&probe)?;
            probe[idx].data_mut()[e] = orig - step;
            let down = eval(&probe)?;
            probe[idx].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * step);
            worst = worst.max((numeric - analytic[e]).abs());
            scale = scale.max(numeric.abs()).max(analytic[e].abs());
        }
        reports.push(GradCheck {
            input: idx,
            entries_checked: entries.len(),
            rel_err: if scale > 1e-12 { worst / scale } else { worst },
        });
    }
    Ok(reports)
}

pub fn worst_rel_err(reports: &[GradCheck]) -> f64 {
    reports.iter().map(|r| r.rel_err).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_gives_ones() {
        let mut tape = Tape::<f32>::new();
        let x = tape.leaf(Tensor::full(vec![2, 3], 0.3), true);
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert!(tape.grad(x).unwrap().data().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn l1_against_zero_gives_inverse_numel() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::full(vec![4, 5], 0.5), true);
        let z = tape.constant(Tensor::zeros(vec![4, 5]));
        let l = tape.l1_loss(x, z).unwrap();
        tape.backward(l).unwrap();
        assert!(tape.grad(x).unwrap().data().iter().all(|&g| g == 1.0 / 20.0));
    }

    #[test]
    fn non_scalar_root_is_usage_error() {
        let mut tape = Tape::<f32>::new();
        let x = tape.leaf(Tensor::ones(vec![2]), true);
        assert!(matches!(tape.backward(x), Err(Error::Usage(_))));
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::full(vec![3], 2.0), true);
        let y = tape.scale(x, 3.0);
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[6.0, 6.0, 6.0]);
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::full(vec![3], 2.0), true);
        let d = tape.detach(x);
        let s = tape.sum(d);
        tape.backward(s).unwrap();
        assert!(tape.grad(x).is_none());
    }

    #[test]
    fn finite_difference_closed_forms() {
        let x = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let g = finite_diff_grad(|t| t.data().iter().map(|v| v * v).sum(), &x, 1e-5);
        for (a, b) in g.data().iter().zip([2.0, 4.0, 6.0]) {
            assert!((a - b).abs() < 1e-6);
        }
        let x = Tensor::new(vec![2], vec![2.0, -3.0]).unwrap();
        let g = finite_diff_grad(|t| t.data().iter().map(|v| v.abs()).sum::<f64>() / 2.0, &x, 1e-5);
        assert!((g.data()[0] - 0.5).abs() < 1e-9 && (g.data()[1] + 0.5).abs() < 1e-9);
    }

    #[test]
    fn elementwise_ops_pass_gradcheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = Tensor::<f64>::randn(vec![1, 8, 2, 3], &mut rng);
        let y = Tensor::<f64>::randn(vec![1, 8, 2, 3], &mut rng);
        let s = Tensor::<f64>::full(vec![1], 0.7);
        let w = Tensor::<f64>::randn(vec![1, 2, 4, 6], &mut rng);
        let reports = check_gradients(
            &[x, y, s],
            |t, v| {
                let a = t.gelu(v[0]);
                let b = t.add(a, v[1])?;
                let c = t.scale_by(b, v[2])?;
                let d = t.pixel_shuffle(c, 2)?;
                t.dot(d, w.clone())
            },
            1e-5,
            None,
        )
        .unwrap();
        assert!(worst_rel_err(&reports) < 1e-6, "{reports:?}");
    }
}
