//! Line-global, column-local attention without softmax.
//!
//! For a query pixel `i` on row `r` the output is
//!
//! ```text
//! out_i = Q_i · Σ_{j : row(j) ∈ Ω(r)} K_jᵀ V_j
//! ```
//!
//! where `Ω(r) = [r − (h−1)/2, r + (h−1)/2] ∩ [0, H)` and `j` ranges over every
//! column of those rows. Windows are truncated at the image borders, never
//! padded. Because the key/value sum only depends on the query's row, it
//! factors into per-row `C×C` aggregates `A_r = Σ_{j ∈ row r} K_jᵀ V_j`, and
//! all queries on one row share `M_r = Σ_{s ∈ Ω(r)} A_s`.
//!
//! Three executors are provided: [`line_attention_naive`] evaluates the pair
//! sum directly and serves as the reference, [`line_attention_linear`] slides
//! the aggregate window over the whole image, and
//! [`super::streaming::LineBufferState`] does the same with a bounded ring of
//! row aggregates while rows arrive one at a time. Linear and streaming apply
//! the identical sequence of f64 additions and subtractions to the window sum,
//! so their outputs agree bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionImpl {
    Naive,
    #[default]
    Linear,
    Streaming,
}

impl AttentionImpl {
    pub const ALL: [AttentionImpl; 3] = [AttentionImpl::Naive, AttentionImpl::Linear, AttentionImpl::Streaming];

    pub fn name(self) -> &'static str {
        match self {
            AttentionImpl::Naive => "naive",
            AttentionImpl::Linear => "linear",
            AttentionImpl::Streaming => "streaming",
        }
    }
}

impl std::str::FromStr for AttentionImpl {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(AttentionImpl::Naive),
            "linear" => Ok(AttentionImpl::Linear),
            "streaming" => Ok(AttentionImpl::Streaming),
            other => Err(Error::config(format!("unknown attention implementation `{other}`"))),
        }
    }
}

/// Row range `[lo, hi)` attended to by queries on `row`.
#[inline]
pub fn window_rows(row: usize, h: usize, height: usize) -> (usize, usize) {
    let half = (h - 1) / 2;
    (row.saturating_sub(half), (row + half + 1).min(height))
}

/// Smallest odd window that covers every row from every row.
pub fn full_height_window(height: usize) -> usize {
    2 * height - 1
}

pub(crate) fn check_window(h: usize) -> Result<()> {
    if h == 0 || h.is_multiple_of(2) {
        return Err(Error::config(format!("line attention window h={h} must be odd and positive")));
    }
    Ok(())
}

pub(crate) fn check_qkv<T: Element>(q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>, h: usize) -> Result<[usize; 4]> {
    check_window(h)?;
    let dims = q.dims4("line_attention")?;
    for (name, t) in [("K", k), ("V", v)] {
        if t.shape() != q.shape() {
            return Err(Error::dim(
                "line_attention",
                format!("{name} shape {:?} differs from Q shape {:?}", t.shape(), q.shape()),
            ));
        }
    }
    Ok(dims)
}

/// Direct pair sum `Σ_j (Q_i · K_j) V_j` over the window, accumulated in f64.
pub fn line_attention_naive<T: Element>(q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>, h: usize) -> Result<Tensor<T>> {
    let [n, c, height, width] = check_qkv(q, k, v, h)?;
    let (qd, kd, vd) = (q.data(), k.data(), v.data());
    let plane = height * width;
    let mut out = vec![T::zero(); qd.len()];
    let mut acc = vec![0.0f64; c];
    for ni in 0..n {
        let base = ni * c * plane;
        for r in 0..height {
            let (lo, hi) = window_rows(r, h, height);
            for x in 0..width {
                acc.iter_mut().for_each(|a| *a = 0.0);
                let qi = base + r * width + x;
                for s in lo..hi {
                    for xj in 0..width {
                        let j = base + s * width + xj;
                        let mut score = 0.0;
                        for a in 0..c {
                            score += qd[qi + a * plane].as_f64() * kd[j + a * plane].as_f64();
                        }
                        for (b, acc_b) in acc.iter_mut().enumerate() {
                            *acc_b += score * vd[j + b * plane].as_f64();
                        }
                    }
                }
                for (b, &acc_b) in acc.iter().enumerate() {
                    out[qi + b * plane] = T::from_f64(acc_b);
                }
            }
        }
    }
    Tensor::new(q.shape().to_vec(), out)
}

/// `A_r[a][b] = Σ_x K[a, r, x] · V[b, r, x]` for one row of one sample.
/// `k_row` and `v_row` are laid out channel-major (`[c][x]`).
pub(crate) fn row_aggregate_into<T: Element>(k_row: &[T], v_row: &[T], c: usize, width: usize, out: &mut [f64]) {
    for a in 0..c {
        let ka = &k_row[a * width..][..width];
        for b in 0..c {
            let vb = &v_row[b * width..][..width];
            let mut s = 0.0;
            for x in 0..width {
                s += ka[x].as_f64() * vb[x].as_f64();
            }
            out[a * c + b] = s;
        }
    }
}

/// `out[b][x] = Σ_a Q[a][x] · M[a][b]` for one row.
pub(crate) fn apply_row<T: Element>(q_row: &[T], m: &[f64], c: usize, width: usize, out: &mut [T]) {
    for b in 0..c {
        for x in 0..width {
            let mut s = 0.0;
            for a in 0..c {
                s += q_row[a * width + x].as_f64() * m[a * c + b];
            }
            out[b * width + x] = T::from_f64(s);
        }
    }
}

/// Copies row `r` of sample `n` into channel-major layout.
pub(crate) fn gather_row<T: Element>(t: &[T], n: usize, c: usize, height: usize, width: usize, r: usize) -> Vec<T> {
    let mut row = Vec::with_capacity(c * width);
    for ci in 0..c {
        let off = ((n * c + ci) * height + r) * width;
        row.extend_from_slice(&t[off..off + width]);
    }
    row
}

pub(crate) fn scatter_row<T: Element>(
    t: &mut [T],
    n: usize,
    c: usize,
    height: usize,
    width: usize,
    r: usize,
    row: &[T],
) {
    for ci in 0..c {
        let off = ((n * c + ci) * height + r) * width;
        t[off..off + width].copy_from_slice(&row[ci * width..(ci + 1) * width]);
    }
}

#[inline]
pub(crate) fn add_into(m: &mut [f64], a: &[f64]) {
    m.iter_mut().zip(a).for_each(|(m, a)| *m += a);
}

#[inline]
pub(crate) fn sub_from(m: &mut [f64], a: &[f64]) {
    m.iter_mut().zip(a).for_each(|(m, a)| *m -= a);
}

/// Whole-image executor: all row aggregates are formed first, then a window
/// sum slides down the image by adding the entering row and subtracting the
/// leaving one.
pub fn line_attention_linear<T: Element>(q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>, h: usize) -> Result<Tensor<T>> {
    let [n, c, height, width] = check_qkv(q, k, v, h)?;
    let half = (h - 1) / 2;
    let cc = c * c;
    let mut out = vec![T::zero(); q.numel()];
    let mut aggregates = vec![0.0f64; height * cc];
    let mut m = vec![0.0f64; cc];
    let mut out_row = vec![T::zero(); c * width];
    for ni in 0..n {
        for r in 0..height {
            let k_row = gather_row(k.data(), ni, c, height, width, r);
            let v_row = gather_row(v.data(), ni, c, height, width, r);
            row_aggregate_into(&k_row, &v_row, c, width, &mut aggregates[r * cc..(r + 1) * cc]);
        }
        m.iter_mut().for_each(|v| *v = 0.0);
        let mut oldest = 0usize;
        let mut next_in = 0usize;
        for r in 0..height {
            let last_needed = (r + half).min(height - 1);
            while next_in <= last_needed {
                while oldest + h < next_in + 1 {
                    sub_from(&mut m, &aggregates[oldest * cc..(oldest + 1) * cc]);
                    oldest += 1;
                }
                add_into(&mut m, &aggregates[next_in * cc..(next_in + 1) * cc]);
                next_in += 1;
            }
            while oldest + half < r {
                sub_from(&mut m, &aggregates[oldest * cc..(oldest + 1) * cc]);
                oldest += 1;
            }
            let q_row = gather_row(q.data(), ni, c, height, width, r);
            apply_row(&q_row, &m, c, width, &mut out_row);
            scatter_row(&mut out, ni, c, height, width, r, &out_row);
        }
    }
    Tensor::new(q.shape().to_vec(), out)
}

pub(crate) struct AttentionGrads<T> {
    pub q: Vec<T>,
    pub k: Vec<T>,
    pub v: Vec<T>,
}

/// Vector-Jacobian product shared by all executors.
///
/// With `G_r = Σ_{i ∈ row r} Q_iᵀ g_i`, the aggregate gradient is
/// `dA_s = Σ_{r : s ∈ Ω(r)} G_r`, which equals the window sum of `G` around
/// `s` because windows are symmetric.
pub(crate) fn line_attention_backward<T: Element>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    h: usize,
    gy: &[T],
) -> AttentionGrads<T> {
    let [n, c, height, width] = q.dims4("line_attention").expect("validated in forward");
    let cc = c * c;
    let plane = height * width;
    let (qd, kd, vd) = (q.data(), k.data(), v.data());
    let mut gq = vec![T::zero(); qd.len()];
    let mut gk = vec![T::zero(); kd.len()];
    let mut gv = vec![T::zero(); vd.len()];
    let mut agg = vec![0.0f64; height * cc];
    let mut outer = vec![0.0f64; height * cc];
    let mut m = vec![0.0f64; cc];
    let mut da = vec![0.0f64; cc];
    for ni in 0..n {
        let base = ni * c * plane;
        for r in 0..height {
            let k_row = gather_row(kd, ni, c, height, width, r);
            let v_row = gather_row(vd, ni, c, height, width, r);
            row_aggregate_into(&k_row, &v_row, c, width, &mut agg[r * cc..(r + 1) * cc]);
            let q_row = gather_row(qd, ni, c, height, width, r);
            let g_row = gather_row(gy, ni, c, height, width, r);
            row_aggregate_into(&q_row, &g_row, c, width, &mut outer[r * cc..(r + 1) * cc]);
        }
        for r in 0..height {
            let (lo, hi) = window_rows(r, h, height);
            m.iter_mut().for_each(|v| *v = 0.0);
            da.iter_mut().for_each(|v| *v = 0.0);
            for s in lo..hi {
                add_into(&mut m, &agg[s * cc..(s + 1) * cc]);
                add_into(&mut da, &outer[s * cc..(s + 1) * cc]);
            }
            for x in 0..width {
                let p = base + r * width + x;
                for a in 0..c {
                    let mut sq = 0.0;
                    let mut sk = 0.0;
                    for b in 0..c {
                        sq += gy[p + b * plane].as_f64() * m[a * c + b];
                        sk += da[a * c + b] * vd[p + b * plane].as_f64();
                    }
                    gq[p + a * plane] = T::from_f64(sq);
                    gk[p + a * plane] = T::from_f64(sk);
                }
                for b in 0..c {
                    let mut sv = 0.0;
                    for a in 0..c {
                        sv += kd[p + a * plane].as_f64() * da[a * c + b];
                    }
                    gv[p + b * plane] = T::from_f64(sv);
                }
            }
        }
    }
    AttentionGrads { q: gq, k: gk, v: gv }
}

/// Factorized cost: row aggregates (`H·W·C²`) plus applying the shared
/// window sum to every query (`H·W·C²`).
pub fn linear_attention_macs(n: usize, c: usize, height: usize, width: usize) -> u64 {
    2 * (n * height * width * c * c) as u64
}

/// Pair-sum cost: every query meets every pixel of its window at `2C` MACs.
pub fn naive_attention_macs(n: usize, c: usize, height: usize, width: usize, h: usize) -> u64 {
    let pairs: u64 = (0..height)
        .map(|r| {
            let (lo, hi) = window_rows(r, h, height);
            ((hi - lo) * width * width) as u64
        })
        .sum();
    n as u64 * pairs * 2 * c as u64
}

pub fn attention_macs(kind: AttentionImpl, n: usize, c: usize, height: usize, width: usize, h: usize) -> u64 {
    match kind {
        AttentionImpl::Naive => naive_attention_macs(n, c, height, width, h),
        AttentionImpl::Linear | AttentionImpl::Streaming => linear_attention_macs(n, c, height, width),
    }
}
