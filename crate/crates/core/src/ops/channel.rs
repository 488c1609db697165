//! Primitives of channel-to-channel ("transposed") attention: every channel
//! plane is treated as one token of length H·W, so the attention matrix is
//! C×C regardless of the image size.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Divides every (n, c) plane by `max(‖plane‖₂, eps)`.
pub fn l2_normalize_planes<T: Element>(x: &Tensor<T>, eps: f64) -> Result<Tensor<T>> {
    Ok(l2_normalize_forward(x, eps)?.0)
}

pub(crate) fn l2_normalize_forward<T: Element>(x: &Tensor<T>, eps: f64) -> Result<(Tensor<T>, Vec<f64>)> {
    let [n, c, h, w] = x.dims4("l2_normalize_planes")?;
    let hw = h * w;
    let mut norms = Vec::with_capacity(n * c);
    let mut out = Vec::with_capacity(x.numel());
    for plane in x.data().chunks(hw) {
        let norm = plane.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();
        let denom = norm.max(eps);
        out.extend(plane.iter().map(|v| T::from_f64(v.as_f64() / denom)));
        norms.push(norm);
    }
    Ok((Tensor::new(vec![n, c, h, w], out)?, norms))
}

pub(crate) fn l2_normalize_backward<T: Element>(x: &[T], norms: &[f64], eps: f64, hw: usize, gy: &[T]) -> Vec<T> {
    let mut gx = Vec::with_capacity(x.len());
    for ((plane, gplane), &norm) in x.chunks(hw).zip(gy.chunks(hw)).zip(norms) {
        if norm > eps {
            let dot: f64 = plane.iter().zip(gplane).map(|(a, g)| a.as_f64() * g.as_f64()).sum();
            let inv3 = 1.0 / (norm * norm * norm);
            gx.extend(plane.iter().zip(gplane).map(|(a, g)| T::from_f64(g.as_f64() / norm - a.as_f64() * dot * inv3)));
        } else {
            gx.extend(gplane.iter().map(|g| T::from_f64(g.as_f64() / eps)));
        }
    }
    gx
}

/// `S[n, i, j] = Σ_p q[n, i, p] · k[n, j, p]` over all pixels p.
pub fn channel_gram<T: Element>(q: &Tensor<T>, k: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = q.dims4("channel_gram")?;
    if k.shape() != q.shape() {
        return Err(Error::dim("channel_gram", format!("q {:?} and k {:?} differ", q.shape(), k.shape())));
    }
    let hw = h * w;
    let (qd, kd) = (q.data(), k.data());
    let mut out = vec![T::zero(); n * c * c];
    for ni in 0..n {
        for i in 0..c {
            let qi = &qd[(ni * c + i) * hw..][..hw];
            for j in 0..c {
                let kj = &kd[(ni * c + j) * hw..][..hw];
                let s: f64 = qi.iter().zip(kj).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
                out[(ni * c + i) * c + j] = T::from_f64(s);
            }
        }
    }
    Tensor::new(vec![n, c, c], out)
}

pub(crate) fn channel_gram_backward<T: Element>(q: &Tensor<T>, k: &Tensor<T>, gs: &[T]) -> (Vec<T>, Vec<T>) {
    let [n, c, h, w] = q.dims4("channel_gram").expect("validated in forward");
    let hw = h * w;
    let (qd, kd) = (q.data(), k.data());
    let mut gq = vec![0.0f64; qd.len()];
    let mut gk = vec![0.0f64; kd.len()];
    for ni in 0..n {
        for i in 0..c {
            for j in 0..c {
                let g = gs[(ni * c + i) * c + j].as_f64();
                let (qo, ko) = ((ni * c + i) * hw, (ni * c + j) * hw);
                for p in 0..hw {
                    gq[qo + p] += g * kd[ko + p].as_f64();
                    gk[ko + p] += g * qd[qo + p].as_f64();
                }
            }
        }
    }
    (gq.into_iter().map(T::from_f64).collect(), gk.into_iter().map(T::from_f64).collect())
}

/// Softmax over the last axis.
pub fn softmax_last<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let len = *x.shape().last().ok_or_else(|| Error::dim("softmax_last", "rank-0 input has no last axis"))?;
    let mut out = Vec::with_capacity(x.numel());
    for row in x.data().chunks(len) {
        let m = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v.as_f64() - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| T::from_f64(e / z)));
    }
    Tensor::new(x.shape().to_vec(), out)
}

pub(crate) fn softmax_last_backward<T: Element>(y: &[T], len: usize, gy: &[T]) -> Vec<T> {
    let mut gx = Vec::with_capacity(y.len());
    for (row, grow) in y.chunks(len).zip(gy.chunks(len)) {
        let dot: f64 = row.iter().zip(grow).map(|(a, g)| a.as_f64() * g.as_f64()).sum();
        gx.extend(row.iter().zip(grow).map(|(a, g)| T::from_f64(a.as_f64() * (g.as_f64() - dot))));
    }
    gx
}

/// `out[n, i, p] = Σ_j a[n, i, j] · v[n, j, p]`.
pub fn channel_mix<T: Element>(a: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = v.dims4("channel_mix")?;
    if a.shape() != [n, c, c] {
        return Err(Error::dim("channel_mix", format!("attention {:?} must be [N={n}, C={c}, C={c}]", a.shape())));
    }
    let hw = h * w;
    let (ad, vd) = (a.data(), v.data());
    let mut out = vec![0.0f64; vd.len()];
    for ni in 0..n {
        for i in 0..c {
            let o = &mut out[(ni * c + i) * hw..][..hw];
            for j in 0..c {
                let aij = ad[(ni * c + i) * c + j].as_f64();
                let vj = &vd[(ni * c + j) * hw..][..hw];
                for (ov, vv) in o.iter_mut().zip(vj) {
                    *ov += aij * vv.as_f64();
                }
            }
        }
    }
    Tensor::new(vec![n, c, h, w], out.into_iter().map(T::from_f64).collect())
}

pub(crate) fn channel_mix_backward<T: Element>(a: &Tensor<T>, v: &Tensor<T>, gy: &[T]) -> (Vec<T>, Vec<T>) {
    let [n, c, h, w] = v.dims4("channel_mix").expect("validated in forward");
    let hw = h * w;
    let (ad, vd) = (a.data(), v.data());
    let mut ga = vec![0.0f64; ad.len()];
    let mut gv = vec![0.0f64; vd.len()];
    for ni in 0..n {
        for i in 0..c {
            let g = &gy[(ni * c + i) * hw..][..hw];
            for j in 0..c {
                let aij = ad[(ni * c + i) * c + j].as_f64();
                let vo = (ni * c + j) * hw;
                let mut acc = 0.0;
                for p in 0..hw {
                    let gp = g[p].as_f64();
                    acc += gp * vd[vo + p].as_f64();
                    gv[vo + p] += aij * gp;
                }
                ga[(ni * c + i) * c + j] += acc;
            }
        }
    }
    (ga.into_iter().map(T::from_f64).collect(), gv.into_iter().map(T::from_f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::<f64>::randn(vec![2, 5, 5], &mut rng).map(|v| v * 10.0);
        let y = softmax_last(&x).unwrap();
        for row in y.data().chunks(5) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_planes_have_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::<f64>::randn(vec![1, 3, 4, 4], &mut rng);
        let y = l2_normalize_planes(&x, 1e-12).unwrap();
        for plane in y.data().chunks(16) {
            let n2: f64 = plane.iter().map(|v| v * v).sum();
            assert!((n2 - 1.0).abs() < 1e-12);
        }
    }
}
