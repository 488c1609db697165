//! Layer and group normalization for NCHW tensors.
//!
//! Statistics are accumulated in f64 and use the biased variance.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Per-set statistics kept for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct NormStats {
    pub mean: Vec<f64>,
    pub rstd: Vec<f64>,
}

fn check_affine<T: Element>(op: &'static str, c: usize, gamma: &Tensor<T>, beta: &Tensor<T>) -> Result<()> {
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::dim(
            op,
            format!("affine parameters must be [C={c}], got gamma {:?} beta {:?}", gamma.shape(), beta.shape()),
        ));
    }
    Ok(())
}

/// Normalizes over the channel axis independently at every (n, y, x).
pub fn layer_norm<T: Element>(x: &Tensor<T>, gamma: &Tensor<T>, beta: &Tensor<T>, eps: f64) -> Result<Tensor<T>> {
    Ok(layer_norm_forward(x, gamma, beta, eps)?.0)
}

pub(crate) fn layer_norm_forward<T: Element>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: f64,
) -> Result<(Tensor<T>, NormStats)> {
    let [n, c, h, w] = x.dims4("layer_norm")?;
    check_affine("layer_norm", c, gamma, beta)?;
    if !(eps > 0.0) {
        return Err(Error::config("layer_norm eps must be positive"));
    }
    let hw = h * w;
    let xd = x.data();
    let (g, b) = (gamma.data(), beta.data());
    let mut out = vec![T::zero(); xd.len()];
    let mut stats = NormStats { mean: vec![0.0; n * hw], rstd: vec![0.0; n * hw] };
    for ni in 0..n {
        let base = ni * c * hw;
        for p in 0..hw {
            let mut sum = 0.0;
            for ci in 0..c {
                sum += xd[base + ci * hw + p].as_f64();
            }
            let mean = sum / c as f64;
            let mut var = 0.0;
            for ci in 0..c {
                let d = xd[base + ci * hw + p].as_f64() - mean;
                var += d * d;
            }
            let rstd = 1.0 / (var / c as f64 + eps).sqrt();
            for ci in 0..c {
                let i = base + ci * hw + p;
                let xhat = (xd[i].as_f64() - mean) * rstd;
                out[i] = T::from_f64(xhat * g[ci].as_f64() + b[ci].as_f64());
            }
            stats.mean[ni * hw + p] = mean;
            stats.rstd[ni * hw + p] = rstd;
        }
    }
    Ok((Tensor::new(x.shape().to_vec(), out)?, stats))
}

pub(crate) struct AffineNormGrads<T> {
    pub x: Vec<T>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

pub(crate) fn layer_norm_backward<T: Element>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    stats: &NormStats,
    gy: &[T],
) -> AffineNormGrads<T> {
    let [n, c, h, w] = x.dims4("layer_norm").expect("validated in forward");
    let hw = h * w;
    let xd = x.data();
    let g = gamma.data();
    let mut gx = vec![T::zero(); xd.len()];
    let mut gg = vec![0.0f64; c];
    let mut gb = vec![0.0f64; c];
    let mut xhat = vec![0.0f64; c];
    let mut dxhat = vec![0.0f64; c];
    for ni in 0..n {
        let base = ni * c * hw;
        for p in 0..hw {
            let (mean, rstd) = (stats.mean[ni * hw + p], stats.rstd[ni * hw + p]);
            let (mut m1, mut m2) = (0.0, 0.0);
            for ci in 0..c {
                let i = base + ci * hw + p;
                let dy = gy[i].as_f64();
                xhat[ci] = (xd[i].as_f64() - mean) * rstd;
                dxhat[ci] = dy * g[ci].as_f64();
                gg[ci] += dy * xhat[ci];
                gb[ci] += dy;
                m1 += dxhat[ci];
                m2 += dxhat[ci] * xhat[ci];
            }
            m1 /= c as f64;
            m2 /= c as f64;
            for ci in 0..c {
                gx[base + ci * hw + p] = T::from_f64(rstd * (dxhat[ci] - m1 - xhat[ci] * m2));
            }
        }
    }
    AffineNormGrads {
        x: gx,
        gamma: gg.into_iter().map(T::from_f64).collect(),
        beta: gb.into_iter().map(T::from_f64).collect(),
    }
}

fn check_groups(c: usize, num_groups: usize) -> Result<usize> {
    if num_groups == 0 || !c.is_multiple_of(num_groups) {
        return Err(Error::config(format!("group_norm: {num_groups} groups do not divide {c} channels")));
    }
    Ok(c / num_groups)
}

/// Normalizes each (sample, channel group) over its channels and all pixels,
/// then applies a per-channel affine transform.
pub fn group_norm<T: Element>(
    x: &Tensor<T>,
    num_groups: usize,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    Ok(group_norm_forward(x, num_groups, gamma, beta, eps)?.0)
}

pub(crate) fn group_norm_forward<T: Element>(
    x: &Tensor<T>,
    num_groups: usize,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: f64,
) -> Result<(Tensor<T>, NormStats)> {
    let [n, c, h, w] = x.dims4("group_norm")?;
    let cpg = check_groups(c, num_groups)?;
    check_affine("group_norm", c, gamma, beta)?;
    if !(eps > 0.0) {
        return Err(Error::config("group_norm eps must be positive"));
    }
    let span = cpg * h * w;
    let hw = h * w;
    let xd = x.data();
    let mut out = vec![T::zero(); xd.len()];
    let mut stats = NormStats { mean: vec![0.0; n * num_groups], rstd: vec![0.0; n * num_groups] };
    for ni in 0..n {
        for gi in 0..num_groups {
            let start = (ni * c + gi * cpg) * hw;
            let chunk = &xd[start..start + span];
            let mean = chunk.iter().map(|v| v.as_f64()).sum::<f64>() / span as f64;
            let var = chunk
                .iter()
                .map(|v| {
                    let d = v.as_f64() - mean;
                    d * d
                })
                .sum::<f64>()
                / span as f64;
            let rstd = 1.0 / (var + eps).sqrt();
            for cl in 0..cpg {
                let ci = gi * cpg + cl;
                let (ga, be) = (gamma.data()[ci].as_f64(), beta.data()[ci].as_f64());
                for p in 0..hw {
                    let i = start + cl * hw + p;
                    out[i] = T::from_f64((xd[i].as_f64() - mean) * rstd * ga + be);
                }
            }
            stats.mean[ni * num_groups + gi] = mean;
            stats.rstd[ni * num_groups + gi] = rstd;
        }
    }
    Ok((Tensor::new(x.shape().to_vec(), out)?, stats))
}

pub(crate) fn group_norm_backward<T: Element>(
    x: &Tensor<T>,
    num_groups: usize,
    gamma: &Tensor<T>,
    stats: &NormStats,
    gy: &[T],
) -> AffineNormGrads<T> {
    let [n, c, h, w] = x.dims4("group_norm").expect("validated in forward");
    let cpg = c / num_groups;
    let hw = h * w;
    let span = cpg * hw;
    let xd = x.data();
    let mut gx = vec![T::zero(); xd.len()];
    let mut gg = vec![0.0f64; c];
    let mut gb = vec![0.0f64; c];
    for ni in 0..n {
        for gi in 0..num_groups {
            let start = (ni * c + gi * cpg) * hw;
            let (mean, rstd) = (stats.mean[ni * num_groups + gi], stats.rstd[ni * num_groups + gi]);
            let (mut m1, mut m2) = (0.0, 0.0);
            for cl in 0..cpg {
                let ci = gi * cpg + cl;
                let ga = gamma.data()[ci].as_f64();
                for p in 0..hw {
                    let i = start + cl * hw + p;
                    let dy = gy[i].as_f64();
                    let xhat = (xd[i].as_f64() - mean) * rstd;
                    gg[ci] += dy * xhat;
                    gb[ci] += dy;
                    m1 += dy * ga;
                    m2 += dy * ga * xhat;
                }
            }
            m1 /= span as f64;
            m2 /= span as f64;
            for cl in 0..cpg {
                let ci = gi * cpg + cl;
                let ga = gamma.data()[ci].as_f64();
                for p in 0..hw {
                    let i = start + cl * hw + p;
                    let xhat = (xd[i].as_f64() - mean) * rstd;
                    gx[i] = T::from_f64(rstd * (gy[i].as_f64() * ga - m1 - xhat * m2));
                }
            }
        }
    }
    AffineNormGrads {
        x: gx,
        gamma: gg.into_iter().map(T::from_f64).collect(),
        beta: gb.into_iter().map(T::from_f64).collect(),
    }
}

/// MAC convention for normalization layers: one pass for the statistics and
/// one for the affine output, i.e. two per element.
pub fn norm_macs(numel: usize) -> u64 {
    2 * numel as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn affine(c: usize, g: f64, b: f64) -> (Tensor<f64>, Tensor<f64>) {
        (Tensor::full(vec![c], g), Tensor::full(vec![c], b))
    }

    #[test]
    fn layer_norm_of_constant_is_zero() {
        let x = Tensor::<f64>::full(vec![1, 3, 2, 2], 4.5);
        let (g, b) = affine(3, 1.0, 0.0);
        let y = layer_norm(&x, &g, &b, 1e-5).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_gamma_gives_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::<f64>::randn(vec![2, 4, 3, 3], &mut rng);
        let (g, b) = affine(4, 0.0, 0.75);
        let y = layer_norm(&x, &g, &b, 1e-5).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.75));
        let y = group_norm(&x, 2, &g, &b, 1e-5).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn layer_norm_moments_per_location() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::<f64>::randn(vec![2, 8, 4, 5], &mut rng);
        let (g, b) = affine(8, 1.0, 0.0);
        let y = layer_norm(&x, &g, &b, 1e-5).unwrap();
        for n in 0..2 {
            for py in 0..4 {
                for px in 0..5 {
                    let vals: Vec<f64> = (0..8).map(|c| y.at4(n, c, py, px)).collect();
                    let mean = vals.iter().sum::<f64>() / 8.0;
                    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
                    assert!(mean.abs() < 1e-6);
                    assert!((var - 1.0).abs() < 1e-4, "var {var}");
                }
            }
        }
    }

    #[test]
    fn group_norm_degenerate_groupings() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Tensor::<f64>::randn(vec![2, 4, 3, 3], &mut rng);
        let (g, b) = affine(4, 1.0, 0.0);
        // One group: whole-sample statistics.
        let y = group_norm(&x, 1, &g, &b, 1e-5).unwrap();
        for n in 0..2 {
            let s = &x.data()[n * 36..(n + 1) * 36];
            let mean = s.iter().sum::<f64>() / 36.0;
            let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 36.0;
            for i in 0..36 {
                let want = (s[i] - mean) / (var + 1e-5).sqrt();
                assert!((y.data()[n * 36 + i] - want).abs() < 1e-12);
            }
        }
        // C groups: per-channel spatial statistics.
        let y = group_norm(&x, 4, &g, &b, 1e-5).unwrap();
        for plane in 0..8 {
            let s = &x.data()[plane * 9..(plane + 1) * 9];
            let mean = s.iter().sum::<f64>() / 9.0;
            let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0;
            for i in 0..9 {
                let want = (s[i] - mean) / (var + 1e-5).sqrt();
                assert!((y.data()[plane * 9 + i] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn group_norm_rejects_indivisible_groups() {
        let x = Tensor::<f32>::ones(vec![1, 6, 2, 2]);
        let g = Tensor::<f32>::ones(vec![6]);
        assert!(matches!(group_norm(&x, 4, &g, &g, 1e-5), Err(Error::Config(_))));
    }
}
