//! Poisson-Gaussian low-light noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raw::bayer::BayerFrame;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Photon scale: a normalized value of 1 corresponds to `k` photons.
    pub k: f64,
    /// Read noise standard deviation in normalized units.
    pub sigma_r: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { k: 2000.0, sigma_r: 2e-4, seed: 0 }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::config(format!("noise k must be positive, got {}", self.k)));
        }
        if !(self.sigma_r >= 0.0 && self.sigma_r.is_finite()) {
            return Err(Error::config(format!("noise sigma_r must be non-negative, got {}", self.sigma_r)));
        }
        Ok(())
    }
}

/// `Poisson(clean · dim_factor · k) / k + N(0, σ_r²)` per pixel.
pub fn add_low_light_noise(clean: &BayerFrame, nm: &NoiseModel, dim_factor: f32) -> Result<BayerFrame> {
    nm.validate()?;
    if !(dim_factor > 0.0 && dim_factor <= 1.0) {
        return Err(Error::config(format!("dim factor must be in (0, 1], got {dim_factor}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(nm.seed);
    let read = Normal::new(0.0, nm.sigma_r).expect("sigma validated");
    let data = clean
        .data()
        .iter()
        .map(|&v| {
            let lambda = v as f64 * dim_factor as f64 * nm.k;
            let shot =
                if lambda > 0.0 { Poisson::new(lambda).expect("positive rate").sample(&mut rng) / nm.k } else { 0.0 };
            (shot + read.sample(&mut rng)) as f32
        })
        .collect();
    let mut frame = BayerFrame::new(clean.height(), clean.width(), data)?;
    frame.black_level = clean.black_level;
    frame.white_level = clean.white_level;
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_k_without_read_noise_is_dimmed_clean() {
        let clean = BayerFrame::new(4, 4, (0..16).map(|i| i as f32 / 16.0).collect()).unwrap();
        let nm = NoiseModel { k: 1e9, sigma_r: 0.0, seed: 1 };
        let noisy = add_low_light_noise(&clean, &nm, 0.5).unwrap();
        for (n, c) in noisy.data().iter().zip(clean.data()) {
            assert!((n - 0.5 * c).abs() < 1e-4);
        }
    }

    #[test]
    fn reproducible_per_seed() {
        let clean = BayerFrame::new(8, 8, vec![0.3; 64]).unwrap();
        let nm = NoiseModel::default();
        let a = add_low_light_noise(&clean, &nm, 0.01).unwrap();
        assert_eq!(a, add_low_light_noise(&clean, &nm, 0.01).unwrap());
        let other = NoiseModel { seed: 1, ..nm };
        assert_ne!(a, add_low_light_noise(&clean, &other, 0.01).unwrap());
    }

    #[test]
    fn rejects_bad_parameters() {
        let clean = BayerFrame::new(2, 2, vec![0.3; 4]).unwrap();
        assert!(add_low_light_noise(&clean, &NoiseModel::default(), 0.0).is_err());
        assert!(add_low_light_noise(&clean, &NoiseModel::default(), 1.5).is_err());
        let nm = NoiseModel { k: 0.0, ..NoiseModel::default() };
        assert!(add_low_light_noise(&clean, &nm, 0.5).is_err());
    }
}
