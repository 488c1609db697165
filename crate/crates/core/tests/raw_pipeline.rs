//! Raw pipeline properties: packing bijection, noise moments, ISP reference
//! values and dataset determinism.

use fdanet::raw::{
    add_low_light_noise, amplify, bayer_pack, bayer_unpack, simple_isp, BayerFrame, NoiseModel, SynthConfig,
};
use fdanet::Tensor;
use proptest::prelude::*;

/// Output of `scripts/isp_oracle.py` for the probe below.
const ISP_PROBE_EXPECTED: [[[f64; 4]; 4]; 3] = [
    [
        [0.381457379461, 0.546813255113, 0.681388426199, 0.695615618320],
        [0.699118242932, 0.595755652995, 0.489275739818, 0.512715313730],
        [0.872087120472, 0.593635517509, 0.000000000000, 0.000000000000],
        [0.844791599610, 0.542099235149, 0.000000000000, 0.000000000000],
    ],
    [
        [0.663086926046, 0.682288068140, 0.698244563111, 0.695615618320],
        [0.568568406964, 0.634438751122, 0.683634868215, 0.674139349213],
        [0.308080500126, 0.517125601037, 0.648952561675, 0.643194185586],
        [0.000000000000, 0.440870341550, 0.628520313609, 0.634438751122],
    ],
    [
        [0.556097860844, 0.538531178270, 0.397315996712, 0.186978173492],
        [0.573022614012, 0.556097860844, 0.426153843648, 0.256225724166],
        [0.890599797502, 0.875760633790, 0.733872258500, 0.573022614012],
        [1.000000000000, 1.000000000000, 0.922556765463, 0.737976730445],
    ],
];

#[test]
fn isp_matches_scripted_oracle() {
    let planes =
        [[0.10, 0.20, 0.30, 0.05], [0.40, 0.35, 0.25, 0.15], [0.30, 0.45, 0.20, 0.50], [0.20, 0.10, 0.60, 0.30]];
    let packed = Tensor::new(vec![4, 2, 2], planes.concat()).unwrap();
    let out = simple_isp(&packed).unwrap();
    for (c, plane) in ISP_PROBE_EXPECTED.iter().enumerate() {
        for (y, row) in plane.iter().enumerate() {
            for (x, &expected) in row.iter().enumerate() {
                let got = out.data()[(c * 4 + y) * 4 + x] as f64;
                assert!((got - expected).abs() < 1e-6, "({c},{y},{x}): {got} vs {expected}");
            }
        }
    }
}

fn flat_patch_moments(level: f32, dim: f32, nm: NoiseModel) -> (f64, f64) {
    let clean = BayerFrame::new(100, 100, vec![level; 10_000]).unwrap();
    let noisy = add_low_light_noise(&clean, &nm, dim).unwrap();
    let n = noisy.data().len() as f64;
    let mean = noisy.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = noisy.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn noise_moments_on_flat_patches() {
    for (level, dim, k, sigma) in [(0.5, 0.01, 2000.0, 2e-4), (0.8, 0.1, 500.0, 1e-3), (0.2, 1.0, 100.0, 0.0)] {
        let nm = NoiseModel { k, sigma_r: sigma, seed: 3 };
        let (mean, var) = flat_patch_moments(level, dim, nm);
        let expected_mean = level as f64 * dim as f64;
        let expected_var = expected_mean / k + sigma * sigma;
        assert!((mean - expected_mean).abs() / expected_mean < 0.1, "mean {mean} vs {expected_mean}");
        assert!((var - expected_var).abs() / expected_var < 0.1, "var {var} vs {expected_var}");
    }
}

#[test]
fn amplification_restores_the_dimmed_mean() {
    let clean = fdanet::raw::synth_scene(2, 64, 64).unwrap();
    let clean_mean = clean.data().iter().map(|&v| v as f64).sum::<f64>() / 4096.0;
    let nm = NoiseModel { seed: 4, ..NoiseModel::default() };
    let ratio = 100.0;
    let packed = bayer_pack(&add_low_light_noise(&clean, &nm, 1.0 / ratio).unwrap());
    let dim_mean = packed.sum_f64() / packed.numel() as f64;
    assert!((dim_mean * ratio as f64 - clean_mean).abs() / clean_mean < 0.05);
    let amplified = amplify(&packed, ratio).unwrap();
    let amp_mean = amplified.sum_f64() / amplified.numel() as f64;
    assert!((amp_mean - clean_mean).abs() / clean_mean < 0.05, "{amp_mean} vs {clean_mean}");
}

#[test]
fn synthetic_set_is_deterministic() {
    let cfg = SynthConfig { count: 4, height: 32, width: 32, seed: 1, ..SynthConfig::default() };
    assert_eq!(cfg.generate().unwrap(), cfg.generate().unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pack_unpack_is_a_bijection(th in 1usize..9, tw in 1usize..9, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..4 * th * tw).map(|_| rng.random()).collect();
        let frame = BayerFrame::new(2 * th, 2 * tw, data).unwrap();
        let packed = bayer_pack(&frame);
        prop_assert_eq!(packed.shape(), &[4, th, tw]);
        prop_assert_eq!(bayer_unpack(&packed).unwrap(), frame);
        prop_assert_eq!(bayer_pack(&bayer_unpack(&packed).unwrap()), packed);
    }
}
