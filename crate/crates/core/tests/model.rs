//! Network wiring, block shape laws and FLOPs accounting.

use fdanet::analysis::{count_flops, BlockFlops, FlopsReport};
use fdanet::autodiff::Tape;
use fdanet::lineformer::AttentionImpl;
use fdanet::model::{Branch, FdaKind, ForwardOptions, Model, ModelConfig};
use fdanet::nn::{ChannelAttention, CidBlock, Downsample, ParamStore, QkvProjection, Upsample};
use fdanet::{Error, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn blocks_keep_their_shape_laws() {
    for c in [2, 4, 8] {
        for h in [4, 6, 8] {
            for w in [4, 6, 8] {
                let mut store = ParamStore::<f32>::new(c as u64);
                let cid = CidBlock::new(&mut store, "cid", c, 2);
                let down = Downsample::new(&mut store, "down", c);
                let up = Upsample::new(&mut store, "up", c).unwrap();
                let qkv = QkvProjection::new(&mut store, "qkv", c);
                let ca = ChannelAttention::new(&mut store, "ca", c);

                let mut tape = Tape::inference();
                let p = store.bind(&mut tape);
                let x = tape.constant(Tensor::full(vec![1, c, h, w], 0.3));
                let shape = |tape: &Tape<f32>, v| tape.value(v).shape().to_vec();

                let y = cid.forward(&mut tape, &p, x).unwrap();
                assert_eq!(shape(&tape, y), [1, c, h, w]);
                let y = down.forward(&mut tape, &p, x).unwrap();
                assert_eq!(shape(&tape, y), [1, 2 * c, h / 2, w / 2]);
                let y = up.forward(&mut tape, &p, x).unwrap();
                assert_eq!(shape(&tape, y), [1, c / 2, 2 * h, 2 * w]);
                for v in qkv.forward(&mut tape, &p, x).unwrap() {
                    assert_eq!(shape(&tape, v), [1, c, h, w]);
                }
                let (attn, _) = ca.attention_map(&mut tape, &p, x).unwrap();
                assert_eq!(shape(&tape, attn), [1, c, c]);
                let y = ca.forward(&mut tape, &p, x).unwrap();
                assert_eq!(shape(&tape, y), [1, c, h, w]);
            }
        }
    }
}

#[test]
fn forward_is_deterministic_in_seed() {
    let x = Tensor::uniform(vec![1, 4, 16, 16], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(1));
    let a = Model::<f32>::build(ModelConfig::default(), 42).unwrap();
    let b = Model::<f32>::build(ModelConfig::default(), 42).unwrap();
    let c = Model::<f32>::build(ModelConfig::default(), 43).unwrap();
    let ya = a.infer(&x, AttentionImpl::Linear).unwrap();
    assert_eq!(ya, b.infer(&x, AttentionImpl::Linear).unwrap());
    assert_ne!(ya, c.infer(&x, AttentionImpl::Linear).unwrap());
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        ModelConfig { groupnorm_groups: 3, ..ModelConfig::default() },
        ModelConfig { window_heights: vec![4, 7, 7], ..ModelConfig::default() },
        ModelConfig { window_heights: vec![7, 7], ..ModelConfig::default() },
        ModelConfig { num_scales: 0, ..ModelConfig::default() },
    ];
    for cfg in bad {
        assert!(matches!(Model::<f32>::build(cfg, 0), Err(Error::Config(_))));
    }
}

#[test]
fn inference_never_runs_the_raw_decoder() {
    let model = Model::<f32>::build(ModelConfig::tiny(), 0).unwrap();
    let x = Tensor::full(vec![1, 4, 8, 8], 0.5);
    let (_, macs) = model.infer_counted(&x, AttentionImpl::Linear).unwrap();
    let report = count_flops(&model, &[1, 4, 8, 8], AttentionImpl::Linear).unwrap();
    assert_eq!(macs, report.infer_macs);
    let raw: u64 = report.blocks.iter().filter(|b| b.branch == Branch::RawDecoder).map(|b| b.macs).sum();
    assert_eq!(report.train_macs - macs, raw);
    assert!(report.blocks.iter().filter(|b| b.branch == Branch::RawDecoder).all(|b| !b.in_infer));
}

#[test]
fn fda_variants_swap_only_the_adaptation_blocks() {
    let shape = [1, 4, 32, 32];
    let base =
        count_flops(&Model::<f32>::build(ModelConfig::default(), 0).unwrap(), &shape, AttentionImpl::Linear).unwrap();
    for kind in FdaKind::ALL {
        let cfg = ModelConfig { fda_kind: kind, ..ModelConfig::default() };
        let r = count_flops(&Model::<f32>::build(cfg, 0).unwrap(), &shape, AttentionImpl::Linear).unwrap();
        assert_eq!(r.train_macs - r.fda_macs, base.train_macs - base.fda_macs);
        assert_eq!(r.params_total - r.fda_params, base.params_total - base.fda_params);
    }
}

#[test]
fn ablations_train_graph_forward_for_all_variants() {
    for use_fda in [true, false] {
        for use_raw_supervision in [true, false] {
            let cfg = ModelConfig { use_fda, use_raw_supervision, ..ModelConfig::tiny() };
            let model = Model::<f32>::build(cfg, 1).unwrap();
            let mut tape = Tape::new();
            let p = model.store.bind(&mut tape);
            let x = tape.constant(Tensor::full(vec![1, 4, 8, 8], 0.2));
            let out = model.forward_train(&mut tape, &p, x, ForwardOptions::default()).unwrap();
            assert_eq!(tape.value(out.y_rgb).shape(), [1, 3, 16, 16]);
            assert_eq!(tape.value(out.y_raw).shape(), [1, 4, 8, 8]);
        }
    }
}

fn block_strategy() -> impl Strategy<Value = Vec<BlockFlops>> {
    let branch = prop::sample::select(vec![Branch::Encoder, Branch::Fda, Branch::RgbDecoder, Branch::RawDecoder]);
    prop::collection::vec((branch, 0u64..1_000_000, 0usize..10_000), 1..20).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (branch, macs, params))| BlockFlops {
                name: format!("b{i}"),
                branch,
                macs,
                params,
                in_train: true,
                in_infer: branch.in_inference(),
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn report_totals_ignore_block_order(blocks in block_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = blocks.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = FlopsReport::from_blocks(vec![1, 4, 8, 8], AttentionImpl::Linear, blocks.clone());
        let b = FlopsReport::from_blocks(vec![1, 4, 8, 8], AttentionImpl::Linear, shuffled);
        prop_assert_eq!(a.train_macs, b.train_macs);
        prop_assert_eq!(a.infer_macs, b.infer_macs);
        prop_assert_eq!(a.params_total, b.params_total);
        prop_assert_eq!(a.train_macs, blocks.iter().map(|b| b.macs).sum::<u64>());
        prop_assert!(a.infer_macs <= a.train_macs);
    }

    #[test]
    fn disabling_fda_removes_exactly_its_blocks(
        scales in 1usize..=3,
        base in prop::sample::select(vec![4usize, 8]),
        h in prop::sample::select(vec![1usize, 3, 5]),
        kind in prop::sample::select(FdaKind::ALL.to_vec()),
        attention in prop::sample::select(AttentionImpl::ALL.to_vec()),
    ) {
        let cfg = ModelConfig {
            num_scales: scales,
            base_channels: base,
            cid_blocks_per_scale: 1,
            window_heights: vec![h; scales],
            groupnorm_groups: 2,
            fda_kind: kind,
            ..ModelConfig::default()
        };
        let shape = [1, 4, 16, 16];
        let with = count_flops(&Model::<f32>::build(cfg.clone(), 0).unwrap(), &shape, attention).unwrap();
        let off = ModelConfig { use_fda: false, ..cfg };
        let without = count_flops(&Model::<f32>::build(off, 0).unwrap(), &shape, attention).unwrap();
        prop_assert!(with.fda_macs > 0);
        prop_assert_eq!(with.train_macs - without.train_macs, with.fda_macs);
        prop_assert_eq!(with.infer_macs - without.infer_macs, with.fda_macs);
        prop_assert_eq!(with.params_total - without.params_total, with.fda_params);
        prop_assert_eq!(without.fda_params, 0);
    }
}
