//! Self-checks behind `fdanet check`.
//!
//! Each check prints one line with the quantity it measured and the bound it
//! was held to. The quick level runs in a few seconds; the full level adds
//! the end-to-end f64 network gradient check and the timing-based
//! complexity fits.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::bench::{bench_scaling, pixel_slope, streaming_state_sweep, Window};
use crate::analysis::flops::count_flops;
use crate::autodiff::{check_gradients, worst_rel_err, Tape, Var};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::lineformer::attention::{line_attention_linear, line_attention_naive, AttentionImpl};
use crate::lineformer::fda::LineAttentionParams;
use crate::lineformer::streaming::{line_attention_streaming, LineBufferState};
use crate::model::{FdaKind, ForwardOptions, Model, ModelConfig, ENCODER_COUNTER};
use crate::nn::blocks::{ChannelAttention, CidBlock, Downsample, QkvProjection, Upsample};
use crate::nn::params::{Bound, ParamStore};
use crate::ops::conv::Conv2dSpec;
use crate::raw::bayer::{bayer_pack, bayer_unpack, BayerFrame};
use crate::raw::dataset::SynthConfig;
use crate::raw::noise::{add_low_light_noise, NoiseModel};
use crate::tensor::Tensor;
use crate::train::loss::{combined_loss, psnr, LossWeights};
use crate::train::optim::{AdamW, AdamWConfig};
use crate::train::trainer::TrainConfig;

pub const GRAD_TOL: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    Full,
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            _ => Err(Error::config(format!("unknown check level `{s}` (expected quick or full)"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub level: Level,
    pub checks: Vec<CheckOutcome>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(out, "{} {:<48} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(out, "{} checks, {failed} failed", self.checks.len());
        out
    }
}

struct Collector(Vec<CheckOutcome>);

impl Collector {
    fn run(&mut self, name: &str, f: impl FnOnce() -> Result<(bool, String)>) {
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        self.0.push(CheckOutcome { name: name.to_string(), passed, detail });
    }
}

/// `Σ w ⊙ y` with fixed pseudo-random weights, a smooth scalar probe.
pub fn projection(tape: &mut Tape<f64>, y: Var, seed: u64) -> Result<Var> {
    let shape = tape.value(y).shape().to_vec();
    let w = Tensor::uniform(shape, -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
    tape.dot(y, w)
}

/// Worst relative error over `x` and every parameter of `store` for the
/// block `forward`, probed through [`projection`].
pub fn gradcheck_block<F>(
    x: &Tensor<f64>,
    store: &ParamStore<f64>,
    forward: F,
    max_entries: Option<usize>,
) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &Bound, Var) -> Result<Var>,
{
    let mut inputs = vec![x.clone()];
    inputs.extend(store.iter().map(|(_, p)| p.value.clone()));
    let reports = check_gradients(
        &inputs,
        |tape, vars| {
            let p = Bound::from_vars(vars[1..].to_vec());
            let y = forward(tape, &p, vars[0])?;
            projection(tape, y, 17)
        },
        FD_STEP,
        max_entries,
    )?;
    Ok(worst_rel_err(&reports))
}

/// Gradient check of the whole train graph (both outputs) on input `x`.
pub fn gradcheck_network(model: &Model<f64>, x: &Tensor<f64>, max_entries: Option<usize>) -> Result<f64> {
    gradcheck_block(
        x,
        &model.store,
        |tape, p, xv| {
            let out = model.forward_train(tape, p, xv, ForwardOptions::default())?;
            let a = projection(tape, out.y_rgb, 1)?;
            let b = projection(tape, out.y_raw, 2)?;
            // Fold the two scalars into one tensor the caller projects again.
            let s = tape.add(a, b)?;
            Ok(s)
        },
        max_entries,
    )
}

fn randn(shape: &[usize], seed: u64) -> Tensor<f64> {
    Tensor::randn(shape.to_vec(), &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Seeded shapes spanning `C ∈ {2,4,8}`, `H, W ∈ [4, 16]` and
/// `h ∈ {1, 3, 5, H}`. The `h = H` cases use odd `H`.
pub fn attention_cases(count: usize) -> Vec<(usize, usize, usize, usize, u64)> {
    (0..count)
        .map(|i| {
            let c = [2, 4, 8][i % 3];
            let mut height = 4 + (i * 5) % 13;
            let width = 4 + (i * 7) % 13;
            let h = match i % 4 {
                0 => 1,
                1 => 3,
                2 => 5,
                _ => {
                    if height % 2 == 0 {
                        height -= 1;
                    }
                    height
                }
            };
            (c, height, width, h, 1000 + i as u64)
        })
        .collect()
}

fn pass_below(value: f64, tol: f64, what: &str) -> (bool, String) {
    (value < tol, format!("{what} {value:.3e} < {tol:.0e}"))
}

fn check_attention(c: &mut Collector) {
    c.run("attention: linear/streaming == naive f64", || {
        let mut worst: f64 = 0.0;
        let cases = attention_cases(24);
        for &(ch, height, width, h, seed) in &cases {
            let shape = [2, ch, height, width];
            let (q, k, v) = (randn(&shape, seed), randn(&shape, seed + 1), randn(&shape, seed + 2));
            let naive = line_attention_naive(&q, &k, &v, h)?;
            worst = worst.max(line_attention_linear(&q, &k, &v, h)?.max_abs_diff(&naive));
            worst = worst.max(line_attention_streaming(&q, &k, &v, h)?.0.max_abs_diff(&naive));
        }
        let (ok, d) = pass_below(worst, 1e-10, "max abs diff");
        Ok((ok, format!("{d} over {} cases", cases.len())))
    });
    c.run("attention: linear/streaming == naive f32", || {
        let mut worst: f64 = 0.0;
        for &(ch, height, width, h, seed) in &attention_cases(24) {
            let shape = [1, ch, height, width];
            let (q, k, v) = (
                randn(&shape, seed).cast::<f32>(),
                randn(&shape, seed + 1).cast::<f32>(),
                randn(&shape, seed + 2).cast::<f32>(),
            );
            let naive = line_attention_naive(&q, &k, &v, h)?;
            let scale = naive.max_abs().max(1.0);
            worst = worst.max(line_attention_linear(&q, &k, &v, h)?.max_abs_diff(&naive) / scale);
            worst = worst.max(line_attention_streaming(&q, &k, &v, h)?.0.max_abs_diff(&naive) / scale);
        }
        Ok(pass_below(worst, 1e-5, "max diff relative to max |out|"))
    });
    c.run("attention: streaming == linear bitwise f64", || {
        for &(ch, height, width, h, seed) in &attention_cases(20) {
            let shape = [1, ch, height, width];
            let (q, k, v) = (randn(&shape, seed), randn(&shape, seed + 1), randn(&shape, seed + 2));
            if line_attention_streaming(&q, &k, &v, h)?.0 != line_attention_linear(&q, &k, &v, h)? {
                return Ok((false, format!("differs at C={ch} H={height} W={width} h={h}")));
            }
        }
        Ok((true, "20 cases identical".into()))
    });
    c.run("streaming: emit latency and ordering", || {
        let mut state = LineBufferState::<f64>::new(2, 3, 6, 3)?;
        let row = vec![1.0; 6];
        let first = state.push_row(0, &row, &row, &row)?;
        let second = state.push_row(1, &row, &row, &row)?;
        let out_of_order = matches!(state.push_row(3, &row, &row, &row), Err(Error::Protocol(_)));
        let ok = first.is_none() && second.map(|r| r.index) == Some(0) && out_of_order;
        Ok((ok, "H=6 h=3: row 0 released by input row 1; skipped row rejected".into()))
    });
    c.run("streaming: K/V state = (min(h,H)+1)·C²", || {
        let (ch, h) = (4, 7);
        let sweep = streaming_state_sweep(&[32, 64, 128, 256], 16, ch, h)?;
        let expected = (h + 1) * ch * ch;
        let ok = sweep.iter().all(|(_, s)| s.peak_kv_state == expected && s.peak_aggregates == h);
        let peaks: Vec<usize> = sweep.iter().map(|(_, s)| s.peak_kv_state).collect();
        Ok((ok, format!("peaks {peaks:?} for H in [32,64,128,256], expected {expected}")))
    });
}

fn check_block_gradients(c: &mut Collector) {
    let x8 = randn(&[1, 8, 6, 6], 21);
    c.run("grad: conv2d (grouped, strided)", || {
        let mut s = ParamStore::new(1);
        let w = s.kaiming_uniform("w", [6, 4, 3, 3]);
        let b = s.filled("b", &[6], 0.1);
        gradcheck_block(&x8, &s, |t, p, x| t.conv2d(x, p[w], Some(p[b]), Conv2dSpec::new(2, 1, 2)), None)
            .map(|e| pass_below(e, GRAD_TOL, "rel err"))
    });
    c.run("grad: layer/group norm + gelu", || {
        let mut s = ParamStore::new(2);
        let g = s.insert("g", randn(&[8], 3));
        let b = s.insert("b", randn(&[8], 4));
        gradcheck_block(
            &x8,
            &s,
            |t, p, x| {
                let y = t.layer_norm(x, p[g], p[b], 1e-5)?;
                let y = t.gelu(y);
                t.group_norm(y, 4, p[g], p[b], 1e-5)
            },
            None,
        )
        .map(|e| pass_below(e, GRAD_TOL, "rel err"))
    });
    c.run("grad: cid block", || {
        let mut s = ParamStore::new(3);
        let blk = CidBlock::new(&mut s, "cid", 8, 2);
        gradcheck_block(&x8, &s, |t, p, x| blk.forward(t, p, x), Some(12)).map(|e| pass_below(e, GRAD_TOL, "rel err"))
    });
    c.run("grad: downsample + upsample", || {
        let mut s = ParamStore::new(4);
        let down = Downsample::new(&mut s, "down", 8);
        let up = Upsample::new(&mut s, "up", 16)?;
        gradcheck_block(
            &x8,
            &s,
            |t, p, x| {
                let y = down.forward(t, p, x)?;
                up.forward(t, p, y)
            },
            Some(12),
        )
        .map(|e| pass_below(e, GRAD_TOL, "rel err"))
    });
    c.run("grad: channel attention", || {
        let mut s = ParamStore::new(5);
        let blk = ChannelAttention::new(&mut s, "ca", 8);
        gradcheck_block(&x8, &s, |t, p, x| blk.forward(t, p, x), Some(12)).map(|e| pass_below(e, GRAD_TOL, "rel err"))
    });
    c.run("grad: qkv projection", || {
        let mut s = ParamStore::new(6);
        let blk = QkvProjection::new(&mut s, "qkv", 8);
        gradcheck_block(
            &x8,
            &s,
            |t, p, x| {
                let [q, k, v] = blk.forward(t, p, x)?;
                let qk = t.add(q, k)?;
                t.add(qk, v)
            },
            Some(12),
        )
        .map(|e| pass_below(e, GRAD_TOL, "rel err"))
    });
    for kind in AttentionImpl::ALL {
        c.run(&format!("grad: line attention ({})", kind.name()), || {
            let inputs = [randn(&[1, 4, 5, 6], 31), randn(&[1, 4, 5, 6], 32), randn(&[1, 4, 5, 6], 33)];
            let reports = check_gradients(
                &inputs,
                |t, v| {
                    let y = t.line_attention(v[0], v[1], v[2], 3, kind)?;
                    projection(t, y, 5)
                },
                FD_STEP,
                None,
            )?;
            Ok(pass_below(worst_rel_err(&reports), GRAD_TOL, "rel err"))
        });
    }
    c.run("grad: FDA module (1x8x6x6)", || {
        let mut s = ParamStore::new(7);
        let blk = LineAttentionParams::new(&mut s, "fda", 8, 3, 4)?;
        gradcheck_block(&x8, &s, |t, p, x| blk.forward(t, p, x, AttentionImpl::Linear), Some(12))
            .map(|e| pass_below(e, GRAD_TOL, "rel err"))
    });
}

fn ablation_configs() -> Vec<ModelConfig> {
    let mut out = Vec::new();
    for (use_fda, use_raw_supervision) in [(true, true), (true, false), (false, true), (false, false)] {
        out.push(ModelConfig { use_fda, use_raw_supervision, ..ModelConfig::tiny() });
    }
    for kind in [FdaKind::Conv, FdaKind::ChannelAttention] {
        out.push(ModelConfig { fda_kind: kind, ..ModelConfig::tiny() });
    }
    out.push(ModelConfig::default());
    out
}

fn check_model(c: &mut Collector) {
    c.run("model: inference y_rgb == train y_rgb bitwise", || {
        for seed in 0..10u64 {
            let model = Model::<f32>::build(ModelConfig::tiny(), seed)?;
            let x = Tensor::uniform(vec![1, 4, 8, 8], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
            let mut tape = Tape::new();
            let p = model.store.bind(&mut tape);
            let xv = tape.constant(x.clone());
            let out = model.forward_train(&mut tape, &p, xv, ForwardOptions::default())?;
            if tape.value(out.y_rgb) != &model.infer(&x, AttentionImpl::Linear)? {
                return Ok((false, format!("seed {seed} differs")));
            }
        }
        Ok((true, "10 seeds identical".into()))
    });
    c.run("model: inference MACs < train MACs", || {
        let mut worst: f64 = 0.0;
        for cfg in ablation_configs() {
            let model = Model::<f32>::build(cfg, 0)?;
            let r = count_flops(&model, &[1, 4, 64, 64], AttentionImpl::Linear)?;
            if r.infer_macs >= r.train_macs {
                return Ok((false, format!("{:?}: infer {} >= train {}", model.config, r.infer_macs, r.train_macs)));
            }
            worst = worst.max(r.infer_train_ratio());
        }
        Ok((true, format!("{} configs, max infer/train ratio {worst:.4}", ablation_configs().len())))
    });
    c.run("model: one encoder pass feeds both decoders", || {
        let model = Model::<f32>::build(ModelConfig::tiny(), 0)?;
        let mut tape = Tape::new();
        let p = model.store.bind(&mut tape);
        let xv = tape.constant(Tensor::full(vec![2, 4, 8, 8], 0.5));
        model.forward_train(&mut tape, &p, xv, ForwardOptions::default())?;
        let n = tape.counter(ENCODER_COUNTER);
        Ok((n == 1, format!("encoder calls {n}")))
    });
    c.run("model: FDA count == num_scales", || {
        let m = Model::<f32>::build(ModelConfig::default(), 0)?;
        let off = Model::<f32>::build(ModelConfig { use_fda: false, ..ModelConfig::default() }, 0)?;
        let ok = m.line_attention_modules() == m.config.num_scales && off.line_attention_modules() == 0;
        Ok((ok, format!("{} modules with FDA, {} without", m.line_attention_modules(), off.line_attention_modules())))
    });
    c.run("model: checkpoint roundtrip", || {
        let m = Model::<f32>::build(ModelConfig::tiny(), 9)?;
        let back =
            Model::from_checkpoint(&Checkpoint::from_bytes(&m.to_checkpoint(serde_json::Value::Null).to_bytes()?)?)?;
        Ok((back.store == m.store, "parameters identical after save/load".into()))
    });
    c.run("model: gradient topology", || {
        let t = gradient_topology(&Model::<f64>::build(ModelConfig::tiny(), 4)?, 4)?;
        let ok = t.encoder_from_rgb
            && t.encoder_from_raw
            && t.fda_from_rgb
            && !t.fda_from_raw
            && !t.raw_decoder_from_rgb
            && t.raw_decoder_from_raw;
        Ok((ok, format!("{t:?}")))
    });
}

/// Which parameter groups receive gradient from each loss term alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Topology {
    pub encoder_from_rgb: bool,
    pub encoder_from_raw: bool,
    pub fda_from_rgb: bool,
    pub fda_from_raw: bool,
    pub raw_decoder_from_rgb: bool,
    pub raw_decoder_from_raw: bool,
}

/// Back-propagates each loss term of the combined objective on its own by
/// detaching the encoder features entering the other branch.
pub fn gradient_topology(model: &Model<f64>, seed: u64) -> Result<Topology> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::uniform(vec![1, 4, 8, 8], 0.0, 1.0, &mut rng);
    let y_rgb = Tensor::uniform(vec![1, 3, 16, 16], 0.0, 1.0, &mut rng);
    let y_raw = Tensor::uniform(vec![1, 4, 8, 8], 0.0, 1.0, &mut rng);

    let flows = |rgb_term: bool| -> Result<[bool; 3]> {
        let mut tape = Tape::new();
        let p = model.store.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let opts =
            ForwardOptions { detach_rgb_input: !rgb_term, detach_raw_input: rgb_term, ..ForwardOptions::default() };
        let out = model.forward_train(&mut tape, &p, xv, opts)?;
        let t_rgb = tape.constant(y_rgb.clone());
        let t_raw = tape.constant(y_raw.clone());
        let weights = if rgb_term { LossWeights { rgb: 1.0, raw: 0.0 } } else { LossWeights { rgb: 0.0, raw: 1.0 } };
        let loss = combined_loss(&mut tape, &out, t_rgb, Some(t_raw), weights)?;
        tape.backward(loss.total)?;
        let reached = |prefix: &str| {
            model.store.ids_with_prefix(prefix).any(|id| tape.grad(p[id]).is_some_and(|g| g.max_abs() > 0.0))
        };
        Ok([reached("enc."), reached("fda."), reached("raw.")])
    };
    let [enc_rgb, fda_rgb, raw_rgb] = flows(true)?;
    let [enc_raw, fda_raw, raw_raw] = flows(false)?;
    Ok(Topology {
        encoder_from_rgb: enc_rgb,
        encoder_from_raw: enc_raw,
        fda_from_rgb: fda_rgb,
        fda_from_raw: fda_raw,
        raw_decoder_from_rgb: raw_rgb,
        raw_decoder_from_raw: raw_raw,
    })
}

fn check_raw(c: &mut Collector) {
    c.run("raw: pack/unpack bijection (100 frames)", || {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let (h, w) = (2 * rng.random_range(1..9), 2 * rng.random_range(1..9));
            let frame = BayerFrame::new(h, w, (0..h * w).map(|_| rng.random()).collect())?;
            if bayer_unpack(&bayer_pack(&frame))? != frame {
                return Ok((false, format!("{h}x{w} frame not restored")));
            }
        }
        Ok((true, "100 random frames restored exactly".into()))
    });
    c.run("raw: noise moments within 10%", || {
        let clean = BayerFrame::new(100, 100, vec![0.5; 10_000])?;
        let nm = NoiseModel { k: 2000.0, sigma_r: 2e-4, seed: 5 };
        let noisy = add_low_light_noise(&clean, &nm, 0.02)?;
        let n = 10_000.0;
        let mean = noisy.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = noisy.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (em, ev) = (0.01, 0.01 / 2000.0 + 4e-8);
        let (rm, rv) = ((mean - em).abs() / em, (var - ev).abs() / ev);
        Ok((rm < 0.1 && rv < 0.1, format!("mean off {:.1}%, variance off {:.1}%", 100.0 * rm, 100.0 * rv)))
    });
    c.run("raw: dataset determinism", || {
        let cfg = SynthConfig { count: 3, height: 16, width: 16, seed: 3, ..SynthConfig::default() };
        Ok((cfg.generate()? == cfg.generate()?, "two generations identical".into()))
    });
}

/// One AdamW step on a scalar against the closed form, in f64.
pub fn adamw_hand_check() -> Result<f64> {
    let cfg = AdamWConfig { lr: 0.01, weight_decay: 0.1, ..AdamWConfig::default() };
    let (p0, g) = (0.5f64, 0.3f64);
    let mut store = ParamStore::new(0);
    store.insert("p", Tensor::new(vec![1], vec![p0])?);
    let mut opt = AdamW::new(cfg, 1)?;
    opt.step(&mut store, &[Some(Tensor::new(vec![1], vec![g])?)])?;
    let m = (1.0 - cfg.beta1) * g / (1.0 - cfg.beta1);
    let v = (1.0 - cfg.beta2) * g * g / (1.0 - cfg.beta2);
    let expected = p0 * (1.0 - cfg.lr * cfg.weight_decay) - cfg.lr * m / (v.sqrt() + cfg.eps);
    let id = store.find("p").expect("inserted above");
    let got = store.get(id).data()[0];
    Ok((got - expected).abs())
}

fn check_optimizer(c: &mut Collector) {
    c.run("optim: AdamW step matches closed form", || {
        adamw_hand_check().map(|e| (e < 1e-12, format!("abs err {e:.2e} < 1e-12")))
    });
    c.run("optim: defaults lr 2e-4, betas 0.9/0.99, batch 1", || {
        let t = TrainConfig::default();
        let ok = t.lr == 2e-4 && t.beta1 == 0.9 && t.beta2 == 0.99 && t.batch_size == 1;
        Ok((ok, format!("lr {} beta1 {} beta2 {} batch {}", t.lr, t.beta1, t.beta2, t.batch_size)))
    });
    c.run("metrics: psnr closed forms", || {
        let a = Tensor::<f64>::full(vec![8], 0.5);
        let ok = psnr(&a, &a, 1.0)? == 99.0 && (psnr(&a, &a.map(|v| v + 0.1), 1.0)? - 20.0).abs() < 1e-9;
        Ok((ok, "identical 99 dB, uniform 0.1 error 20 dB".into()))
    });
}

fn check_full(c: &mut Collector) {
    c.run("grad: full tiny network (1x4x8x8, f64)", || {
        let model = Model::<f64>::build(ModelConfig::tiny(), 12)?;
        let x = Tensor::uniform(vec![1, 4, 8, 8], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(12));
        gradcheck_network(&model, &x, Some(4)).map(|e| pass_below(e, GRAD_TOL, "rel err"))
    });
    c.run("complexity: linear slope vs pixels", || {
        let grid: Vec<(usize, usize)> = [64, 128, 256, 512, 1024].iter().map(|&w| (16, w)).collect();
        let rows = bench_scaling(AttentionImpl::Linear, &grid, 8, Window::Fixed(7), 7)?;
        let s = pixel_slope(&rows);
        Ok(((0.8..=1.3).contains(&s), format!("slope {s:.3} in [0.8, 1.3]")))
    });
    c.run("complexity: full-height naive slope vs pixels", || {
        let grid: Vec<(usize, usize)> = [8, 12, 16, 24, 32].iter().map(|&s| (s, s)).collect();
        let rows = bench_scaling(AttentionImpl::Naive, &grid, 4, Window::FullHeight, 5)?;
        let s = pixel_slope(&rows);
        Ok((s >= 1.7, format!("slope {s:.3} >= 1.7")))
    });
}

pub fn run(level: Level) -> Report {
    let mut c = Collector(Vec::new());
    check_attention(&mut c);
    check_block_gradients(&mut c);
    check_model(&mut c);
    check_raw(&mut c);
    check_optimizer(&mut c);
    if level == Level::Full {
        check_full(&mut c);
    }
    Report { level, checks: c.0 }
}
