//! Deterministic training loop.
//!
//! Which samples and crops step `s` sees is a pure function of
//! `(seed, s)`: each epoch has its own seeded permutation and each batch
//! slot its own crop RNG stream. Resuming from a checkpoint therefore
//! replays exactly the batches an uninterrupted run would have used.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::lineformer::attention::AttentionImpl;
use crate::model::{ForwardOptions, Model};
use crate::raw::dataset::SamplePair;
use crate::tensor::Tensor;
use crate::train::loss::{psnr, supervised_loss, LossWeights};
use crate::train::optim::{AdamW, AdamWConfig, Moments};

const CROP_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

pub const METRICS_HEADER: &str = "step,loss_total,loss_rgb,loss_raw,psnr";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub steps: u64,
    pub batch_size: usize,
    /// Evaluate (and checkpoint, when driven by the CLI) every this many steps.
    pub eval_every: u64,
    /// Number of leading samples used for PSNR evaluation at full size.
    pub eval_samples: usize,
    pub seed: u64,
    pub loss_weights: LossWeights,
    /// Side of the square packed-raw training crop.
    pub crop_size: usize,
    pub attention: AttentionImpl,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let opt = AdamWConfig::default();
        TrainConfig {
            lr: opt.lr,
            beta1: opt.beta1,
            beta2: opt.beta2,
            eps: opt.eps,
            weight_decay: opt.weight_decay,
            steps: 500,
            batch_size: 1,
            eval_every: 100,
            eval_samples: 4,
            seed: 0,
            loss_weights: LossWeights::default(),
            crop_size: 64,
            attention: AttentionImpl::Linear,
        }
    }
}

impl TrainConfig {
    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.adamw().validate()?;
        if self.batch_size == 0 || self.crop_size == 0 || self.eval_every == 0 {
            return Err(Error::config("batch_size, crop_size and eval_every must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub loss_total: f64,
    pub loss_rgb: f64,
    pub loss_raw: Option<f64>,
    pub psnr: Option<f64>,
}

impl StepMetrics {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        format!("{},{},{},{},{}", self.step, self.loss_total, self.loss_rgb, opt(self.loss_raw), opt(self.psnr))
    }
}

pub fn metrics_csv(rows: &[StepMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// One batch element: sample index and packed crop origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CropSpec {
    pub sample: usize,
    pub top: usize,
    pub left: usize,
}

#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: Model<f32>,
    pub optimizer: AdamW<f32>,
    pub config: TrainConfig,
    data: Vec<SamplePair>,
    crop: usize,
    step: u64,
    pub log: Vec<StepMetrics>,
}

impl Trainer {
    pub fn new(model: Model<f32>, data: Vec<SamplePair>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let first = data.first().ok_or_else(|| Error::Usage("training set is empty".into()))?;
        let (mut h, mut w) = first.packed_dims();
        for s in &data {
            let (sh, sw) = s.packed_dims();
            h = h.min(sh);
            w = w.min(sw);
        }
        let m = model.config.spatial_multiple();
        let crop = config.crop_size.min(h).min(w) / m * m;
        if crop == 0 {
            return Err(Error::config(format!(
                "samples of {h}x{w} packed pixels are smaller than the required multiple {m}"
            )));
        }
        let optimizer = AdamW::new(config.adamw(), model.store.len())?;
        Ok(Trainer { model, optimizer, config, data, crop, step: 0, log: Vec::new() })
    }

    /// Completed optimizer steps.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn crop_size(&self) -> usize {
        self.crop
    }

    pub fn data(&self) -> &[SamplePair] {
        &self.data
    }

    /// Batch composition of the step with zero-based index `step`.
    pub fn batch_plan(&self, step: u64) -> Vec<CropSpec> {
        let n = self.data.len() as u64;
        let b = self.config.batch_size as u64;
        (0..b)
            .map(|slot| {
                let draw = step * b + slot;
                let epoch = draw / n;
                let mut perm: Vec<usize> = (0..self.data.len()).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
                rng.set_stream(epoch);
                perm.shuffle(&mut rng);
                let sample = perm[(draw % n) as usize];

                let (h, w) = self.data[sample].packed_dims();
                let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ CROP_STREAM_SALT);
                rng.set_stream(draw);
                CropSpec { sample, top: rng.random_range(0..=h - self.crop), left: rng.random_range(0..=w - self.crop) }
            })
            .collect()
    }

    fn batch(&self, plan: &[CropSpec]) -> Result<(Tensor<f32>, Tensor<f32>, Tensor<f32>)> {
        let crops: Vec<SamplePair> =
            plan.iter().map(|c| self.data[c.sample].crop(c.top, c.left, self.crop)).collect::<Result<_>>()?;
        let stack = |f: fn(&SamplePair) -> &Tensor<f32>| Tensor::stack(&crops.iter().map(f).collect::<Vec<_>>(), false);
        Ok((stack(|s| &s.x)?, stack(|s| &s.y_raw)?, stack(|s| &s.y_rgb)?))
    }

    /// Runs one optimizer step and returns its losses.
    pub fn train_step(&mut self) -> Result<StepMetrics> {
        let plan = self.batch_plan(self.step);
        let (x, y_raw, y_rgb) = self.batch(&plan)?;
        let use_raw = self.model.config.use_raw_supervision;

        let mut tape = Tape::new();
        let p = self.model.store.bind(&mut tape);
        let xv = tape.constant(x);
        let t_rgb = tape.constant(y_rgb);
        let t_raw = use_raw.then(|| tape.constant(y_raw));
        let out = self.model.forward_train(&mut tape, &p, xv, ForwardOptions::with_attention(self.config.attention))?;
        let loss = supervised_loss(&mut tape, &out, t_rgb, t_raw, self.config.loss_weights, use_raw)?;
        tape.backward(loss.total)?;

        let grads: Vec<Option<Tensor<f32>>> = p.vars().iter().map(|&v| tape.grad(v)).collect();
        self.optimizer.step(&mut self.model.store, &grads)?;
        self.step += 1;

        let scalar = |v| tape.value(v).data()[0] as f64;
        let metrics = StepMetrics {
            step: self.step,
            loss_total: scalar(loss.total),
            loss_rgb: scalar(loss.rgb),
            loss_raw: loss.raw.map(scalar),
            psnr: None,
        };
        Ok(metrics)
    }

    /// Mean PSNR of the clamped full-size prediction over the evaluation samples.
    pub fn evaluate(&self) -> Result<f64> {
        let count = self.config.eval_samples.clamp(1, self.data.len());
        let mut total = 0.0;
        for s in &self.data[..count] {
            let x = s.x.clone().reshape(vec![1, 4, s.x.shape()[1], s.x.shape()[2]])?;
            let pred = self.model.infer(&x, self.config.attention)?.map(|v| v.clamp(0.0, 1.0));
            let target = s.y_rgb.clone().reshape(pred.shape().to_vec())?;
            total += psnr(&pred, &target, 1.0)?;
        }
        Ok(total / count as f64)
    }

    /// Trains until `config.steps` completed steps, evaluating every
    /// `eval_every` steps and at the end. `on_eval` sees the trainer after
    /// each evaluation.
    pub fn run(&mut self, mut on_eval: impl FnMut(&Trainer, &StepMetrics) -> Result<()>) -> Result<()> {
        while self.step < self.config.steps {
            let mut m = self.train_step()?;
            if self.step.is_multiple_of(self.config.eval_every) || self.step == self.config.steps {
                m.psnr = Some(self.evaluate()?);
                self.log.push(m.clone());
                on_eval(self, &m)?;
            } else {
                self.log.push(m);
            }
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut param_steps = BTreeMap::new();
        let mut ckpt = self.model.to_checkpoint(serde_json::Value::Null);
        for ((_, param), slot) in self.model.store.iter().zip(&self.optimizer.state) {
            if let Some(st) = slot {
                ckpt.tensors.push((format!("opt.m.{}", param.name), st.m.clone()));
                ckpt.tensors.push((format!("opt.v.{}", param.name), st.v.clone()));
                param_steps.insert(param.name.clone(), st.step);
            }
        }
        ckpt.meta = serde_json::json!({
            "step": self.step,
            "train": self.config,
            "optimizer_steps": param_steps,
        });
        Ok(ckpt)
    }

    /// Restores model, optimizer moments and step counter from `ckpt`.
    pub fn resume(ckpt: &Checkpoint, data: Vec<SamplePair>, config: TrainConfig) -> Result<Self> {
        let model = Model::from_checkpoint(ckpt)?;
        let mut trainer = Trainer::new(model, data, config)?;
        let bad = |what: &str| Error::format(0, format!("checkpoint meta lacks {what}"));
        trainer.step = ckpt.meta["step"].as_u64().ok_or_else(|| bad("`step`"))?;
        let steps = ckpt.meta["optimizer_steps"].as_object().ok_or_else(|| bad("`optimizer_steps`"))?;
        for (id, param) in trainer.model.store.iter() {
            let Some(step) = steps.get(&param.name) else { continue };
            let get = |kind: &str| {
                let name = format!("opt.{kind}.{}", param.name);
                ckpt.tensor(&name).cloned().ok_or(Error::MissingTensor { name })
            };
            trainer.optimizer.state[id.index()] = Some(Moments {
                m: get("m")?,
                v: get("v")?,
                step: step.as_u64().ok_or_else(|| bad("integer optimizer steps"))?,
            });
        }
        Ok(trainer)
    }
}
