use std::fs;
use std::path::Path;

use fdanet::analysis::{bench_scaling, count_flops, pixel_slope, rows_csv, Window};
use fdanet::checkpoint::Checkpoint;
use fdanet::lineformer::AttentionImpl;
use fdanet::model::{Model, ModelConfig};
use fdanet::raw::{amplify, load_dataset, write_dataset, write_ppm, RawFile, SynthConfig};
use fdanet::train::{metrics_csv, Trainer};
use fdanet::verify;

use crate::config::{self, parse_dims};
use crate::{BenchArgs, CheckArgs, Failure, FlopsArgs, InferArgs, SynthArgs, TrainArgs};

type Outcome = Result<(), Failure>;

pub fn synth(a: SynthArgs) -> Outcome {
    let [height, width] = parse_dims::<2>(&a.size, "--size")?;
    let mut cfg = SynthConfig { seed: a.seed, count: a.count, height, width, ..SynthConfig::default() };
    if let Some(list) = &a.ratios {
        cfg.ratios = list
            .split(',')
            .map(|r| r.trim().parse::<f32>())
            .collect::<Result<_, _>>()
            .map_err(|_| Failure::usage(format!("--ratios `{list}` is not a comma-separated list of numbers")))?;
    }
    let manifest = write_dataset(&a.out, &cfg)?;
    println!("wrote {} samples of {height}x{width} (seed {}) to {}", manifest.samples.len(), cfg.seed, a.out.display());
    Ok(())
}

pub fn train(a: TrainArgs) -> Outcome {
    let (cfg, layers) = config::resolve(&a)?;
    println!("config: {layers}");
    println!("{}", serde_json::to_string(&cfg).map_err(fdanet::Error::from)?);

    let data = load_dataset(&a.data)?;
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("config.json"), serde_json::to_string_pretty(&cfg).map_err(fdanet::Error::from)? + "\n")?;

    let model = Model::build(cfg.model.clone(), cfg.train.seed)?;
    println!("{} parameters, {} samples", model.param_count(), data.len());
    let mut trainer = Trainer::new(model, data, cfg.train.clone())?;
    let out = a.out.clone();
    trainer.run(|t, m| {
        println!("step {:>6}  loss {:.5}  psnr {:.2} dB", m.step, m.loss_total, m.psnr.unwrap_or(f64::NAN));
        t.checkpoint()?.write(out.join(format!("ckpt_{:06}.fdat", m.step)))
    })?;
    fs::write(a.out.join("metrics.csv"), metrics_csv(&trainer.log))?;
    trainer.checkpoint()?.write(a.out.join("final.fdat"))?;
    println!("wrote {}", a.out.join("final.fdat").display());
    Ok(())
}

fn load_model(ckpt: &Path, config: Option<&Path>) -> Result<Model, Failure> {
    // An unreadable checkpoint is a compatibility failure of this command,
    // not a generic IO one.
    let compat = |e: fdanet::Error| match e {
        fdanet::Error::Io(io) => {
            Failure { code: 3, message: format!("cannot read checkpoint {}: {io}", ckpt.display()) }
        }
        other => other.into(),
    };
    let ck = Checkpoint::read(ckpt).map_err(compat)?;
    let model = match config {
        Some(path) => {
            let cfg: ModelConfig = config::read_file(path)?.model;
            Model::from_checkpoint_with(&ck, cfg)?
        }
        None => Model::from_checkpoint(&ck)?,
    };
    Ok(model)
}

pub fn infer(a: InferArgs) -> Outcome {
    let model = load_model(&a.ckpt, a.config.as_deref())?;
    let input = RawFile::read(&a.input)?.tensor;
    let input = match *input.shape() {
        [4, h, w] => input.reshape(vec![1, 4, h, w])?,
        [1, 4, _, _] => input,
        ref s => return Err(fdanet::Error::Usage(format!("input must be [4,H,W] or [1,4,H,W], got {s:?}")).into()),
    };
    let input = match a.ratio {
        Some(r) => amplify(&input, r)?,
        None => input,
    };
    let attention = if a.streaming { AttentionImpl::Streaming } else { AttentionImpl::Linear };
    let (y, macs) = model.infer_counted(&input, attention)?;
    let [_, c, h, w] = y.dims4("infer")?;
    let rgb = y.reshape(vec![c, h, w])?;
    write_ppm(&a.out, &rgb)?;
    let fraw = a.out.with_extension("fraw");
    RawFile::rgb(rgb).write(&fraw)?;
    println!(
        "{}x{} output via {} attention, {macs} MACs; wrote {} and {}",
        h,
        w,
        attention.name(),
        a.out.display(),
        fraw.display()
    );
    Ok(())
}

pub fn check(a: CheckArgs) -> Outcome {
    let report = verify::run(a.level);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(fdanet::Error::from)?);
    } else {
        print!("{}", report.to_text());
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure { code: 1, message: "verification failed".into() })
    }
}

pub fn bench(a: BenchArgs) -> Outcome {
    let kinds: Vec<AttentionImpl> = a.kinds.split(',').map(|k| k.trim().parse()).collect::<Result<_, _>>()?;
    let grid: Vec<(usize, usize)> =
        a.sizes.split(',').map(|s| parse_dims::<2>(s, "--sizes").map(|[h, w]| (h, w))).collect::<Result<_, _>>()?;
    let window = match a.window.as_str() {
        "full" => Window::FullHeight,
        h => {
            Window::Fixed(h.parse().map_err(|_| Failure::usage(format!("--window `{h}` is not an integer or `full`")))?)
        }
    };
    let mut rows = Vec::new();
    for kind in kinds {
        let r = bench_scaling(kind, &grid, a.channels, window, a.repeats)?;
        if r.len() >= 2 {
            eprintln!("{:<10} log-log slope vs pixels: {:.3}", kind.name(), pixel_slope(&r));
        }
        rows.extend(r);
    }
    let csv = rows_csv(&rows);
    match &a.out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn flops(a: FlopsArgs) -> Outcome {
    let mut model_cfg = match &a.config {
        Some(path) => config::read_file(path)?.model,
        None => ModelConfig::default(),
    };
    if let Some(p) = &a.preset {
        model_cfg = config::preset(p)?;
    }
    let shape = parse_dims::<4>(&a.input, "--input")?;
    let model = Model::<f32>::build(model_cfg, 0)?;
    let report = count_flops(&model, &shape, a.attention)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(fdanet::Error::from)?);
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}
