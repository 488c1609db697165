//! Wall-clock scaling of the attention executors.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lineformer::attention::{
    attention_macs, full_height_window, line_attention_linear, line_attention_naive, AttentionImpl,
};
use crate::lineformer::streaming::{line_attention_streaming, LineBufferState, StreamStats};
use crate::tensor::Tensor;

pub const MIN_REPEATS: usize = 5;
pub const CSV_HEADER: &str = "impl,H,W,C,h,wall_ns,flops";

/// Window height of a benchmark case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Fixed(usize),
    /// A window that covers every row from every query row.
    FullHeight,
}

impl Window {
    pub fn resolve(self, height: usize) -> usize {
        match self {
            Window::Fixed(h) => h,
            Window::FullHeight => full_height_window(height),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    #[serde(rename = "impl")]
    pub kind: AttentionImpl,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub h: usize,
    /// Median over the repeats.
    pub wall_ns: u64,
    pub flops: u64,
}

impl BenchRow {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

pub fn bench_case(
    kind: AttentionImpl,
    height: usize,
    width: usize,
    channels: usize,
    h: usize,
    repeats: usize,
) -> Result<BenchRow> {
    if repeats < MIN_REPEATS {
        return Err(Error::config(format!("at least {MIN_REPEATS} repeats are required, got {repeats}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64((height * 131 + width) as u64);
    let shape = vec![1, channels, height, width];
    let q = Tensor::<f32>::randn(shape.clone(), &mut rng);
    let k = Tensor::<f32>::randn(shape.clone(), &mut rng);
    let v = Tensor::<f32>::randn(shape, &mut rng);
    let run = || -> Result<Tensor<f32>> {
        match kind {
            AttentionImpl::Naive => line_attention_naive(&q, &k, &v, h),
            AttentionImpl::Linear => line_attention_linear(&q, &k, &v, h),
            AttentionImpl::Streaming => Ok(line_attention_streaming(&q, &k, &v, h)?.0),
        }
    };
    std::hint::black_box(run()?);
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        std::hint::black_box(run()?);
        times.push(start.elapsed().as_nanos() as u64);
    }
    times.sort_unstable();
    Ok(BenchRow {
        kind,
        height,
        width,
        channels,
        h,
        wall_ns: times[times.len() / 2],
        flops: attention_macs(kind, 1, channels, height, width, h),
    })
}

/// Benchmarks every `(H, W)` in `grid`.
pub fn bench_scaling(
    kind: AttentionImpl,
    grid: &[(usize, usize)],
    channels: usize,
    window: Window,
    repeats: usize,
) -> Result<Vec<BenchRow>> {
    grid.iter()
        .map(|&(height, width)| bench_case(kind, height, width, channels, window.resolve(height), repeats))
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

/// Slope of median wall time against pixel count.
pub fn pixel_slope(rows: &[BenchRow]) -> f64 {
    let xs: Vec<f64> = rows.iter().map(|r| r.pixels() as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.wall_ns.max(1) as f64).collect();
    loglog_slope(&xs, &ys)
}

pub fn rows_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.kind.name(),
            r.height,
            r.width,
            r.channels,
            r.h,
            r.wall_ns,
            r.flops
        );
    }
    out
}

/// Streams zero rows through a fresh line buffer for each height and
/// reports the measured peaks.
pub fn streaming_state_sweep(
    heights: &[usize],
    width: usize,
    channels: usize,
    h: usize,
) -> Result<Vec<(usize, StreamStats)>> {
    heights
        .iter()
        .map(|&height| {
            let mut state = LineBufferState::<f32>::new(channels, width, height, h)?;
            let row = vec![0.0f32; channels * width];
            for r in 0..height {
                state.push_row(r, &row, &row, &row)?;
            }
            state.finish()?;
            Ok((height, state.stats()))
        })
        .collect()
}
