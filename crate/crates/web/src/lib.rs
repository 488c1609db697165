//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export is a thin wrapper over a plain Rust function so the same
//! code paths run under `cargo test` on the host.

use fdanet::analysis::count_flops;
use fdanet::lineformer::{line_attention_linear, line_attention_naive, AttentionImpl, LineBufferState, StreamStats};
use fdanet::model::{Model, ModelConfig};
use fdanet::raw::{simple_isp, SynthConfig};
use fdanet::{Result, Tensor};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest mosaic side the preview accepts.
pub const MAX_PREVIEW: usize = 512;

#[derive(Debug, Serialize)]
pub struct TraceStep {
    pub row: usize,
    /// Row aggregates held after consuming `row`.
    pub occupancy: usize,
    pub kv_state: usize,
    pub emitted: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct StreamTrace {
    pub steps: Vec<TraceStep>,
    /// Rows released by the end-of-image flush.
    pub flushed: Vec<usize>,
    pub stats: StreamStats,
    /// `h·C² + C²` when `h ≤ H`.
    pub bound: usize,
    pub max_abs_diff_vs_naive: f64,
    pub bitwise_equal_to_linear: bool,
}

fn random_qkv(height: usize, width: usize, channels: usize, seed: u64) -> [Tensor<f64>; 3] {
    // A small LCG keeps the demo free of extra dependencies; values only
    // need to be varied, not statistically good.
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let shape = vec![1, channels, height, width];
    let mut make = || Tensor::from_fn(shape.clone(), |_| next());
    [make(), make(), make()]
}

/// Feeds random rows through the line buffer one at a time and records
/// what the buffer holds and releases after each row.
pub fn trace_streaming(height: usize, width: usize, channels: usize, h: usize, seed: u64) -> Result<StreamTrace> {
    let [q, k, v] = random_qkv(height, width, channels, seed);
    let mut state = LineBufferState::<f64>::new(channels, width, height, h)?;
    let row_of = |t: &Tensor<f64>, r: usize| -> Vec<f64> {
        (0..channels).flat_map(|c| (0..width).map(move |x| (c, x))).map(|(c, x)| t.at4(0, c, r, x)).collect()
    };
    let mut out = Tensor::<f64>::zeros(vec![1, channels, height, width]);
    let mut store = |index: usize, data: &[f64]| {
        for c in 0..channels {
            for x in 0..width {
                out.set4(0, c, index, x, data[c * width + x]);
            }
        }
    };
    let mut steps = Vec::with_capacity(height);
    for r in 0..height {
        let emitted = state.push_row(r, &row_of(&q, r), &row_of(&k, r), &row_of(&v, r))?;
        let mut ids = Vec::new();
        if let Some(o) = emitted {
            store(o.index, &o.data);
            ids.push(o.index);
        }
        steps.push(TraceStep { row: r, occupancy: state.occupancy(), kv_state: state.kv_state_len(), emitted: ids });
    }
    let mut flushed = Vec::new();
    for o in state.finish()? {
        store(o.index, &o.data);
        flushed.push(o.index);
    }
    let naive = line_attention_naive(&q, &k, &v, h)?;
    let linear = line_attention_linear(&q, &k, &v, h)?;
    Ok(StreamTrace {
        steps,
        flushed,
        stats: state.stats(),
        bound: h.min(height) * channels * channels + channels * channels,
        max_abs_diff_vs_naive: out.max_abs_diff(&naive),
        bitwise_equal_to_linear: out == linear,
    })
}

fn to_rgba(rgb: &Tensor<f32>, canvas: &mut [u8], canvas_width: usize, x0: usize) {
    let (h, w) = (rgb.shape()[1], rgb.shape()[2]);
    for y in 0..h {
        for x in 0..w {
            let px = 4 * (y * canvas_width + x0 + x);
            for c in 0..3 {
                let v = rgb.data()[(c * h + y) * w + x];
                canvas[px + c] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            }
            canvas[px + 3] = 255;
        }
    }
}

/// RGBA pixels, `2·size` wide and `size` tall: the amplified noisy capture
/// through the reference ISP on the left, the clean target on the right.
pub fn preview_rgba(seed: u64, size: usize, ratio: f32) -> Result<Vec<u8>> {
    if size == 0 || !size.is_multiple_of(2) || size > MAX_PREVIEW {
        return Err(fdanet::Error::Usage(format!("preview size must be even and in 2..={MAX_PREVIEW}, got {size}")));
    }
    let cfg = SynthConfig { seed, count: 1, height: size, width: size, ratios: vec![ratio], ..SynthConfig::default() };
    let pair = cfg.sample(0)?;
    let mut canvas = vec![0u8; 4 * 2 * size * size];
    to_rgba(&simple_isp(&pair.x)?, &mut canvas, 2 * size, 0);
    to_rgba(&pair.y_rgb, &mut canvas, 2 * size, size);
    Ok(canvas)
}

/// FLOPs report for a preset at a packed input size, as JSON.
pub fn flops_report(preset: &str, height: usize, width: usize, attention: &str) -> Result<String> {
    let config = match preset {
        "tiny" => ModelConfig::tiny(),
        "default" => ModelConfig::default(),
        other => return Err(fdanet::Error::Usage(format!("unknown preset `{other}`"))),
    };
    let kind: AttentionImpl = attention.parse()?;
    let model = Model::<f32>::build(config, 0)?;
    let report = count_flops(&model, &[1, 4, height, width], kind)?;
    Ok(serde_json::to_string(&report)?)
}

fn js(e: fdanet::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = traceStreaming)]
pub fn trace_streaming_js(
    height: usize,
    width: usize,
    channels: usize,
    h: usize,
    seed: u32,
) -> Result<String, JsError> {
    let trace = trace_streaming(height, width, channels, h, seed as u64).map_err(js)?;
    serde_json::to_string(&trace).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = previewRgba)]
pub fn preview_rgba_js(seed: u32, size: usize, ratio: f32) -> Result<Vec<u8>, JsError> {
    preview_rgba(seed as u64, size, ratio).map_err(js)
}

#[wasm_bindgen(js_name = flopsReport)]
pub fn flops_report_js(preset: &str, height: usize, width: usize, attention: &str) -> Result<String, JsError> {
    flops_report(preset, height, width, attention).map_err(js)
}
