// Expects the wasm-bindgen output (`--target web`) in ./pkg.
import init, { traceStreaming, previewRgba, flopsReport } from "./pkg/fdanet_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function report(el, f) {
  try {
    f();
  } catch (e) {
    el.textContent = String(e);
  }
}

let trace = null;

function drawTrace() {
  if (!trace) return;
  const step = num("s-step");
  const done = new Set();
  for (const s of trace.steps.slice(0, step + 1)) s.emitted.forEach((r) => done.add(r));
  if (step === trace.steps.length - 1) trace.flushed.forEach((r) => done.add(r));
  const held = trace.steps[step].occupancy;
  const rows = $("s-rows");
  rows.replaceChildren();
  for (let r = 0; r < trace.steps.length; r++) {
    const cell = document.createElement("span");
    cell.textContent = r;
    if (done.has(r)) cell.className = "done";
    else if (r <= step && r > step - held) cell.className = "held";
    rows.append(cell);
  }
  const s = trace.steps[step];
  $("s-out").textContent =
    `after row ${s.row}: ${s.occupancy} aggregates held, ${s.kv_state} numbers of K/V state\n` +
    `peak ${trace.stats.peak_kv_state} (bound ${trace.bound}), first output after row ${trace.stats.first_emit_after_row}\n` +
    `max |streaming - naive| = ${trace.max_abs_diff_vs_naive.toExponential(2)}, ` +
    `identical to linear: ${trace.bitwise_equal_to_linear}`;
}

function runTrace() {
  report($("s-out"), () => {
    trace = JSON.parse(traceStreaming(num("s-h"), num("s-w"), num("s-c"), num("s-win"), num("s-h") * 31 + 7));
    $("s-step").max = trace.steps.length - 1;
    $("s-step").value = 0;
    drawTrace();
  });
}

function runPreview() {
  const canvas = $("p-canvas");
  const size = num("p-size");
  try {
    const px = previewRgba(num("p-seed"), size, Number($("p-ratio").value));
    canvas.width = 2 * size;
    canvas.height = size;
    canvas.style.width = `${Math.max(2 * size, 512)}px`;
    canvas.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(px), 2 * size, size), 0, 0);
  } catch (e) {
    alert(String(e));
  }
}

function runFlops() {
  report($("f-out"), () => {
    const r = JSON.parse(flopsReport($("f-preset").value, num("f-h"), num("f-w"), $("f-attn").value));
    const lines = r.blocks.map(
      (b) => `${b.name.padEnd(14)} ${b.branch.padEnd(11)} ${String(b.macs).padStart(12)} ${b.in_infer ? "" : "(train only)"}`,
    );
    lines.push(
      "",
      `train MACs      ${r.train_macs}`,
      `inference MACs  ${r.infer_macs} (${(100 * r.infer_macs / r.train_macs).toFixed(1)}% of train)`,
      `raw decoder     ${(100 * r.raw_decoder_share).toFixed(1)}% of train`,
      `parameters      ${r.params_total} total, ${r.params_infer} at inference`,
    );
    $("f-out").textContent = lines.join("\n");
  });
}

await init();
$("s-run").onclick = runTrace;
$("s-step").oninput = drawTrace;
$("p-run").onclick = runPreview;
$("f-run").onclick = runFlops;
runTrace();
runPreview();
runFlops();
