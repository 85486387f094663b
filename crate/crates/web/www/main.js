import init, { planeWave, driftComparison, freeStreaming } from "./pkg/dke_web.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, xs, series, range) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.ys);
  let [lo, hi] = range || [Math.min(...all), Math.max(...all)];
  if (hi - lo < 1e-12) { lo -= 1; hi += 1; }
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const px = (x) => ((x - x0) / (x1 - x0 || 1)) * (w - 20) + 10;
  const py = (y) => h - 10 - ((y - lo) / (hi - lo)) * (h - 20);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.width || 1.5;
    ctx.beginPath();
    xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.ys[i])) : ctx.moveTo(px(x), py(s.ys[i]))));
    ctx.stroke();
  }
}

function columns(flat, width) {
  const cols = Array.from({ length: width }, () => []);
  flat.forEach((v, i) => cols[i % width].push(v));
  return cols;
}

function guard(fn) {
  try { fn(); $("status").textContent = ""; }
  catch (e) { $("status").textContent = String(e); }
}

function drawPlaneWave() {
  guard(() => {
    const k = Number($("pw-k").value);
    $("pw-kval").textContent = `k = ${k.toFixed(2)}`;
    const rows = planeWave(1.0, Number($("pw-cells").value), Number($("pw-nmax").value), k, 800);
    const [x, re, reRec] = columns(rows, 5);
    plot($("pw-canvas"), x, [{ ys: re, color: "#888", width: 3 }, { ys: reRec, color: "#c33" }]);
  });
}

function drawDrift() {
  guard(() => {
    const rows = driftComparison(Number($("dr-points").value), Number($("dr-sigma").value));
    const [k, exact, periodic, truncated, spectral] = columns(rows, 5);
    const err = (a) => Math.max(...a.map((v, i) => Math.abs(v - spectral[i])));
    $("dr-err").textContent =
      `max |stencil - spectral|: periodic ${err(periodic).toExponential(2)}, truncated ${err(truncated).toExponential(2)}`;
    plot($("dr-canvas"), k, [
      { ys: exact, color: "#888", width: 3 },
      { ys: periodic, color: "#36c" },
      { ys: truncated, color: "#c33" },
    ]);
  });
}

function runStreaming() {
  guard(() => {
    const cells = Number($("fs-cells").value);
    const frames = 60;
    const data = freeStreaming(cells, Number($("fs-col").value), Number($("fs-sigma").value), cells / 8, frames);
    const xs = Array.from({ length: cells }, (_, m) => m);
    let f = 0;
    const tick = () => {
      const ys = Array.from(data.slice(f * cells, (f + 1) * cells));
      plot($("fs-canvas"), xs, [{ ys: xs.map(() => 0.2), color: "#ccc" }, { ys, color: "#36c" }], [0.1, 0.8]);
      if (++f <= frames) requestAnimationFrame(tick);
    };
    tick();
  });
}

await init();
for (const id of ["pw-cells", "pw-nmax", "pw-k"]) $(id).addEventListener("input", drawPlaneWave);
for (const id of ["dr-points", "dr-sigma"]) $(id).addEventListener("input", drawDrift);
$("fs-run").addEventListener("click", runStreaming);
drawPlaneWave();
drawDrift();
runStreaming();
