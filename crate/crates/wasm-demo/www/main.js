import init, { fringe_scan, throughput_curve, dimension_scan } from "./pkg/hdqrng_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// Draws series of {x, y} points on a canvas with simple linear axes.
// Each series is {points, color, line, dots}.
function plot(canvas, series, { xlabel, ylabel, xlog = false, xmin, xmax, ymin, ymax }) {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * dpr;
  canvas.height = h * dpr;
  const ctx = canvas.getContext("2d");
  ctx.scale(dpr, dpr);
  ctx.clearRect(0, 0, w, h);

  const tx = (x) => (xlog ? Math.log2(x) : x);
  const all = series.flatMap((s) => s.points).filter((p) => Number.isFinite(p.y));
  const x0 = xmin ?? Math.min(...all.map((p) => tx(p.x)));
  const x1 = xmax ?? Math.max(...all.map((p) => tx(p.x)));
  const y0 = ymin ?? Math.min(0, ...all.map((p) => p.y));
  const y1 = ymax ?? Math.max(...all.map((p) => p.y)) * 1.05;
  const m = { l: 64, r: 12, t: 10, b: 34 };
  const px = (x) => m.l + ((tx(x) - x0) / (x1 - x0 || 1)) * (w - m.l - m.r);
  const py = (y) => h - m.b - ((y - y0) / (y1 - y0 || 1)) * (h - m.t - m.b);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  ctx.beginPath();
  ctx.moveTo(m.l, m.t);
  ctx.lineTo(m.l, h - m.b);
  ctx.lineTo(w - m.r, h - m.b);
  ctx.stroke();
  for (let i = 0; i <= 4; i++) {
    const y = y0 + ((y1 - y0) * i) / 4;
    ctx.fillText(y.toPrecision(3), 4, py(y) + 4);
    const xv = x0 + ((x1 - x0) * i) / 4;
    ctx.fillText(xlog ? String(Math.round(2 ** xv)) : xv.toPrecision(3), px(xlog ? 2 ** xv : xv) - 10, h - m.b + 14);
  }
  ctx.fillText(xlabel, w / 2 - 30, h - 4);
  ctx.save();
  ctx.translate(12, h / 2 + 30);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(ylabel, 0, 0);
  ctx.restore();

  for (const s of series) {
    const pts = s.points.filter((p) => Number.isFinite(p.y));
    ctx.strokeStyle = ctx.fillStyle = s.color;
    if (s.line && pts.length) {
      ctx.beginPath();
      pts.forEach((p, i) => (i ? ctx.lineTo(px(p.x), py(p.y)) : ctx.moveTo(px(p.x), py(p.y))));
      ctx.stroke();
    }
    if (s.dots) {
      for (const p of pts) {
        ctx.beginPath();
        ctx.arc(px(p.x), py(p.y), 3, 0, 2 * Math.PI);
        ctx.fill();
      }
    }
  }
}

// Runs a wasm export, reporting errors under the panel instead of throwing.
function guarded(outId, f) {
  return () => {
    const out = $(outId);
    out.classList.remove("err");
    try {
      f(out);
    } catch (e) {
      out.classList.add("err");
      out.textContent = String(e);
    }
  };
}

function runFringe(out) {
  const r = JSON.parse(fringe_scan(num("f-v"), num("f-rate"), num("f-points"), num("f-dur"), BigInt(num("f-seed"))));
  const { visibility: v, stderr, amplitude: a, phase_offset: phi0 } = r.fit;
  const fit = [];
  for (let i = 0; i <= 200; i++) {
    const x = (2 * Math.PI * i) / 200;
    fit.push({ x, y: a * (1 + v * Math.cos(x + phi0)) });
  }
  plot($("f-plot"), [
    { points: fit, color: "#888", line: true },
    { points: r.points.map((p) => ({ x: p.phase, y: p.coincidences })), color: "#1f5fbf", dots: true },
    { points: r.points.map((p) => ({ x: p.phase, y: p.accidentals })), color: "#c33", dots: true },
  ], { xlabel: "phase (rad)", ylabel: "coincidences", xmin: 0, xmax: 2 * Math.PI });
  out.textContent = `fitted V = ${v.toFixed(4)} ± ${stderr.toFixed(4)}   (blue: central peak, red: accidentals gate)`;
}

function runThroughput(out) {
  const r = JSON.parse(throughput_curve(num("t-v0"), num("t-nd"), num("t-rate"), num("t-max"), 120));
  const pts = r.points.map((p) => ({ x: p.duration_s, y: p.throughput_bps / 1e6 }));
  const asym = r.asymptote_bps / 1e6;
  plot($("t-plot"), [
    { points: pts, color: "#1f5fbf", line: true },
    { points: [{ x: pts[0].x, y: asym }, { x: pts[pts.length - 1].x, y: asym }], color: "#888", line: true },
  ], { xlabel: "collection time (s)", ylabel: "Mbit/s", ymin: 0, ymax: asym * 1.1 });
  const last = r.points[r.points.length - 1];
  out.textContent =
    `at ${last.duration_s} s: ${last.bits_per_sample.toFixed(3)} bits/sample, ` +
    `${(last.throughput_bps / 1e6).toFixed(2)} Mbit/s ` +
    `(${((100 * last.throughput_bps) / r.asymptote_bps).toFixed(1)}% of the ${asym.toFixed(2)} Mbit/s asymptote)`;
}

function runDimension(out) {
  const r = JSON.parse(dimension_scan(num("d-v0"), num("d-nt"), num("d-delta")));
  const ok = r.points.filter((p) => p.allowed);
  plot($("d-plot"), [
    { points: ok.map((p) => ({ x: p.n_d, y: p.h_min_asymptotic })), color: "#888", line: true, dots: true },
    { points: ok.map((p) => ({ x: p.n_d, y: p.h_min ?? NaN })), color: "#1f5fbf", line: true, dots: true },
  ], { xlabel: "N_d", ylabel: "bits per symbol", xlog: true, ymin: 0 });
  out.textContent = r.best_n_d
    ? `best N_d = ${r.best_n_d}: ${r.best_h_min.toFixed(3)} bits/symbol (grey: infinite data)`
    : "finite-size bound undefined for every alphabet at this sample size";
}

await init();
$("f-run").onclick = guarded("f-out", runFringe);
$("t-run").onclick = guarded("t-out", runThroughput);
$("d-run").onclick = guarded("d-out", runDimension);
$("t-run").click();
$("d-run").click();
