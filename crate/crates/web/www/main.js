import init, { scan, ladle, bandwidth } from "./pkg/dpdr_web.js";

const $ = (id) => document.getElementById(id);
const NS = "http://www.w3.org/2000/svg";
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"];

function inputs() {
  return {
    model: $("model").value,
    n: Number($("n").value),
    p: Number($("p").value),
    seed: Number($("seed").value),
    method: $("method").value,
    h: Number($("h").value),
  };
}

function el(name, attrs, parent) {
  const node = document.createElementNS(NS, name);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  parent.appendChild(node);
  return node;
}

// Line chart; series = [{name, xs, ys, dots}]. Null y values break the line.
function chart(svg, series, { title, xlog = false, ymin, ymax } = {}) {
  svg.replaceChildren();
  const W = +svg.getAttribute("width"), H = +svg.getAttribute("height");
  const m = { l: 48, r: 10, t: 22, b: 28 };
  const fx = xlog ? Math.log : (v) => v;
  const xs = series.flatMap((s) => s.xs.map(fx));
  const ys = series.flatMap((s) => s.ys.filter((v) => v !== null && Number.isFinite(v)));
  if (!xs.length || !ys.length) return;
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  let y0 = ymin ?? Math.min(...ys), y1 = ymax ?? Math.max(...ys);
  if (y1 === y0) { y0 -= 1; y1 += 1; }
  const sx = (v) => m.l + ((fx(v) - x0) / (x1 - x0 || 1)) * (W - m.l - m.r);
  const sy = (v) => H - m.b - ((v - y0) / (y1 - y0)) * (H - m.t - m.b);
  el("text", { x: m.l, y: 15, "font-size": 13 }, svg).textContent = title ?? "";
  el("line", { x1: m.l, y1: H - m.b, x2: W - m.r, y2: H - m.b, stroke: "#999" }, svg);
  el("line", { x1: m.l, y1: m.t, x2: m.l, y2: H - m.b, stroke: "#999" }, svg);
  for (const v of [y0, (y0 + y1) / 2, y1]) {
    el("text", { x: 4, y: sy(v) + 4, "font-size": 10 }, svg).textContent = v.toPrecision(3);
  }
  const xticks = [series[0].xs[0], series[0].xs[series[0].xs.length - 1]];
  for (const v of xticks) {
    el("text", { x: sx(v) - 10, y: H - 10, "font-size": 10 }, svg).textContent = v.toPrecision(3);
  }
  series.forEach((s, i) => {
    const color = s.color ?? COLORS[i % COLORS.length];
    let d = "";
    let pen = false;
    s.xs.forEach((x, k) => {
      const y = s.ys[k];
      if (y === null || !Number.isFinite(y)) { pen = false; return; }
      d += `${pen ? "L" : "M"}${sx(x).toFixed(1)},${sy(y).toFixed(1)}`;
      pen = true;
      if (s.dots) el("circle", { cx: sx(x), cy: sy(y), r: 3, fill: color }, svg);
    });
    el("path", { d, fill: "none", stroke: color, "stroke-width": 1.5 }, svg);
    el("text", { x: W - m.r - 90, y: m.t + 12 * (i + 1), "font-size": 10, fill: color }, svg).textContent = s.name;
  });
}

// Grouped bars of basis coordinates.
function bars(svg, groups, title) {
  svg.replaceChildren();
  const W = +svg.getAttribute("width"), H = +svg.getAttribute("height");
  const m = { l: 30, r: 10, t: 22, b: 24 };
  el("text", { x: m.l, y: 15, "font-size": 13 }, svg).textContent = title;
  const p = groups[0]?.values.length ?? 0;
  if (!p) return;
  const slot = (W - m.l - m.r) / p;
  const bw = slot / (groups.length + 1);
  const mid = (H - m.t - m.b) / 2 + m.t;
  const scale = (H - m.t - m.b) / 2;
  el("line", { x1: m.l, y1: mid, x2: W - m.r, y2: mid, stroke: "#999" }, svg);
  groups.forEach((g, gi) => {
    g.values.forEach((v, j) => {
      const x = m.l + j * slot + gi * bw + bw / 2;
      const y = v >= 0 ? mid - v * scale : mid;
      el("rect", { x, y, width: bw * 0.9, height: Math.abs(v) * scale, fill: COLORS[gi % COLORS.length] }, svg);
    });
    el("text", { x: W - m.r - 120, y: m.t + 12 * (gi + 1), "font-size": 10, fill: COLORS[gi % COLORS.length] }, svg)
      .textContent = g.name;
  });
  for (let j = 0; j < p; j++) {
    el("text", { x: m.l + j * slot + slot / 2 - 6, y: H - 8, "font-size": 10 }, svg).textContent = `x${j + 1}`;
  }
}

function guard(fn) {
  return () => {
    $("error").textContent = "";
    try {
      fn();
    } catch (e) {
      $("error").textContent = String(e.message ?? e);
    }
  };
}

function runScan() {
  const a = inputs();
  const r = JSON.parse(scan(a.model, a.n, a.p, a.seed, a.method, a.h, 41));
  const ws = r.points.map((pt) => pt.w[0]);
  $("scan-info").textContent = `h = ${r.h.toPrecision(3)}` + (r.points[0].w.length > 1 ? ", w2 = 0" : "");
  chart($("scan-r2"), [
    { name: "trace corr.", xs: ws, ys: r.points.map((pt) => pt.r2) },
    { name: "true d / p", xs: ws, ys: r.points.map((pt) => pt.d_true / a.p), color: "#aaa" },
  ], { title: "trace correlation at the true d", ymin: 0, ymax: 1 });
  const k = Math.min(4, a.p);
  chart($("scan-sv"), Array.from({ length: k }, (_, j) => ({
    name: `λ${j + 1}`,
    xs: ws,
    ys: r.points.map((pt) => pt.singular_values[j] ?? null),
  })), { title: "leading singular values" });
}

function runLadle() {
  const a = inputs();
  const w = Number($("w").value);
  const r = JSON.parse(ladle(a.model, a.n, a.p, a.seed, a.method, a.h, w, Number($("b").value)));
  $("ladle-info").textContent =
    `d̂ = ${r.d_hat}, true d = ${r.d_true}` + (r.r2 === null ? "" : `, trace corr. ${r.r2.toFixed(3)}`);
  chart($("ladle-plot"), [
    { name: "g = f + φ", xs: r.ks, ys: r.g, dots: true },
    { name: "f (bootstrap)", xs: r.ks, ys: r.f, dots: true },
    { name: "φ (spectrum)", xs: r.ks, ys: r.phi, dots: true },
  ], { title: "ladle objective over k", ymin: 0 });
  const groups = [];
  r.true_basis.forEach((v, j) => groups.push({ name: `true β${j + 1}`, values: v }));
  r.basis.forEach((v, j) => groups.push({ name: `estimated β${j + 1}`, values: v }));
  bars($("basis-plot"), groups, "directions");
}

function runBandwidth() {
  const a = inputs();
  const r = JSON.parse(bandwidth(a.model, a.n, a.p, a.seed, a.method));
  $("bw-info").textContent = `h_opt = ${r.h_opt.toPrecision(3)}, rule of thumb ${r.h_rot.toPrecision(3)}`;
  chart($("bw-plot"), r.per_slice_cv.map((row, l) => ({
    name: `slice ${l + 1}`,
    xs: r.grid,
    ys: row,
    dots: true,
  })), { title: "leave-one-out CV per slice (log h)", xlog: true });
}

await init();
$("w").addEventListener("input", () => { $("w-val").textContent = $("w").value; });
$("run-scan").addEventListener("click", guard(runScan));
$("run-ladle").addEventListener("click", guard(runLadle));
$("run-bw").addEventListener("click", guard(runBandwidth));
guard(runScan)();
