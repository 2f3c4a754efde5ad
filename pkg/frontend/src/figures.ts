/**
 * The five figure builders: experiment CSV rows in, SVG string out.
 */

import { FigureKind, NoDataError, Row, num } from "./csv.js";
import { Chart, DEFAULT_FRAME, PALETTE, Scale, colorRamp, extent, fmt } from "./svg.js";

const groupBy = (rows: Row[], key: (r: Row) => string): Map<string, Row[]> => {
  const out = new Map<string, Row[]>();
  for (const r of rows) {
    const k = key(r);
    if (!out.has(k)) out.set(k, []);
    out.get(k)!.push(r);
  }
  return out;
};

function makeChart(xKind: "linear" | "log", yKind: "linear" | "log", xd: [number, number], yd: [number, number]): Chart {
  const f = DEFAULT_FRAME;
  const x = new Scale(xKind, xd, [f.margin.left, f.width - f.margin.right]);
  const y = new Scale(yKind, yd, [f.height - f.margin.bottom, f.margin.top]);
  return new Chart(f, x, y);
}

/** Normalized-MSE convergence: theory lines, pooled empirical markers. */
export function renderSe(rows: Row[]): string {
  const ts = rows.map((r) => num(r, "t"));
  const ys = rows.flatMap((r) => [num(r, "se_mse"), num(r, "emp_mse_pooled")]);
  const chart = makeChart("linear", "log", extent(ts), extent(ys, true));
  chart.axes("AMP iteration t", "total normalized MSE", "State evolution vs simulation");
  const groups = groupBy(rows, (r) => `${r.scenario}/${r.denoiser_mode}`);
  const legend: Array<{ label: string; color: string; dash?: string; shape?: string }> = [];
  let i = 0;
  for (const [label, group] of groups) {
    const color = PALETTE[i++ % PALETTE.length];
    const sorted = [...group].sort((a, b) => num(a, "t") - num(b, "t"));
    chart.polyline(
      sorted.map((r) => [num(r, "t"), num(r, "se_mse")]),
      color,
      { cls: "series-theory" }
    );
    for (const r of sorted) {
      chart.marker(num(r, "t"), num(r, "emp_mse_pooled"), color, "circle", "series-empirical");
    }
    legend.push({ label: `${label} theory`, color });
    legend.push({ label: `${label} simulation`, color, shape: "circle" });
  }
  chart.legend(legend);
  return chart.render();
}

/** Missed-detection vs false-alarm tradeoff on log-log axes. */
export function renderRoc(rows: Row[]): string {
  const sweep = rows.filter((r) => r.kind === "sweep");
  const points = rows.filter((r) => r.kind === "equal_error");
  const positive = (r: Row) => num(r, "p_fa") > 0 && num(r, "p_md") > 0;
  const usable = sweep.filter(positive);
  if (usable.length === 0) {
    throw new NoDataError("ROC sweep has no strictly positive (p_fa, p_md) points to draw on log axes");
  }
  const xs = usable.map((r) => num(r, "p_fa"));
  const ys = usable.map((r) => num(r, "p_md"));
  const chart = makeChart("log", "log", extent(xs, true), extent(ys, true));
  chart.axes("false-alarm probability", "missed-detection probability", "Detection tradeoff");
  const groups = groupBy(usable, (r) => `${r.scenario}/${r.denoiser_mode}`);
  const legend: Array<{ label: string; color: string; shape?: string }> = [];
  let i = 0;
  const colorOf = new Map<string, string>();
  for (const [label, group] of groups) {
    const color = PALETTE[i++ % PALETTE.length];
    colorOf.set(label, color);
    const sorted = [...group].sort((a, b) => num(a, "p_fa") - num(b, "p_fa"));
    chart.polyline(
      sorted.map((r) => [num(r, "p_fa"), num(r, "p_md")]),
      color,
      { cls: "series-roc" }
    );
    legend.push({ label, color });
  }
  for (const r of points.filter(positive)) {
    const color = colorOf.get(`${r.scenario}/${r.denoiser_mode}`) ?? "#000";
    chart.marker(num(r, "p_fa"), num(r, "p_md"), color, "star", "equal-error");
  }
  if (points.length > 0) legend.push({ label: "equal-error point", color: "#000", shape: "star" });
  chart.legend(legend);
  return chart.render();
}

/** Position-error CDFs (quantile tables drawn as monotone step curves). */
export function renderPosCdf(rows: Row[]): string {
  const xs = rows.map((r) => num(r, "error_km")).filter((v) => v > 0);
  if (xs.length === 0) throw new NoDataError("all position errors are zero; nothing to draw on a log axis");
  const chart = makeChart("log", "linear", extent(xs, true), [0, 1]);
  chart.axes("position error [km]", "CDF", "Position-error CDF over detected messages");
  const groups = groupBy(rows, (r) => `${r.scenario}/${r.estimator}`);
  const legend: Array<{ label: string; color: string; dash?: string }> = [];
  let i = 0;
  for (const [label, group] of groups) {
    const color = PALETTE[i % PALETTE.length];
    const dash = label.endsWith("oracle") ? "5,4" : undefined;
    if (!label.endsWith("oracle")) i++;
    const sorted = [...group].sort((a, b) => num(a, "p") - num(b, "p"));
    const pts: Array<[number, number]> = [];
    for (const r of sorted) {
      const e = Math.max(num(r, "error_km"), chart.x.domain[0]);
      if (pts.length > 0) pts.push([e, pts[pts.length - 1][1]]); // horizontal step
      pts.push([e, num(r, "p")]);
    }
    chart.polyline(pts, color, { dash, cls: "series-cdf" });
    legend.push({ label, color, dash });
  }
  chart.legend(legend);
  return chart.render();
}

/** One location's MAP objective over its grid, with truth and estimate. */
export function renderSnapshot(rows: Row[]): string {
  const grid = rows.filter((r) => r.role === "grid");
  const vertices = rows.filter((r) => r.role === "vertex");
  const truth = rows.find((r) => r.role === "truth");
  const estimate = rows.find((r) => r.role === "estimate");
  const oracle = rows.find((r) => r.role === "oracle");
  if (grid.length === 0) throw new NoDataError("snapshot has no grid rows");
  if (vertices.length !== 3) throw new NoDataError(`expected 3 tile vertices, got ${vertices.length}`);
  if (!truth || !estimate) throw new NoDataError("snapshot needs truth and estimate rows");

  const all = [...grid, ...vertices, truth, estimate];
  const xs = all.map((r) => num(r, "x_km"));
  const ys = all.map((r) => num(r, "y_km"));
  const padX = (Math.max(...xs) - Math.min(...xs)) * 0.12 + 1e-6;
  const padY = (Math.max(...ys) - Math.min(...ys)) * 0.12 + 1e-6;
  const frame = { ...DEFAULT_FRAME, width: 560, height: 560 };
  const x = new Scale("linear", [Math.min(...xs) - padX, Math.max(...xs) + padX], [frame.margin.left, frame.width - frame.margin.right]);
  const y = new Scale("linear", [Math.min(...ys) - padY, Math.max(...ys) + padY], [frame.height - frame.margin.bottom, frame.margin.top]);
  const chart = new Chart(frame, x, y);
  chart.axes("x [km]", "y [km]", `Position posterior, location ${grid[0].location}`);

  chart.polyline(
    [...vertices, vertices[0]].map((r) => [num(r, "x_km"), num(r, "y_km")]),
    "#333",
    { width: 1.5, cls: "tile-outline" }
  );

  const objs = grid.map((r) => num(r, "objective"));
  const lo = Math.min(...objs);
  const hi = Math.max(...objs);
  const span = hi - lo || 1;
  // cell radius from the grid pitch (k^2 congruent cells in the tile)
  const side = Math.hypot(
    num(vertices[1], "x_km") - num(vertices[0], "x_km"),
    num(vertices[1], "y_km") - num(vertices[0], "y_km")
  );
  const k = Math.round(Math.sqrt(grid.length));
  const rPix = Math.abs(x.apply(side / k / 2.6) - x.apply(0));
  for (const r of grid) {
    const v = (num(r, "objective") - lo) / span;
    chart.parts.push(
      `<circle class="grid-cell" cx="${x.apply(num(r, "x_km")).toFixed(1)}" cy="${y
        .apply(num(r, "y_km"))
        .toFixed(1)}" r="${rPix.toFixed(1)}" fill="${colorRamp(v)}" stroke="#555" stroke-width="0.4"/>`
    );
  }
  chart.marker(num(truth, "x_km"), num(truth, "y_km"), "#d62728", "cross", "marker-truth");
  chart.marker(num(estimate, "x_km"), num(estimate, "y_km"), "#000", "diamond", "marker-estimate");
  if (oracle) chart.marker(num(oracle, "x_km"), num(oracle, "y_km"), "#666", "circle", "marker-oracle");
  chart.legend([
    { label: "true position", color: "#d62728", shape: "cross" },
    { label: "MAP estimate", color: "#000", shape: "diamond" },
    ...(oracle ? [{ label: "nearest grid point", color: "#666", shape: "circle" }] : []),
  ]);
  // colorbar
  const bx = frame.width - frame.margin.right - 18;
  for (let i = 0; i <= 40; i++) {
    const yy = chart.plotBottom - ((chart.plotBottom - chart.plotTop) * i) / 40;
    chart.parts.push(
      `<rect x="${bx}" y="${yy - 4}" width="10" height="5" fill="${colorRamp(i / 40)}"/>`
    );
  }
  chart.parts.push(
    `<text x="${bx - 4}" y="${chart.plotBottom}" text-anchor="end" font-size="10">${fmt(lo)}</text>`,
    `<text x="${bx - 4}" y="${chart.plotTop + 8}" text-anchor="end" font-size="10">${fmt(hi)}</text>`
  );
  return chart.render();
}

/** Channel-estimation MSE against receive SNR. */
export function renderChanMse(rows: Row[]): string {
  const xs = rows.map((r) => num(r, "snr_rx_db"));
  const ys = rows.map((r) => num(r, "mse"));
  const chart = makeChart("linear", "log", extent(xs), extent(ys, true));
  chart.axes("receive SNR [dB]", "channel MSE per component", "Channel estimation: AMP vs genie-aided MMSE");
  const groups = groupBy(rows, (r) => r.estimator);
  const shapes = ["circle", "square", "diamond", "cross"] as const;
  const legend: Array<{ label: string; color: string; shape?: string }> = [];
  let i = 0;
  for (const [label, group] of groups) {
    const color = PALETTE[i % PALETTE.length];
    const shape = shapes[i % shapes.length];
    i++;
    const sorted = [...group].sort((a, b) => num(a, "snr_rx_db") - num(b, "snr_rx_db"));
    chart.polyline(
      sorted.map((r) => [num(r, "snr_rx_db"), num(r, "mse")]),
      color,
      { cls: "series-chanmse" }
    );
    for (const r of sorted) chart.marker(num(r, "snr_rx_db"), num(r, "mse"), color, shape);
    legend.push({ label, color, shape });
  }
  chart.legend(legend);
  return chart.render();
}

export const BUILDERS: Record<FigureKind, (rows: Row[]) => string> = {
  se: renderSe,
  roc: renderRoc,
  poscdf: renderPosCdf,
  snapshot: renderSnapshot,
  chanmse: renderChanMse,
};
