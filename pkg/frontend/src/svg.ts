/**
 * Minimal SVG chart toolkit: scales, axes, series primitives.
 *
 * Charts are built as plain strings; no DOM, fully deterministic output.
 */

export interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
}

export const DEFAULT_FRAME: Frame = {
  width: 640,
  height: 480,
  margin: { top: 40, right: 30, bottom: 56, left: 78 },
};

export type ScaleKind = "linear" | "log";

export class Scale {
  constructor(
    public kind: ScaleKind,
    public domain: [number, number],
    public range: [number, number]
  ) {
    if (kind === "log" && (domain[0] <= 0 || domain[1] <= 0)) {
      throw new Error(`log scale needs a positive domain, got [${domain}]`);
    }
  }

  apply(v: number): number {
    const [d0, d1] = this.domain;
    const [r0, r1] = this.range;
    const t =
      this.kind === "log"
        ? (Math.log10(v) - Math.log10(d0)) / (Math.log10(d1) - Math.log10(d0))
        : (v - d0) / (d1 - d0);
    return r0 + t * (r1 - r0);
  }

  ticks(count = 6): number[] {
    const [d0, d1] = this.domain;
    if (this.kind === "log") {
      const lo = Math.ceil(Math.log10(d0) - 1e-9);
      const hi = Math.floor(Math.log10(d1) + 1e-9);
      const out: number[] = [];
      for (let e = lo; e <= hi; e++) out.push(10 ** e);
      return out.length >= 2 ? out : [d0, d1];
    }
    const step = niceStep((d1 - d0) / Math.max(count - 1, 1));
    const out: number[] = [];
    for (let v = Math.ceil(d0 / step) * step; v <= d1 + 1e-12; v += step) {
      out.push(Number(v.toPrecision(12)));
    }
    return out;
  }
}

function niceStep(raw: number): number {
  const mag = 10 ** Math.floor(Math.log10(raw));
  const norm = raw / mag;
  const nice = norm <= 1 ? 1 : norm <= 2 ? 2 : norm <= 5 ? 5 : 10;
  return nice * mag;
}

export function extent(values: number[], positiveOnly = false): [number, number] {
  const vals = positiveOnly ? values.filter((v) => v > 0) : values;
  if (vals.length === 0) throw new Error("no finite values to scale");
  let lo = Math.min(...vals);
  let hi = Math.max(...vals);
  if (lo === hi) {
    lo = positiveOnly ? lo / 2 : lo - 1;
    hi = hi + (positiveOnly ? hi / 2 : 1);
  }
  return [lo, hi];
}

export const fmt = (v: number): string => {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) return String(Number(v.toPrecision(4)));
  return v.toExponential(0).replace("e", "e");
};

const esc = (s: string) => s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export class Chart {
  parts: string[] = [];
  constructor(
    public frame: Frame,
    public x: Scale,
    public y: Scale
  ) {}

  get plotLeft() {
    return this.frame.margin.left;
  }
  get plotRight() {
    return this.frame.width - this.frame.margin.right;
  }
  get plotTop() {
    return this.frame.margin.top;
  }
  get plotBottom() {
    return this.frame.height - this.frame.margin.bottom;
  }

  axes(xLabel: string, yLabel: string, title: string) {
    const p: string[] = [];
    p.push(
      `<rect x="${this.plotLeft}" y="${this.plotTop}" width="${this.plotRight - this.plotLeft}" height="${this.plotBottom - this.plotTop}" fill="none" stroke="#333"/>`
    );
    for (const t of this.x.ticks()) {
      const px = this.x.apply(t);
      p.push(`<line x1="${px.toFixed(1)}" y1="${this.plotBottom}" x2="${px.toFixed(1)}" y2="${this.plotBottom + 5}" stroke="#333"/>`);
      p.push(
        `<text x="${px.toFixed(1)}" y="${this.plotBottom + 20}" text-anchor="middle" font-size="12" class="tick-x">${fmt(t)}</text>`
      );
      p.push(
        `<line x1="${px.toFixed(1)}" y1="${this.plotTop}" x2="${px.toFixed(1)}" y2="${this.plotBottom}" stroke="#ddd" stroke-dasharray="3,4"/>`
      );
    }
    for (const t of this.y.ticks()) {
      const py = this.y.apply(t);
      p.push(`<line x1="${this.plotLeft - 5}" y1="${py.toFixed(1)}" x2="${this.plotLeft}" y2="${py.toFixed(1)}" stroke="#333"/>`);
      p.push(
        `<text x="${this.plotLeft - 8}" y="${(py + 4).toFixed(1)}" text-anchor="end" font-size="12" class="tick-y">${fmt(t)}</text>`
      );
      p.push(
        `<line x1="${this.plotLeft}" y1="${py.toFixed(1)}" x2="${this.plotRight}" y2="${py.toFixed(1)}" stroke="#ddd" stroke-dasharray="3,4"/>`
      );
    }
    const cx = (this.plotLeft + this.plotRight) / 2;
    p.push(`<text x="${cx}" y="${this.frame.height - 12}" text-anchor="middle" font-size="14">${esc(xLabel)}</text>`);
    p.push(
      `<text x="20" y="${(this.plotTop + this.plotBottom) / 2}" text-anchor="middle" font-size="14" transform="rotate(-90 20 ${(this.plotTop + this.plotBottom) / 2})">${esc(yLabel)}</text>`
    );
    p.push(`<text x="${cx}" y="24" text-anchor="middle" font-size="16" font-weight="bold">${esc(title)}</text>`);
    this.parts.push(...p);
  }

  polyline(pts: Array<[number, number]>, stroke: string, opts: { dash?: string; width?: number; cls?: string } = {}) {
    if (pts.length === 0) return;
    const d = pts.map(([x, y]) => `${this.x.apply(x).toFixed(2)},${this.y.apply(y).toFixed(2)}`).join(" ");
    const dash = opts.dash ? ` stroke-dasharray="${opts.dash}"` : "";
    const cls = opts.cls ? ` class="${opts.cls}"` : "";
    this.parts.push(
      `<polyline${cls} points="${d}" fill="none" stroke="${stroke}" stroke-width="${opts.width ?? 1.8}"${dash}/>`
    );
  }

  marker(x: number, y: number, color: string, shape: "circle" | "square" | "diamond" | "cross" | "star", cls = "") {
    const px = this.x.apply(x);
    const py = this.y.apply(y);
    this.markerAt(px, py, color, shape, cls);
  }

  markerAt(px: number, py: number, color: string, shape: string, cls = "") {
    const c = cls ? ` class="${cls}"` : "";
    const s = 5;
    switch (shape) {
      case "circle":
        this.parts.push(`<circle${c} cx="${px.toFixed(1)}" cy="${py.toFixed(1)}" r="4" fill="${color}"/>`);
        break;
      case "square":
        this.parts.push(
          `<rect${c} x="${(px - s + 1).toFixed(1)}" y="${(py - s + 1).toFixed(1)}" width="${2 * s - 2}" height="${2 * s - 2}" fill="${color}"/>`
        );
        break;
      case "diamond":
        this.parts.push(
          `<polygon${c} points="${px},${py - s - 2} ${px + s + 2},${py} ${px},${py + s + 2} ${px - s - 2},${py}" fill="${color}"/>`
        );
        break;
      case "cross":
        this.parts.push(
          `<path${c} d="M${px - s},${py - s} L${px + s},${py + s} M${px - s},${py + s} L${px + s},${py - s}" stroke="${color}" stroke-width="2.5" fill="none"/>`
        );
        break;
      case "star":
        this.parts.push(
          `<path${c} d="M${px},${py - s - 2} L${px},${py + s + 2} M${px - s - 2},${py} L${px + s + 2},${py} M${px - s},${py - s} L${px + s},${py + s} M${px - s},${py + s} L${px + s},${py - s}" stroke="${color}" stroke-width="2" fill="none"/>`
        );
        break;
    }
  }

  legend(entries: Array<{ label: string; color: string; dash?: string; shape?: string }>) {
    let y = this.plotTop + 14;
    const x = this.plotLeft + 12;
    for (const e of entries) {
      const dash = e.dash ? ` stroke-dasharray="${e.dash}"` : "";
      if (e.shape) {
        this.markerAt(x + 12, y - 4, e.color, e.shape);
      } else {
        this.parts.push(`<line x1="${x}" y1="${y - 4}" x2="${x + 24}" y2="${y - 4}" stroke="${e.color}" stroke-width="2"${dash}/>`);
      }
      this.parts.push(`<text x="${x + 30}" y="${y}" font-size="12">${esc(e.label)}</text>`);
      y += 17;
    }
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.frame.width}" height="${this.frame.height}" ` +
      `data-x-scale="${this.x.kind}" data-y-scale="${this.y.kind}">\n` +
      `<rect width="${this.frame.width}" height="${this.frame.height}" fill="white"/>\n` +
      this.parts.join("\n") +
      `\n</svg>\n`
    );
  }
}

/** Two-anchor perceptual ramp (dark blue -> yellow), v in [0, 1]. */
export function colorRamp(v: number): string {
  const t = Math.min(1, Math.max(0, v));
  const stops: Array<[number, [number, number, number]]> = [
    [0.0, [68, 1, 84]],
    [0.33, [49, 104, 142]],
    [0.66, [53, 183, 121]],
    [1.0, [253, 231, 37]],
  ];
  let lo = stops[0];
  let hi = stops[stops.length - 1];
  for (let i = 0; i < stops.length - 1; i++) {
    if (t >= stops[i][0] && t <= stops[i + 1][0]) {
      lo = stops[i];
      hi = stops[i + 1];
      break;
    }
  }
  const f = hi[0] === lo[0] ? 0 : (t - lo[0]) / (hi[0] - lo[0]);
  const rgb = lo[1].map((c, i) => Math.round(c + f * (hi[1][i] - c)));
  return `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;
}

export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
