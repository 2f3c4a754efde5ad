import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { NoDataError, SchemaError, parseCsv } from "../src/csv.js";
import { BUILDERS, renderPosCdf, renderRoc, renderSnapshot } from "../src/figures.js";

const fixture = (name: string) =>
  readFileSync(join(__dirname, "fixtures", name), "utf-8");

const load = (name: string, kind: Parameters<typeof parseCsv>[1]) =>
  parseCsv(fixture(name), kind, name);

describe("schema validation", () => {
  it("accepts the real runner outputs", () => {
    expect(load("se_compare.csv", "se").length).toBeGreaterThan(0);
    expect(load("roc.csv", "roc").length).toBeGreaterThan(0);
    expect(load("position_cdf.csv", "poscdf").length).toBeGreaterThan(0);
    expect(load("position_snapshot.csv", "snapshot").length).toBeGreaterThan(0);
    expect(load("channel_mse.csv", "chanmse").length).toBeGreaterThan(0);
  });

  it("names the missing columns on a mismatched table", () => {
    expect(() => parseCsv(fixture("roc.csv"), "se")).toThrowError(SchemaError);
    try {
      parseCsv(fixture("roc.csv"), "se", "roc.csv");
    } catch (e) {
      expect((e as Error).message).toContain("se_mse");
      expect((e as Error).message).toContain("emp_mse_pooled");
    }
  });

  it("rejects an empty-but-valid table with an explicit no-data error", () => {
    const headerOnly = "snr_rx_db,estimator,mse,runs,manifest_hash\n";
    expect(() => parseCsv(headerOnly, "chanmse")).toThrowError(NoDataError);
  });
});

describe("figure builders", () => {
  it("renders all five kinds from the fixtures without error", () => {
    const inputs = {
      se: "se_compare.csv",
      roc: "roc.csv",
      poscdf: "position_cdf.csv",
      snapshot: "position_snapshot.csv",
      chanmse: "channel_mse.csv",
    } as const;
    for (const [kind, file] of Object.entries(inputs)) {
      const svg = BUILDERS[kind as keyof typeof BUILDERS](
        load(file, kind as keyof typeof inputs)
      );
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg.length).toBeGreaterThan(500);
    }
  });

  it("draws the ROC on log-log axes", () => {
    const svg = renderRoc(load("roc.csv", "roc"));
    expect(svg).toContain('data-x-scale="log"');
    expect(svg).toContain('data-y-scale="log"');
  });

  it("gives the se figure one theory line and one marker set per variant", () => {
    const svg = BUILDERS.se(load("se_compare.csv", "se"));
    const theory = svg.match(/class="series-theory"/g) ?? [];
    expect(theory.length).toBe(2); // lb/matched and lb/mismatched in the fixture
    expect(svg).toContain('class="series-empirical"');
  });

  it("draws monotone CDF polylines", () => {
    const svg = renderPosCdf(load("position_cdf.csv", "poscdf"));
    const lines = [...svg.matchAll(/<polyline class="series-cdf" points="([^"]+)"/g)];
    expect(lines.length).toBeGreaterThan(0);
    for (const m of lines) {
      const ys = m[1].split(" ").map((p) => Number(p.split(",")[1]));
      for (let i = 1; i < ys.length; i++) {
        expect(ys[i]).toBeLessThanOrEqual(ys[i - 1] + 1e-9); // pixel y falls as CDF rises
      }
    }
  });

  it("renders one colored cell per grid point plus truth and estimate markers", () => {
    const svg = renderSnapshot(load("position_snapshot.csv", "snapshot"));
    const cells = svg.match(/class="grid-cell"/g) ?? [];
    expect(cells.length).toBe(16); // k=4 fixture
    expect(svg).toContain('class="marker-truth"');
    expect(svg).toContain('class="marker-estimate"');
    expect(svg).toContain('class="tile-outline"');
    const fills = new Set(
      [...svg.matchAll(/class="grid-cell"[^/]*fill="(rgb\([^)]+\))"/g)].map((m) => m[1])
    );
    expect(fills.size).toBeGreaterThan(3); // a genuine gradient, not one color
  });

  it("fails loudly when the snapshot has no grid rows", () => {
    const rows = load("position_snapshot.csv", "snapshot").filter((r) => r.role !== "grid");
    const text = [
      "role,location,message,grid_index,x_km,y_km,objective",
      ...rows.map(
        (r) =>
          `${r.role},${r.location},${r.message},${r.grid_index},${r.x_km},${r.y_km},${r.objective}`
      ),
    ].join("\n");
    expect(() => renderSnapshot(parseCsv(text, "snapshot"))).toThrowError(NoDataError);
  });
});
