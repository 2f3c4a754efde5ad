#!/usr/bin/env node
/**
 * render --kind {se,roc,poscdf,snapshot,chanmse} --in data.csv --out fig.svg
 *
 * The output format follows the extension: .svg (native), .png (via sharp),
 * .pdf (via pdfkit).  Multiple --in files of the same kind are concatenated.
 */

import { createWriteStream, writeFileSync } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { FigureKind, NoDataError, SCHEMAS, SchemaError, loadCsv } from "./csv.js";
import { BUILDERS } from "./figures.js";

async function writeOut(svg: string, out: string): Promise<void> {
  if (out.endsWith(".svg")) {
    writeFileSync(out, svg);
    return;
  }
  if (out.endsWith(".png")) {
    const sharp = (await import("sharp")).default;
    const buf = await sharp(Buffer.from(svg), { density: 144 }).png().toBuffer();
    writeFileSync(out, buf);
    return;
  }
  if (out.endsWith(".pdf")) {
    const PDFDocument = (await import("pdfkit")).default;
    const SVGtoPDF = (await import("svg-to-pdfkit")).default;
    const m = svg.match(/width="(\d+)" height="(\d+)"/);
    const size: [number, number] = m ? [Number(m[1]), Number(m[2])] : [640, 480];
    const doc = new PDFDocument({ size });
    const stream = doc.pipe(createWriteStream(out));
    SVGtoPDF(doc, svg, 0, 0);
    doc.end();
    await new Promise<void>((resolve, reject) => {
      stream.on("finish", () => resolve());
      stream.on("error", reject);
    });
    return;
  }
  throw new Error(`unsupported output extension on ${out} (use .svg, .png or .pdf)`);
}

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .command("render", "render one figure from experiment CSVs")
    .option("kind", {
      choices: Object.keys(SCHEMAS) as FigureKind[],
      demandOption: true,
      describe: "figure type",
    })
    .option("in", {
      type: "string",
      array: true,
      demandOption: true,
      describe: "input CSV path(s)",
    })
    .option("out", { type: "string", demandOption: true, describe: "output image path" })
    .demandCommand(1)
    .strict()
    .parse();

  try {
    const rows = loadCsv(args.in as string[], args.kind as FigureKind);
    const svg = BUILDERS[args.kind as FigureKind](rows);
    await writeOut(svg, args.out as string);
    console.log(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${(err as Error).message}`);
      return 2;
    }
    if (err instanceof NoDataError) {
      console.error(`no data: ${(err as Error).message}`);
      return 3;
    }
    throw err;
  }
}

const invokedDirectly = process.argv[1] && process.argv[1].endsWith("cli.js");
if (invokedDirectly) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
