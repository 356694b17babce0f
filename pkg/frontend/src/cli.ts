#!/usr/bin/env node
/** Render simulator CSV artifacts to SVG figures.
 *
 * Usage:
 *   fastslow-figures <kind> <csv> <out.svg> [--overlay CSV] [--fit JSON] [--title TEXT]
 *   fastslow-figures --spec spec.json
 *
 * Kinds: samplepaths, ensemble_mean, histogram_vs_normal, convergence_table,
 * decay_fit.  Exits nonzero naming the missing file or column on bad input.
 */

import { readFileSync } from "fs";

import { FigureError, FigureSpec, KINDS, render } from "./figures";

export function parseArgs(argv: string[]): FigureSpec {
  const args = [...argv];
  const spec: Partial<FigureSpec> = {};
  const positional: string[] = [];
  while (args.length > 0) {
    const a = args.shift()!;
    if (a === "--spec") {
      const path = args.shift();
      if (!path) throw new FigureError("--spec requires a path");
      let parsed: Partial<FigureSpec>;
      try {
        parsed = JSON.parse(readFileSync(path, "utf-8"));
      } catch {
        throw new FigureError(`cannot read spec JSON "${path}"`);
      }
      Object.assign(spec, parsed);
    } else if (a === "--overlay") {
      spec.overlay = args.shift();
    } else if (a === "--fit") {
      spec.fit = args.shift();
    } else if (a === "--title") {
      spec.title = args.shift();
    } else if (a.startsWith("--")) {
      throw new FigureError(`unknown flag ${a}`);
    } else {
      positional.push(a);
    }
  }
  if (positional.length > 0) {
    if (positional.length !== 3) {
      throw new FigureError("positional usage: <kind> <csv> <out.svg>");
    }
    spec.kind = positional[0] as FigureSpec["kind"];
    spec.csv = positional[1];
    spec.out = positional[2];
  }
  if (!spec.kind || !spec.csv || !spec.out) {
    throw new FigureError("kind, csv, and out are required (flags or spec JSON)");
  }
  if (!KINDS.includes(spec.kind)) {
    throw new FigureError(
      `unknown figure kind "${spec.kind}"; expected one of ${KINDS.join(", ")}`
    );
  }
  return spec as FigureSpec;
}

export function main(argv: string[]): number {
  try {
    const spec = parseArgs(argv);
    render(spec);
    console.log(`wrote ${spec.out}`);
    return 0;
  } catch (err) {
    if (err instanceof FigureError) {
      console.error(`figure error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
