#!/usr/bin/env node
/**
 * oddflow-plot — static SVG plots from solver output files.
 *
 *   oddflow-plot energy      --in out/diag.csv            --out energy.svg
 *   oddflow-plot residual-dt --in out/residual_vs_dt.csv  --out order.svg
 *   oddflow-plot sweep       --in out/sweep.csv           --out sweep.svg
 *   oddflow-plot spectra     --in out/lp.csv --snapshots out/ --out spectra.svg
 *   oddflow-plot stability   --in out/stability.csv --meta out/run_meta.json --out twin.svg
 *
 * One job per invocation.  Fitted slopes and annotations go to stdout.
 */

import yargs from "yargs";

import { PLOT_KINDS, PlotJob, PlotKind, render } from "./plots";

export function runCli(argv: string[]): number {
  const args = yargs(argv)
    .usage("$0 <kind> --in <csv> --out <svg>")
    .command("$0 <kind>", "render one plot", (y) =>
      y.positional("kind", {
        describe: "plot kind",
        choices: PLOT_KINDS,
        type: "string",
      })
    )
    .option("in", { type: "string", demandOption: true, describe: "input CSV path" })
    .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
    .option("snapshots", { type: "string", describe: "snapshot directory (spectra)" })
    .option("meta", { type: "string", describe: "run_meta.json with the pass flag (stability)" })
    .option("title", { type: "string", describe: "plot title override" })
    .strict()
    .exitProcess(false)
    .parseSync();

  const job: PlotJob = {
    kind: args.kind as PlotKind,
    input: args.in,
    out: args.out,
    snapshotsDir: args.snapshots,
    meta: args.meta,
    title: args.title,
  };
  const result = render(job);
  for (const note of result.notes) {
    console.log(note);
  }
  console.log(`SVG -> ${result.out}`);
  return 0;
}

if (typeof require !== "undefined" && require.main === module) {
  try {
    process.exit(runCli(process.argv.slice(2)));
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  }
}
