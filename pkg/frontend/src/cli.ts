#!/usr/bin/env node
import { realpathSync } from "fs";
import { pathToFileURL } from "url";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { FigureError } from "./errors.js";
import { CHART_KINDS, ChartKind, render } from "./render.js";

export async function main(argv: string[]): Promise<number> {
  let exit = 0;
  await yargs(argv)
    .scriptName("agweather-figures")
    .command(
      "render",
      "render one chart from a battery CSV",
      (y) =>
        y
          .option("kind", { type: "string", demandOption: true, choices: [...CHART_KINDS] })
          .option("in", { type: "string", demandOption: true, describe: "input CSV path" })
          .option("out", { type: "string", demandOption: true, describe: "output .svg or .png path" })
          .option("group-by", { type: "string", describe: "comma-separated grouping columns" })
          .option("title", { type: "string" })
          .option("x-label", { type: "string" })
          .option("y-label", { type: "string" })
          .option("width", { type: "number" })
          .option("height", { type: "number" }),
      async (args) => {
        try {
          const written = await render({
            kind: args.kind as ChartKind,
            input: args.in as string,
            output: args.out as string,
            groupBy:
              args["group-by"] === undefined
                ? undefined
                : (args["group-by"] as string).split(",").map((s) => s.trim()).filter((s) => s !== ""),
            title: args.title as string | undefined,
            xLabel: args["x-label"] as string | undefined,
            yLabel: args["y-label"] as string | undefined,
            width: args.width as number | undefined,
            height: args.height as number | undefined,
          });
          console.log(written);
        } catch (err) {
          if (err instanceof FigureError || (err as NodeJS.ErrnoException)?.code === "ENOENT") {
            console.error(`error: ${(err as Error).message}`);
            exit = 2;
            return;
          }
          throw err;
        }
      },
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      if (err) throw err;
      console.error(`error: ${msg}`);
      exit = 2;
    })
    .exitProcess(false)
    .parseAsync();
  return exit;
}

function invokedDirectly(): boolean {
  if (process.argv[1] === undefined) return false;
  try {
    return import.meta.url === pathToFileURL(realpathSync(process.argv[1])).href;
  } catch {
    return false;
  }
}

if (invokedDirectly()) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
