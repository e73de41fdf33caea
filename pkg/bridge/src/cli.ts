#!/usr/bin/env node
/**
 * Bridge CLI.
 *
 *   ragbench-bridge export --corpus corpus.jsonl --out exports/ [--dim 768]
 *                          [--seed 0] [--max-tokens 512] [--text-unit question_answer]
 *   ragbench-bridge serve  [--port 8600] [--host 127.0.0.1]
 *
 * `serve` prints one line, "listening on http://<host>:<port>", once the
 * services are up; pass --port 0 for an ephemeral port.
 */

import { parseArgs } from "node:util";

import { exportCorpus, TextUnit } from "./export.js";
import { createApp, startServer, MODEL_TAG } from "./server.js";

function usage(): never {
  console.error("usage: ragbench-bridge <export|serve> [options]");
  process.exit(2);
}

async function main(): Promise<void> {
  const [command, ...rest] = process.argv.slice(2);
  if (command === "export") {
    const { values } = parseArgs({
      args: rest,
      options: {
        corpus: { type: "string" },
        out: { type: "string" },
        dim: { type: "string", default: "768" },
        seed: { type: "string", default: "0" },
        "max-tokens": { type: "string", default: "512" },
        "text-unit": { type: "string", default: "question_answer" },
      },
    });
    if (!values.corpus || !values.out) usage();
    const textUnit = values["text-unit"];
    if (textUnit !== "question_answer" && textUnit !== "question") {
      throw new Error(`unknown text unit ${textUnit}`);
    }
    const manifest = exportCorpus({
      corpusPath: values.corpus,
      outDir: values.out,
      encoder: {
        dim: Number(values.dim),
        seed: Number(values.seed),
        maxTokens: Number(values["max-tokens"]),
      },
      textUnit: textUnit as TextUnit,
    });
    console.log(JSON.stringify(manifest, null, 2));
    return;
  }
  if (command === "serve") {
    const { values } = parseArgs({
      args: rest,
      options: {
        port: { type: "string", default: "8600" },
        host: { type: "string", default: "127.0.0.1" },
      },
    });
    const running = await startServer(createApp(), Number(values.port), values.host);
    console.log(`listening on http://${values.host}:${running.port}`);
    console.log(`model_tag: ${MODEL_TAG}`);
    return;
  }
  usage();
}

main().catch((err) => {
  console.error(`error: ${(err as Error).message}`);
  process.exit(1);
});
