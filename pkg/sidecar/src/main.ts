import { parseArgs } from "node:util";

import { createApp, loadEmbedder, ModelLoadFailure, SidecarConfig } from "./server.js";

function usage(): never {
  console.error(
    "usage: embed-sidecar (--test-mode | --model <id>) [--addr host:port] " +
      "[--max-batch N] [--dim N]"
  );
  process.exit(2);
}

async function main(): Promise<void> {
  const { values } = parseArgs({
    options: {
      model: { type: "string" },
      addr: { type: "string", default: "127.0.0.1:8900" },
      "max-batch": { type: "string", default: "64" },
      dim: { type: "string", default: "64" },
      "test-mode": { type: "boolean", default: false },
    },
  });

  if (!values["test-mode"] && !values.model) {
    usage();
  }
  const config: SidecarConfig = {
    model: values["test-mode"] ? "test-mode" : (values.model as string),
    maxBatch: Number(values["max-batch"]),
    dim: Number(values.dim),
  };
  if (!Number.isInteger(config.maxBatch) || config.maxBatch < 1) {
    usage();
  }
  if (!Number.isInteger(config.dim) || config.dim < 8) {
    usage();
  }

  let embedder;
  try {
    embedder = await loadEmbedder(config);
  } catch (err) {
    if (err instanceof ModelLoadFailure) {
      console.error(`ModelLoadFailure: ${err.message}`);
      process.exit(1);
    }
    throw err;
  }

  const [host, portRaw] = (values.addr as string).split(":");
  const port = Number(portRaw);
  if (!host || !Number.isInteger(port)) {
    usage();
  }
  const app = createApp(config, embedder);
  app.listen(port, host, () => {
    console.log(`embed-sidecar listening on ${host}:${port} (mode=${config.model})`);
  });
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
