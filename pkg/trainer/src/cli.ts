/**
 * Trainer CLI: train against one or more protocol servers, evaluate a
 * checkpoint, or emit the scripted-liquidity message day.
 */

import * as fs from "node:fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { ABLATIONS, AblationName, ablate, defaultTrainerConfig } from "./config.js";
import { defaultPatternConfig, generatePatternDay } from "./patternDay.js";
import { Endpoint } from "./rollout.js";
import { evaluateCheckpoint, train } from "./train.js";

function parseEndpoints(text: string): Endpoint[] {
  return text.split(",").map(part => {
    const [host, port] = part.trim().split(":");
    if (!host || !port || Number.isNaN(Number(port))) {
      throw new Error(`bad endpoint ${part!.trim()}; expected host:port`);
    }
    return { host, port: Number(port) };
  });
}

await yargs(hideBin(process.argv))
  .command(
    "train",
    "train the dual-window PPO agent over the wire protocol",
    y => y
      .option("connect", { type: "string", demandOption: true,
                           describe: "host:port[,host:port...]" })
      .option("updates", { type: "number", default: 50 })
      .option("horizon", { type: "number", default: 64,
                           describe: "trajectory length l_t" })
      .option("config", { type: "string", alias: "envs-config",
                          describe: "JSON env config merged into every reset" })
      .option("seed", { type: "number", default: 0 })
      .option("out", { type: "string", default: "runs/latest" })
      .option("eval-every", { type: "number", default: 0 })
      .option("eval-episodes", { type: "number", default: 5 })
      .option("preset", { type: "string", default: "full",
                          choices: ["full", "small"],
                          describe: "network size (small: quick desk runs)" })
      .option("lr", { type: "number", default: 3e-4 })
      .option("entropy-coef", { type: "number", default: 1e-3 })
      .option("ablate", { type: "string", default: "none",
                          choices: ["none", "mlp", "rawlob", "market", "noimit"] }),
    async argv => {
      let cfg = defaultTrainerConfig();
      cfg.updates = argv.updates;
      cfg.trajectoryLength = argv.horizon;
      cfg.seed = argv.seed;
      cfg.learningRate = argv.lr;
      cfg.entropyCoef = argv["entropy-coef"];
      if (argv.preset === "small") {
        cfg.network = { ...cfg.network, wLong: 12, wShort: 4, embed: 16,
                        heads: 2, convChannels: [16, 16], extractorOut: 16,
                        actorHidden: 32, criticHidden: 32 };
      }
      if (argv.config) {
        cfg.envConfig = JSON.parse(fs.readFileSync(argv.config, "utf-8"));
      }
      cfg = ablate(cfg, argv.ablate as AblationName);
      const result = await train(cfg, parseEndpoints(argv.connect), argv.out,
                                 { evalEvery: argv["eval-every"],
                                   evalEpisodes: argv["eval-episodes"] });
      console.log(`curves:     ${result.curveFile}`);
      console.log(`checkpoint: ${result.checkpointFile}`);
    })
  .command(
    "evaluate",
    "run deterministic-policy episodes from a checkpoint",
    y => y
      .option("checkpoint", { type: "string", demandOption: true })
      .option("connect", { type: "string", demandOption: true })
      .option("episodes", { type: "number", default: 20 })
      .option("report", { type: "string", default: "eval_report.csv" }),
    async argv => {
      const stats = await evaluateCheckpoint(
        argv.checkpoint, parseEndpoints(argv.connect), argv.episodes,
        argv.report);
      const deltas = stats.map(s => s.deltaC).filter(d => d !== null);
      console.log(`evaluated ${stats.length} episodes -> ${argv.report} ` +
                  `(${deltas.length} with delta_c)`);
    })
  .command(
    "make-pattern-day",
    "emit the scripted intraday-liquidity message CSV",
    y => y
      .option("out", { type: "string", demandOption: true })
      .option("steps", { type: "number", default: 12 })
      .option("interval-s", { type: "number", default: 10 })
      .option("cheap-start", { type: "number", default: 6 })
      .option("cheap-end", { type: "number", default: 10 }),
    argv => {
      const cfg = defaultPatternConfig();
      cfg.steps = argv.steps;
      cfg.intervalS = argv["interval-s"];
      cfg.cheapWindow = [argv["cheap-start"], argv["cheap-end"]];
      fs.writeFileSync(argv.out, generatePatternDay(cfg));
      console.log(`wrote pattern day (${argv.steps} steps) to ${argv.out}`);
    })
  .demandCommand(1)
  .strict()
  .fail((msg, err) => {
    console.error(`error: ${msg ?? err?.message}`);
    process.exit(2);
  })
  .parseAsync();
