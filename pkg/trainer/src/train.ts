/**
 * Training loop: vectorized rollouts over protocol connections, PPO
 * updates, learning-curve CSV, periodic deterministic evaluation, and
 * JSON checkpoints.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { TrainerConfig } from "./config.js";
import { DualWindowModel } from "./model.js";
import { LossReport, PpoUpdater, RunningScale } from "./ppo.js";
import { RandomStream } from "./random.js";
import { Endpoint, EpisodeStats, VectorEnvDriver } from "./rollout.js";

export interface TrainResult {
  curveFile: string;
  checkpointFile: string;
  updates: number;
  lastLosses: LossReport;
  evalHistory: { update: number; medianDeltaC: number | null }[];
}

const CURVE_HEADER =
  "update,steps,mean_episode_reward,policy_loss,value_loss,entropy," +
  "clip_fraction,approx_kl,eval_median_delta_c";

function median(values: number[]): number | null {
  if (!values.length) return null;
  const s = [...values].sort((a, b) => a - b);
  const m = Math.floor(s.length / 2);
  return s.length % 2 ? s[m] : (s[m - 1] + s[m]) / 2;
}

export async function train(cfg: TrainerConfig, endpoints: Endpoint[],
                            outDir: string,
                            opts: { evalEvery?: number; evalEpisodes?: number;
                                    log?: (line: string) => void } = {}
                            ): Promise<TrainResult> {
  const log = opts.log ?? ((line: string) => console.log(line));
  fs.mkdirSync(outDir, { recursive: true });
  const curveFile = path.join(outDir, "learning_curve.csv");
  const checkpointFile = path.join(outDir, "checkpoint.json");
  const curve: string[] = [CURVE_HEADER];

  const model = new DualWindowModel(cfg.network, cfg.seed);
  const updater = new PpoUpdater(model, cfg);
  const rng = new RandomStream(cfg.seed + 1);
  const rewardScale = new RunningScale();
  const driver = new VectorEnvDriver(endpoints, cfg, log);
  await driver.start();

  const evalHistory: { update: number; medianDeltaC: number | null }[] = [];
  let losses: LossReport = { policyLoss: 0, valueLoss: 0, entropy: 0,
                             clipFraction: 0, approxKl: 0, gradNorm: 0 };
  try {
    for (let update = 1; update <= cfg.updates; update++) {
      const buf = await driver.collect(model, rng, rewardScale);
      losses = updater.update(buf, rng);

      const finished = driver.completedEpisodes.splice(0);
      const meanReward = finished.length
        ? finished.reduce((a, e) => a + e.totalReward, 0) / finished.length
        : NaN;

      let evalMedian: number | null = null;
      const evalEvery = opts.evalEvery ?? 0;
      if (evalEvery > 0 && update % evalEvery === 0) {
        const stats = await driver.evaluate(
          model, opts.evalEpisodes ?? 5, rng);
        evalMedian = median(stats.map(s => s.deltaC)
          .filter((d): d is number => d !== null));
        evalHistory.push({ update, medianDeltaC: evalMedian });
      }

      curve.push([
        update, buf.rewards.length, fmt(meanReward), fmt(losses.policyLoss),
        fmt(losses.valueLoss), fmt(losses.entropy), fmt(losses.clipFraction),
        fmt(losses.approxKl), evalMedian === null ? "" : fmt(evalMedian),
      ].join(","));
      fs.writeFileSync(curveFile, curve.join("\n") + "\n");
      fs.writeFileSync(checkpointFile, JSON.stringify({
        config: cfg, weights: model.getWeights(),
      }));
      log(`update ${update}/${cfg.updates} ` +
          `reward=${fmt(meanReward)} pi=${fmt(losses.policyLoss)} ` +
          `v=${fmt(losses.valueLoss)} kl=${fmt(losses.approxKl)}` +
          (evalMedian === null ? "" : ` evalDC=${fmt(evalMedian)}`));
    }
  } finally {
    driver.close();
  }
  return { curveFile, checkpointFile, updates: cfg.updates,
           lastLosses: losses, evalHistory };
}

export async function evaluateCheckpoint(checkpointFile: string,
                                         endpoints: Endpoint[],
                                         episodes: number,
                                         reportFile: string): Promise<EpisodeStats[]> {
  const saved = JSON.parse(fs.readFileSync(checkpointFile, "utf-8")) as {
    config: TrainerConfig;
    weights: Record<string, { shape: number[]; data: number[] }>;
  };
  const model = new DualWindowModel(saved.config.network, saved.config.seed);
  model.setWeights(saved.weights);
  const rng = new RandomStream(saved.config.seed + 999);
  const driver = new VectorEnvDriver(endpoints.slice(0, 1), saved.config);
  await driver.start();
  try {
    const stats = await driver.evaluate(model, episodes, rng);
    const lines = ["episode,total_reward,steps,delta_c"];
    stats.forEach((s, i) => lines.push(
      [i, fmt(s.totalReward), s.steps,
       s.deltaC === null ? "" : fmt(s.deltaC)].join(",")));
    const deltas = stats.map(s => s.deltaC)
      .filter((d): d is number => d !== null);
    lines.push(`median_delta_c,${fmt(median(deltas) ?? NaN)},,`);
    fs.writeFileSync(reportFile, lines.join("\n") + "\n");
    return stats;
  } finally {
    driver.close();
  }
}

function fmt(x: number): string {
  return Number.isFinite(x) ? x.toPrecision(8) : "nan";
}
