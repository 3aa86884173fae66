/**
 * Vectorized rollout collection over parallel protocol connections.
 *
 * Each connection is a sequential environment; the driver steps all of
 * them in lockstep, resets finished episodes with fresh seeds, and packs
 * trajectories env-major into a RolloutBuffer. A dropped connection is
 * re-established and its episode restarted, logged as a discontinuity.
 */

import * as tf from "@tensorflow/tfjs";

import { TrainerConfig, toEnvAction } from "./config.js";
import { DualWindowModel } from "./model.js";
import { defaultPatternConfig, generatePatternDay } from "./patternDay.js";
import { RolloutBuffer, RunningScale } from "./ppo.js";
import { RandomStream } from "./random.js";
import { EnvConnection, TransitionReply } from "./wire.js";

export interface Endpoint {
  host: string;
  port: number;
}

export interface EpisodeStats {
  totalReward: number;
  steps: number;
  deltaC: number | null;
}

export class VectorEnvDriver {
  private connections: (EnvConnection | null)[];
  private observations: number[][][] = [];
  private episodeSeed: number;
  private episodeReward: number[];
  public completedEpisodes: EpisodeStats[] = [];
  public reconnects = 0;

  constructor(private endpoints: Endpoint[], private cfg: TrainerConfig,
              private log: (line: string) => void = () => {}) {
    this.connections = endpoints.map(() => null);
    this.episodeSeed = cfg.seed * 1000;
    this.episodeReward = endpoints.map(() => 0);
  }

  private nextSeed(): number {
    return this.episodeSeed++;
  }

  private resetConfig(): Record<string, unknown> {
    const cfg = JSON.parse(JSON.stringify(this.cfg.envConfig)) as
      Record<string, Record<string, unknown>>;
    const seed = this.nextSeed();
    if (cfg.data?.kind === "pattern") {
      // trainer-side scripted liquidity day, regenerated per episode seed
      // and shipped inline as replay data
      const pattern = { ...defaultPatternConfig(), ...cfg.data, seed };
      delete (pattern as Record<string, unknown>).kind;
      cfg.data = { kind: "replay",
                   messages_csv: generatePatternDay(pattern) };
    } else {
      cfg.data = { ...(cfg.data ?? {}), seed };
    }
    return cfg;
  }

  async start(): Promise<void> {
    for (let i = 0; i < this.endpoints.length; i++) {
      await this.connectAndReset(i);
    }
  }

  private async connectAndReset(i: number): Promise<void> {
    const ep = this.endpoints[i];
    this.connections[i]?.close();
    this.connections[i] = await EnvConnection.connect(ep.host, ep.port);
    const reply = await this.connections[i]!.reset(this.resetConfig());
    this.observations[i] = reply.obs;
    this.episodeReward[i] = 0;
  }

  private async stepEnv(i: number, action: number[]): Promise<TransitionReply> {
    try {
      return await this.connections[i]!.step(action);
    } catch (err) {
      this.reconnects += 1;
      this.log(`env ${i} connection lost (${String(err)}); restarting episode`);
      await this.connectAndReset(i);
      return this.connections[i]!.step(action);
    }
  }

  /** Collect trajectoryLength steps from every env into one buffer. */
  async collect(model: DualWindowModel, rng: RandomStream,
                rewardScale: RunningScale): Promise<RolloutBuffer> {
    const envs = this.endpoints.length;
    const steps = this.cfg.trajectoryLength;
    const W = this.cfg.network.wLong;
    const F = this.observations[0][0].length;
    const n = envs * steps;
    const obs = new Float32Array(n * W * F);
    const preSquash: number[][] = new Array(n);
    const logProbs = new Array<number>(n);
    const rewards = new Array<number>(n);
    const values = new Array<number>(n);
    const dones = new Array<boolean>(n);

    for (let t = 0; t < steps; t++) {
      const batch = tf.tensor3d(this.observations, [envs, W, F]);
      const sampled = model.sampleActions(batch, false, rng);
      batch.dispose();
      const replies = await Promise.all(
        this.endpoints.map((_, i) => this.stepEnv(
          i, toEnvAction(sampled.actions[i], this.cfg.network))));
      for (let i = 0; i < envs; i++) {
        const idx = i * steps + t;
        flatten(this.observations[i], obs, idx * W * F);
        preSquash[idx] = sampled.preSquash[i];
        logProbs[idx] = sampled.logProbs[i];
        values[idx] = sampled.values[i];
        const reply = replies[i];
        rewards[idx] = reply.reward;
        dones[idx] = reply.done;
        this.episodeReward[i] += reply.reward;
        if (reply.done) {
          this.completedEpisodes.push({
            totalReward: this.episodeReward[i],
            steps: (reply.info.step as number) ?? 0,
            deltaC: episodeDeltaC(reply),
          });
          const newEp = await this.connections[i]!.reset(this.resetConfig());
          this.observations[i] = newEp.obs;
          this.episodeReward[i] = 0;
        } else {
          this.observations[i] = reply.obs;
        }
      }
    }

    // bootstrap values for the states following each env's last step
    const batch = tf.tensor3d(this.observations, [envs, W, F]);
    const tail = model.sampleActions(batch, true, rng);
    batch.dispose();

    const normalized = rewardScale.normalize(rewards);
    return {
      obs, obsShape: [n, W, F], preSquash, logProbs,
      rewards: normalized, values, dones,
      bootstrapValues: tail.values,
      envs, steps,
    };
  }

  async evaluate(model: DualWindowModel, episodes: number,
                 rng: RandomStream): Promise<EpisodeStats[]> {
    const conn = this.connections[0]!;
    const W = this.cfg.network.wLong;
    const stats: EpisodeStats[] = [];
    for (let e = 0; e < episodes; e++) {
      let reply = await conn.reset(this.resetConfig());
      let obsRows = reply.obs;
      let total = 0;
      let last: TransitionReply | null = null;
      for (;;) {
        const batch = tf.tensor3d([obsRows], [1, W, obsRows[0].length]);
        const act = model.sampleActions(batch, true, rng);
        batch.dispose();
        last = await conn.step(toEnvAction(act.actions[0], this.cfg.network));
        total += last.reward;
        obsRows = last.obs;
        if (last.done) break;
      }
      stats.push({ totalReward: total,
                   steps: (last!.info.step as number) ?? 0,
                   deltaC: episodeDeltaC(last!) });
    }
    // the shared first connection needs a fresh episode for training
    const reply = await conn.reset(this.resetConfig());
    this.observations[0] = reply.obs;
    this.episodeReward[0] = 0;
    return stats;
  }

  close(): void {
    for (const c of this.connections) c?.close();
  }
}

function flatten(rows: number[][], out: Float32Array, offset: number): void {
  let k = offset;
  for (const row of rows) {
    for (let j = 0; j < row.length; j++) out[k++] = row[j];
  }
}

/** Relative cost edge over the teacher from the final transition's info. */
export function episodeDeltaC(reply: TransitionReply): number | null {
  const rl = reply.info.learner_total_cost as number | undefined;
  const tw = reply.info.teacher_total_cost as number | undefined;
  if (!reply.done || rl === undefined || !tw) return null;
  const side = (reply.info.side as string) ?? "BUY";
  const edge = (tw - rl) / tw;
  return side === "SELL" ? -edge : edge;
}
