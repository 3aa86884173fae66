/**
 * PPO core: generalized advantage estimation and the clipped-surrogate
 * update with value regression and an entropy bonus, run for a fixed
 * number of epochs over shuffled minibatches.
 */

import * as tf from "@tensorflow/tfjs";

import { TrainerConfig } from "./config.js";
import { DualWindowModel } from "./model.js";
import { RandomStream } from "./random.js";

export interface RolloutBuffer {
  /** flattened [N, wLong, F] observations */
  obs: Float32Array;
  obsShape: [number, number, number];
  preSquash: number[][];   // u values, [N, actionDim]
  logProbs: number[];      // behavior log pi(a|s), [N]
  rewards: number[];
  values: number[];
  dones: boolean[];
  /** value estimate for the state after the last step of each env slice */
  bootstrapValues: number[];
  /** rollout is laid out env-major: envs slices of length steps */
  envs: number;
  steps: number;
}

export interface Advantages {
  advantages: number[];
  returns: number[];
}

/** GAE(lambda) per env slice; done steps cut the bootstrap chain. */
export function computeAdvantages(buf: RolloutBuffer, gamma: number,
                                  lambda: number): Advantages {
  const n = buf.rewards.length;
  const advantages = new Array<number>(n).fill(0);
  const returns = new Array<number>(n).fill(0);
  for (let e = 0; e < buf.envs; e++) {
    const base = e * buf.steps;
    let lastAdv = 0;
    let nextValue = buf.bootstrapValues[e];
    for (let t = buf.steps - 1; t >= 0; t--) {
      const i = base + t;
      const nonTerminal = buf.dones[i] ? 0 : 1;
      const delta = buf.rewards[i] + gamma * nextValue * nonTerminal
        - buf.values[i];
      lastAdv = delta + gamma * lambda * nonTerminal * lastAdv;
      advantages[i] = lastAdv;
      returns[i] = advantages[i] + buf.values[i];
      nextValue = buf.values[i];
    }
  }
  return { advantages, returns };
}

export interface LossReport {
  policyLoss: number;
  valueLoss: number;
  entropy: number;
  clipFraction: number;
  approxKl: number;
  gradNorm: number;
}

export class PpoUpdater {
  private optimizer: tf.Optimizer;

  constructor(private model: DualWindowModel, private cfg: TrainerConfig) {
    this.optimizer = tf.train.adam(cfg.learningRate);
  }

  /**
   * One full PPO update (updateEpochs passes of shuffled minibatches).
   * Throws if any loss turns non-finite.
   */
  update(buf: RolloutBuffer, rng: RandomStream): LossReport {
    const { advantages, returns } = computeAdvantages(
      buf, this.cfg.gamma, this.cfg.gaeLambda);
    const n = buf.rewards.length;

    // advantage normalization for gradient conditioning
    let normAdv = advantages;
    if (this.cfg.normalizeAdvantages) {
      const mean = advantages.reduce((a, b) => a + b, 0) / n;
      const sd = Math.sqrt(
        advantages.reduce((a, b) => a + (b - mean) ** 2, 0) / n) || 1;
      normAdv = advantages.map(a => (a - mean) / (sd + 1e-8));
    }

    const [N, W, F] = buf.obsShape;
    const rowLen = W * F;
    const indices = Array.from({ length: n }, (_, i) => i);
    let report: LossReport = { policyLoss: 0, valueLoss: 0, entropy: 0,
                               clipFraction: 0, approxKl: 0, gradNorm: 0 };
    let batches = 0;

    for (let epoch = 0; epoch < this.cfg.updateEpochs; epoch++) {
      // Fisher-Yates shuffle with the trainer's seeded stream
      for (let i = n - 1; i > 0; i--) {
        const j = rng.int(i + 1);
        [indices[i], indices[j]] = [indices[j], indices[i]];
      }
      for (let start = 0; start < n; start += this.cfg.minibatchSize) {
        const batch = indices.slice(start, start + this.cfg.minibatchSize);
        report = this.minibatchStep(buf, batch, normAdv, returns, rowLen);
        batches += 1;
      }
    }
    if (!Number.isFinite(report.policyLoss) || !Number.isFinite(report.valueLoss)) {
      throw new Error(
        `non-finite PPO losses after ${batches} minibatches: ${JSON.stringify(report)}`);
    }
    return report;
  }

  private minibatchStep(buf: RolloutBuffer, batch: number[], normAdv: number[],
                        returns: number[], rowLen: number): LossReport {
    const [_, W, F] = buf.obsShape;
    const b = batch.length;
    const obsData = new Float32Array(b * rowLen);
    for (let i = 0; i < b; i++) {
      obsData.set(buf.obs.subarray(batch[i] * rowLen, (batch[i] + 1) * rowLen),
                  i * rowLen);
    }
    const stats = { clipFraction: 0, approxKl: 0, entropy: 0,
                    policyLoss: 0, valueLoss: 0 };

    const loss = () => tf.tidy(() => {
      const obs = tf.tensor3d(obsData, [b, W, F]);
      const u = tf.tensor2d(batch.map(i => buf.preSquash[i]));
      const oldLp = tf.tensor1d(batch.map(i => buf.logProbs[i]));
      const adv = tf.tensor1d(batch.map(i => normAdv[i]));
      const ret = tf.tensor1d(batch.map(i => returns[i]));

      const { mean: policyMean, value } = this.model.forward(obs);
      const newLp = this.model.logProbFromMean(policyMean, u);
      const ratio = newLp.sub(oldLp).exp();
      const clipped = ratio.clipByValue(1 - this.cfg.clipRatio,
                                        1 + this.cfg.clipRatio);
      const surrogate = tf.minimum(ratio.mul(adv), clipped.mul(adv));
      const policyLoss = surrogate.mean().neg();
      const valueLoss = value.sub(ret).square().mean();
      const entropy = this.model.entropy();
      const total = policyLoss
        .add(valueLoss.mul(this.cfg.valueCoef))
        .sub(entropy.mul(this.cfg.entropyCoef));

      stats.policyLoss = policyLoss.dataSync()[0];
      stats.valueLoss = valueLoss.dataSync()[0];
      stats.entropy = entropy.dataSync()[0];
      stats.approxKl = oldLp.sub(newLp).mean().dataSync()[0];
      stats.clipFraction = ratio.sub(1).abs()
        .greater(this.cfg.clipRatio).mean().dataSync()[0];
      return total as tf.Scalar;
    });

    const vars = this.model.trainableVariables();
    const { grads } = tf.variableGrads(loss, vars);
    let sq = 0;
    for (const g of Object.values(grads)) {
      sq += tf.tidy(() => g.square().sum().dataSync()[0]);
    }
    this.optimizer.applyGradients(grads);
    Object.values(grads).forEach(g => g.dispose());
    return { ...stats, gradNorm: Math.sqrt(sq) };
  }
}

/** Running scale for reward normalization (tick*share magnitudes). */
export class RunningScale {
  private count = 0;
  private meanSq = 0;

  update(values: number[]): void {
    for (const v of values) {
      this.count += 1;
      this.meanSq += (v * v - this.meanSq) / this.count;
    }
  }

  get scale(): number {
    return this.count > 1 ? Math.sqrt(this.meanSq) || 1 : 1;
  }

  normalize(values: number[]): number[] {
    this.update(values);
    const s = this.scale;
    return values.map(v => v / s);
  }
}
