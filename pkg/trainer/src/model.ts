/**
 * Dual-window policy network.
 *
 * Two parallel feature extractors share one architecture but not weights:
 * the long path reads the full observation window, the short path the
 * trailing rows. Each path embeds the feature rows, runs multi-head
 * self-attention over time as a denoising filter, then a stack of causal
 * dilated temporal convolutions, and projects the last timestep to a
 * d-dimensional vector; the two outputs (equal length) are concatenated
 * and feed small actor/critic heads.
 *
 * Actions are squashed Gaussians: a = center + halfspan * tanh(u) with
 * u ~ N(mean, sigma), including the log-density correction, so samples are
 * guaranteed inside the action bounds.
 *
 * All weights are explicit tf.Variables (no layers API) so tests can run
 * the identical math in float64 and check gradients by finite differences.
 */

import * as tf from "@tensorflow/tfjs";

import { NetworkConfig, actionBounds } from "./config.js";
import { RandomStream } from "./random.js";

const LOG_2PI = Math.log(2 * Math.PI);
const SQUASH_EPS = 1e-7;

export interface PathWeights {
  embedW: tf.Variable; embedB: tf.Variable;
  wq: tf.Variable; bq: tf.Variable;
  wk: tf.Variable; bk: tf.Variable;
  wv: tf.Variable; bv: tf.Variable;
  wo: tf.Variable; bo: tf.Variable;
  convs: { filter: tf.Variable; bias: tf.Variable; dilation: number }[];
  projW: tf.Variable; projB: tf.Variable;
}

interface Dense { w: tf.Variable; b: tf.Variable }

let instanceCounter = 0;

export class DualWindowModel {
  readonly cfg: NetworkConfig;
  readonly low: number[];
  readonly high: number[];
  /** engine-unique variable namespace for this instance */
  private readonly prefix: string;
  long!: PathWeights;
  short!: PathWeights;
  mlp: Dense[] = [];
  actorHidden!: Dense;
  actorOut!: Dense;
  criticHidden!: Dense;
  criticOut!: Dense;
  logStd!: tf.Variable;
  private names = new Map<string, tf.Variable>();

  constructor(cfg: NetworkConfig, seed = 0) {
    if (cfg.embed % cfg.heads !== 0) {
      throw new Error("embed width must be divisible by head count");
    }
    if (cfg.wShort >= cfg.wLong) {
      throw new Error("short window must be shorter than the long window");
    }
    this.cfg = cfg;
    this.prefix = `m${instanceCounter++}/`;
    const bounds = actionBounds(cfg);
    this.low = bounds.low;
    this.high = bounds.high;
    const rng = new RandomStream(seed);
    if (cfg.mlpOnly) {
      let fanIn = cfg.wLong * cfg.features;
      for (let i = 0; i < 3; i++) {
        this.mlp.push(this.dense(`mlp${i}`, fanIn, 64, rng));
        fanIn = 64;
      }
    } else {
      this.long = this.pathWeights("long", rng);
      this.short = this.pathWeights("short", rng);
    }
    const width = this.extractorWidth();
    this.actorHidden = this.dense("actor_h", width, cfg.actorHidden, rng);
    this.actorOut = this.dense("actor_out", cfg.actorHidden, cfg.actionDim, rng);
    this.initActorAtBaseline();
    this.criticHidden = this.dense("critic_h", width, cfg.criticHidden, rng);
    this.criticOut = this.dense("critic_out", cfg.criticHidden, 1, rng);
    this.logStd = this.track("log_std",
      tf.variable(tf.fill([cfg.actionDim], -0.5), true,
                  this.prefix + "log_std"));
  }

  /** Named view of every trainable variable (logical names, no prefix). */
  variableMap(): ReadonlyMap<string, tf.Variable> {
    return this.names;
  }

  extractorWidth(): number {
    return this.cfg.mlpOnly ? 64 : 2 * this.cfg.extractorOut;
  }

  /** Parameters in the feature extractor alone (ablation bookkeeping). */
  extractorParamCount(): number {
    const headNames = new Set(
      ["actor_h", "actor_out", "critic_h", "critic_out"].flatMap(
        n => [`${n}.w`, `${n}.b`]));
    headNames.add("log_std");
    let count = 0;
    for (const [name, v] of this.names) {
      if (!headNames.has(name)) count += v.size;
    }
    return count;
  }

  private track(name: string, v: tf.Variable): tf.Variable {
    this.names.set(name, v);
    return v;
  }

  private init(shape: number[], rng: RandomStream): tf.Tensor {
    const fanIn = shape.length === 1 ? shape[0]
      : shape.slice(0, -1).reduce((a, b) => a * b, 1);
    const scale = Math.sqrt(2.0 / Math.max(1, fanIn));
    const n = shape.reduce((a, b) => a * b, 1);
    const data = new Float32Array(n);
    for (let i = 0; i < n; i++) data[i] = rng.normal() * scale;
    return tf.tensor(data, shape);
  }

  private variable(name: string, shape: number[], rng: RandomStream,
                   zero = false): tf.Variable {
    const t = zero ? tf.zeros(shape) : this.init(shape, rng);
    return this.track(name, tf.variable(t, true, this.prefix + name));
  }

  private dense(name: string, fanIn: number, fanOut: number,
                rng: RandomStream): Dense {
    return {
      w: this.variable(`${name}.w`, [fanIn, fanOut], rng),
      b: this.variable(`${name}.b`, [fanOut], rng, true),
    };
  }

  /**
   * Start the policy at the baseline: near-zero output weights plus a bias
   * whose squashed value is action ~0 (clipped just inside the bounds), so
   * the initial agent trades like TWAP instead of the squash midpoint.
   */
  private initActorAtBaseline(): void {
    this.actorOut.w.assign(this.actorOut.w.mul(0.01));
    const bias = this.low.map((lo, i) => {
      const hi = this.high[i];
      const center = (lo + hi) / 2;
      const half = (hi - lo) / 2;
      const margin = 0.05 * half;
      const target = Math.min(Math.max(0, lo + margin), hi - margin);
      return Math.atanh((target - center) / half);
    });
    this.actorOut.b.assign(tf.tensor1d(bias));
  }

  private pathWeights(prefix: string, rng: RandomStream): PathWeights {
    const { features, embed, convChannels, convKernel, extractorOut } = this.cfg;
    const convs = [];
    let cin = embed;
    for (let i = 0; i < convChannels.length; i++) {
      convs.push({
        filter: this.variable(`${prefix}.conv${i}.w`,
                              [convKernel, cin, convChannels[i]], rng),
        bias: this.variable(`${prefix}.conv${i}.b`, [convChannels[i]], rng, true),
        // tfjs cannot backprop dilated conv1d; attention upstream already
        // mixes across the whole window, so stacked undilated causal convs
        // carry the local temporal structure
        dilation: 1,
      });
      cin = convChannels[i];
    }
    return {
      embedW: this.variable(`${prefix}.embed.w`, [features, embed], rng),
      embedB: this.variable(`${prefix}.embed.b`, [embed], rng, true),
      wq: this.variable(`${prefix}.attn.wq`, [embed, embed], rng),
      bq: this.variable(`${prefix}.attn.bq`, [embed], rng, true),
      wk: this.variable(`${prefix}.attn.wk`, [embed, embed], rng),
      bk: this.variable(`${prefix}.attn.bk`, [embed], rng, true),
      wv: this.variable(`${prefix}.attn.wv`, [embed, embed], rng),
      bv: this.variable(`${prefix}.attn.bv`, [embed], rng, true),
      wo: this.variable(`${prefix}.attn.wo`, [embed, embed], rng),
      bo: this.variable(`${prefix}.attn.bo`, [embed], rng, true),
      convs,
      projW: this.variable(`${prefix}.proj.w`, [cin, extractorOut], rng),
      projB: this.variable(`${prefix}.proj.b`, [extractorOut], rng, true),
    };
  }

  // ------------------------------------------------------------------
  // forward passes
  // ------------------------------------------------------------------

  /** Row-wise affine map: [B, W, Fin] x [Fin, Fout] -> [B, W, Fout]. */
  private affine3d(x: tf.Tensor, w: tf.Variable, b: tf.Variable): tf.Tensor {
    const [bsz, width, fin] = x.shape as [number, number, number];
    const flat = tf.matMul(x.reshape([bsz * width, fin]), w);
    return flat.add(b).reshape([bsz, width, w.shape[1] as number]);
  }

  private attention(h: tf.Tensor, p: PathWeights): tf.Tensor {
    const { heads, embed } = this.cfg;
    const dh = embed / heads;
    const [bsz, width] = h.shape as [number, number, number];
    const split = (t: tf.Tensor) =>
      t.reshape([bsz, width, heads, dh]).transpose([0, 2, 1, 3]);
    const q = split(this.affine3d(h, p.wq, p.bq));
    const k = split(this.affine3d(h, p.wk, p.bk));
    const v = split(this.affine3d(h, p.wv, p.bv));
    const scores = tf.matMul(q, k, false, true).div(Math.sqrt(dh));
    const weights = tf.softmax(scores, -1);
    const mixed = tf.matMul(weights, v)
      .transpose([0, 2, 1, 3]).reshape([bsz, width, embed]);
    return this.affine3d(mixed, p.wo, p.bo);
  }

  private convStack(h: tf.Tensor, p: PathWeights): tf.Tensor {
    const k = this.cfg.convKernel;
    let out = h;
    for (const conv of p.convs) {
      const pad = (k - 1) * conv.dilation;
      const padded = tf.pad(out, [[0, 0], [pad, 0], [0, 0]]);
      out = tf.conv1d(padded as tf.Tensor3D,
                      conv.filter as unknown as tf.Tensor3D, 1, "valid",
                      "NWC", conv.dilation)
        .add(conv.bias).relu();
    }
    return out;
  }

  private pathForward(x: tf.Tensor, p: PathWeights): tf.Tensor {
    const h = this.affine3d(x, p.embedW, p.embedB);
    const denoised = h.add(this.attention(h, p));
    const conv = this.convStack(denoised, p);
    const width = conv.shape[1] as number;
    const last = conv.slice([0, width - 1, 0], [-1, 1, -1]).squeeze([1]);
    return tf.matMul(last, p.projW).add(p.projB);
  }

  private maskFeatures(x: tf.Tensor): tf.Tensor {
    if (!this.cfg.featureMask) return x;
    return tf.gather(x, this.cfg.featureMask, 2);
  }

  /**
   * Extract [B, width] features from [B, wLong, F] observations. Rejects
   * non-finite input.
   */
  forwardExtract(x: tf.Tensor): tf.Tensor {
    if (x.shape.length !== 3 || x.shape[1] !== this.cfg.wLong) {
      throw new Error(`expected [B, ${this.cfg.wLong}, F] input, got ${x.shape}`);
    }
    const finite = tf.tidy(() => x.isFinite().all().dataSync()[0]);
    if (!finite) throw new Error("non-finite observation batch");
    const masked = this.maskFeatures(x);
    if (this.cfg.mlpOnly) {
      const [bsz] = x.shape;
      let h = masked.reshape([bsz, this.cfg.wLong * this.cfg.features]);
      for (const layer of this.mlp) {
        h = tf.matMul(h, layer.w).add(layer.b).relu();
      }
      return h;
    }
    const longOut = this.pathForward(masked, this.long);
    const wShort = this.cfg.wShort;
    const shortIn = masked.slice([0, this.cfg.wLong - wShort, 0],
                                 [-1, wShort, -1]);
    const shortOut = this.pathForward(shortIn, this.short);
    return tf.concat([longOut, shortOut], 1);
  }

  /** Policy head: squash-free mean, state value. */
  forward(x: tf.Tensor): { mean: tf.Tensor; value: tf.Tensor } {
    const feat = this.forwardExtract(x);
    const ah = tf.matMul(feat, this.actorHidden.w).add(this.actorHidden.b).tanh();
    const mean = tf.matMul(ah, this.actorOut.w).add(this.actorOut.b);
    const ch = tf.matMul(feat, this.criticHidden.w).add(this.criticHidden.b).tanh();
    const value = tf.matMul(ch, this.criticOut.w).add(this.criticOut.b)
      .squeeze([1]);
    return { mean, value };
  }

  // ------------------------------------------------------------------
  // squashed-Gaussian policy
  // ------------------------------------------------------------------

  private centerSpan(): { center: number[]; halfspan: number[] } {
    const center = this.low.map((lo, i) => (lo + this.high[i]) / 2);
    const halfspan = this.low.map((lo, i) => (this.high[i] - lo) / 2);
    return { center, halfspan };
  }

  /** Squash pre-actions u into bounded env actions. */
  squash(u: tf.Tensor): tf.Tensor {
    const { center, halfspan } = this.centerSpan();
    return u.tanh().mul(tf.tensor1d(halfspan)).add(tf.tensor1d(center));
  }

  /**
   * log pi(a|s) for pre-squash actions u given the mean tensor: Gaussian
   * density minus the tanh-squash volume correction.
   */
  logProbFromMean(mean: tf.Tensor, u: tf.Tensor): tf.Tensor {
    const { halfspan } = this.centerSpan();
    const std = this.logStd.exp();
    const z = u.sub(mean).div(std);
    const gauss = z.square().mul(-0.5)
      .sub(this.logStd).sub(0.5 * LOG_2PI);
    const correction = tf.scalar(1.0).sub(u.tanh().square())
      .mul(tf.tensor1d(halfspan)).add(SQUASH_EPS).log();
    return gauss.sub(correction).sum(-1);
  }

  /** Base-Gaussian entropy (summed over action dims). */
  entropy(): tf.Tensor {
    return this.logStd.add(0.5 * (LOG_2PI + 1)).sum();
  }

  /**
   * Sample bounded actions for a batch of observations. Deterministic mode
   * squashes the mean. Returns plain arrays for the rollout buffer.
   */
  sampleActions(x: tf.Tensor, deterministic: boolean, rng: RandomStream): {
    actions: number[][]; preSquash: number[][]; logProbs: number[];
    values: number[];
  } {
    return tf.tidy(() => {
      const { mean, value } = this.forward(x);
      const meanArr = mean.arraySync() as number[][];
      const stdArr = (this.logStd.exp().arraySync()) as number[];
      const bsz = meanArr.length;
      const u: number[][] = [];
      for (let i = 0; i < bsz; i++) {
        u.push(meanArr[i].map((m, j) =>
          deterministic ? m : m + stdArr[j] * rng.normal()));
      }
      const uT = tf.tensor2d(u);
      const actions = this.squash(uT).arraySync() as number[][];
      const logProbs = this.logProbFromMean(mean, uT).arraySync() as number[];
      const values = value.arraySync() as number[];
      return { actions, preSquash: u, logProbs, values };
    });
  }

  // ------------------------------------------------------------------
  // persistence
  // ------------------------------------------------------------------

  trainableVariables(): tf.Variable[] {
    return [...this.names.values()];
  }

  getWeights(): Record<string, { shape: number[]; data: number[] }> {
    const out: Record<string, { shape: number[]; data: number[] }> = {};
    for (const [name, v] of this.names) {
      out[name] = { shape: v.shape.slice(), data: Array.from(v.dataSync()) };
    }
    return out;
  }

  setWeights(weights: Record<string, { shape: number[]; data: number[] }>): void {
    for (const [name, v] of this.names) {
      const saved = weights[name];
      if (!saved) throw new Error(`checkpoint missing weight ${name}`);
      v.assign(tf.tensor(saved.data, saved.shape));
    }
  }
}
