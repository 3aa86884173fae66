/**
 * Trainer configuration: network geometry, PPO hyperparameters, and the
 * four ablation variants. Action bounds mirror the environment's blending
 * contract: three scaling factors in [-1,3] x [0,1] x [0,1].
 */

export const FEATURE_COUNT = 39;

/** Feature-vector layout indices (frozen by the environment). */
export const TASK_FEATURE_INDICES = [0, 1, 2];
export const LOB_FEATURE_INDICES = Array.from({ length: 20 }, (_, i) => 19 + i);

export const ACTION_LOW = [-1, 0, 0];
export const ACTION_HIGH = [3, 1, 1];

export interface NetworkConfig {
  wLong: number;        // long observation window (rows)
  wShort: number;       // trailing rows for the short path
  features: number;     // input feature count
  embed: number;        // attention embedding width
  heads: number;        // attention heads (embed % heads must be 0)
  convChannels: number[];
  convKernel: number;
  extractorOut: number; // d: per-path output width (equal for both paths)
  actorHidden: number;
  criticHidden: number;
  actionDim: number;
  /** mlp-only ablation: replace the dual-window extractor entirely. */
  mlpOnly: boolean;
  /** feature subset fed to the network (null = all features). */
  featureMask: number[] | null;
}

export function defaultNetworkConfig(): NetworkConfig {
  return {
    wLong: 60,
    wShort: 15,
    features: FEATURE_COUNT,
    embed: 32,
    heads: 4,
    convChannels: [32, 64],
    convKernel: 3,
    extractorOut: 64,
    actorHidden: 64,
    criticHidden: 64,
    actionDim: 3,
    mlpOnly: false,
    featureMask: null,
  };
}

export interface TrainerConfig {
  network: NetworkConfig;
  updateEpochs: number;     // n_e
  trajectoryLength: number; // l_t: steps collected per env per update
  gamma: number;
  gaeLambda: number;
  clipRatio: number;
  learningRate: number;
  entropyCoef: number;
  valueCoef: number;
  /** normalize advantages per update (off for analytic identity tests) */
  normalizeAdvantages: boolean;
  minibatchSize: number;
  updates: number;          // training updates to run
  seed: number;
  /** environment overrides merged into every reset (same schema as run config). */
  envConfig: Record<string, unknown>;
  ablation: AblationName;
}

export type AblationName = "none" | "mlp" | "rawlob" | "market" | "noimit";

export const ABLATIONS: AblationName[] = ["none", "mlp", "rawlob", "market", "noimit"];

export function defaultTrainerConfig(): TrainerConfig {
  return {
    network: defaultNetworkConfig(),
    updateEpochs: 10,
    trajectoryLength: 64,
    gamma: 0.99,
    gaeLambda: 0.95,
    clipRatio: 0.2,
    learningRate: 3e-4,
    entropyCoef: 1e-3,
    valueCoef: 0.5,
    normalizeAdvantages: true,
    minibatchSize: 64,
    updates: 50,
    seed: 0,
    envConfig: {},
    ablation: "none",
  };
}

/** Per-action squash bounds for the current action dimension. */
export function actionBounds(cfg: NetworkConfig): { low: number[]; high: number[] } {
  if (cfg.actionDim === 1) {
    // restricted single-scale action: 0..400% of the TWAP slice
    return { low: [ACTION_LOW[0]], high: [ACTION_HIGH[0]] };
  }
  return { low: ACTION_LOW.slice(), high: ACTION_HIGH.slice() };
}

/**
 * Apply one named ablation as a pure config delta; the training loop is
 * untouched. Unknown names throw.
 */
export function ablate(base: TrainerConfig, which: AblationName): TrainerConfig {
  const cfg: TrainerConfig = {
    ...base,
    network: { ...base.network, convChannels: base.network.convChannels.slice(),
               featureMask: base.network.featureMask?.slice() ?? null },
    envConfig: JSON.parse(JSON.stringify(base.envConfig)),
    ablation: which,
  };
  switch (which) {
    case "none":
      return cfg;
    case "mlp":
      cfg.network.mlpOnly = true;
      return cfg;
    case "rawlob":
      cfg.network.featureMask = [...TASK_FEATURE_INDICES, ...LOB_FEATURE_INDICES];
      cfg.network.features = cfg.network.featureMask.length;
      return cfg;
    case "market": {
      cfg.network.actionDim = 1;
      const env = cfg.envConfig as Record<string, Record<string, unknown>>;
      env.env = { ...(env.env ?? {}), placement: "marketable" };
      return cfg;
    }
    case "noimit": {
      const env = cfg.envConfig as Record<string, Record<string, unknown>>;
      env.reward = { ...(env.reward ?? {}), alpha: 0.0 };
      return cfg;
    }
    default:
      throw new Error(`unknown ablation: ${which as string}`);
  }
}

/** Expand a 1-d restricted action to the environment's 3-vector form. */
export function toEnvAction(action: number[], cfg: NetworkConfig): number[] {
  if (cfg.actionDim === 1) return [action[0], 0, 0];
  return action;
}
