/**
 * Scripted intraday liquidity pattern for end-to-end learning checks.
 *
 * The generated message day carries a persistent two-sided book around an
 * anchor mid, except during a known window where deep discounted ask
 * liquidity appears one tick above the best bid. A buyer that learns to
 * back-load volume into that window beats TWAP; outside the window the
 * offered side is thin and expensive.
 *
 * The output is the simulator's message CSV
 * (ts_ns,kind,order_id,side,price_ticks,qty).
 */

import { RandomStream } from "./random.js";

export interface PatternConfig {
  seed: number;
  steps: number;           // decision instants of the consuming task
  intervalS: number;
  anchorMid: number;       // ticks
  normalAskPremium: number;  // ticks above anchor for the regular offer
  cheapWindow: [number, number]; // [start, end) step indices with cheap asks
  refreshQty: number;      // shares re-offered every refresh
  jitterTicks: number;     // seeded per-step premium jitter
}

export function defaultPatternConfig(): PatternConfig {
  return {
    seed: 0,
    steps: 12,
    intervalS: 10,
    anchorMid: 10_000,
    normalAskPremium: 30,
    cheapWindow: [6, 10],
    refreshQty: 4_000,
    jitterTicks: 2,
  };
}

export function generatePatternDay(cfg: PatternConfig): string {
  const rng = new RandomStream(cfg.seed);
  const lines = ["ts_ns,kind,order_id,side,price_ticks,qty"];
  let nextId = 1;
  const intervalNs = Math.round(cfg.intervalS * 1e9);
  const add = (ts: number, side: "B" | "A", price: number, qty: number) => {
    lines.push(`${ts},ADD,${nextId},${side},${price},${qty}`);
    return nextId++;
  };
  const cancel = (ts: number, id: number, side: "B" | "A") => {
    lines.push(`${ts},CANCEL,${id},${side},0,0`);
  };

  // persistent bid support well below the action so sells never matter
  for (let i = 0; i < 5; i++) {
    add(0, "B", cfg.anchorMid - 40 - i, 50_000);
  }

  let openAsks: number[] = [];
  for (let step = 0; step < cfg.steps; step++) {
    const ts = step * intervalNs + 1; // just after the decision boundary
    for (const id of openAsks) cancel(ts, id, "A");
    openAsks = [];
    const cheap = step >= cfg.cheapWindow[0] && step < cfg.cheapWindow[1];
    const premium = (cheap ? 1 : cfg.normalAskPremium)
      + (cfg.jitterTicks ? rng.int(cfg.jitterTicks + 1) : 0);
    // refreshed offer ladder: 3 levels, deep enough for any per-step demand
    for (let lvl = 0; lvl < 3; lvl++) {
      openAsks.push(add(ts, "A", cfg.anchorMid + premium + lvl, cfg.refreshQty));
    }
  }
  return lines.join("\n") + "\n";
}
