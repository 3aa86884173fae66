"""Run configuration: structured key-value text (TOML) and dict forms.

The same schema is used by the config file, the wire protocol's reset
payload, and the HTTP service, so an episode is described identically
everywhere:

    [task]      side, total_volume, steps, interval_s
    [data]      kind = "synthetic" | "replay", plus source fields
    [reward]    window, alpha
    [env]       placement, shared_book, learner_enabled, w_long, event_log
    [episodes]  count + base_seed, or an explicit seeds list
"""

from __future__ import annotations

import os
import sys
from typing import Any, Dict, List, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - version dependent
    import tomli as tomllib

from .env import EnvConfig, TaskConfig
from .marketdata import SyntheticConfig, parse_messages
from .rewards import RewardConfig


class RunConfigError(ValueError):
    pass


def _section(data: Dict[str, Any], name: str) -> Dict[str, Any]:
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise RunConfigError(f"[{name}] must be a table")
    return sec


def env_config_from_dict(data: Dict[str, Any],
                         base_dir: Optional[str] = None) -> EnvConfig:
    """Build an EnvConfig from the shared dict schema."""
    task_d = _section(data, "task")
    task = TaskConfig(
        side=str(task_d.get("side", "BUY")).upper(),
        total_volume=int(task_d.get("total_volume", 500)),
        horizon_steps=int(task_d.get("steps", 20)),
        interval_ns=int(float(task_d.get("interval_s", 60.0)) * 1e9),
    )

    data_d = _section(data, "data")
    kind = data_d.get("kind", "synthetic")
    records = None
    synthetic = None
    if kind == "replay":
        if "messages_csv" in data_d:
            records = parse_messages(str(data_d["messages_csv"]))
        elif "file" in data_d:
            path = str(data_d["file"])
            if base_dir and not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            try:
                with open(path, "r", encoding="ascii") as fh:
                    records = parse_messages(fh)
            except OSError as exc:
                raise RunConfigError(f"cannot read replay file: {exc}") from exc
        else:
            raise RunConfigError("replay data needs 'file' or 'messages_csv'")
    elif kind == "synthetic":
        synthetic = SyntheticConfig(
            seed=int(data_d.get("seed", 0)),
            duration_ns=int(float(data_d.get("duration_s", 3600.0)) * 1e9),
            limit_rate=float(data_d.get("limit_rate", 5.0)),
            market_rate=float(data_d.get("market_rate", 0.5)),
            cancel_rate=float(data_d.get("cancel_rate", 0.05)),
            size_mean=float(data_d.get("size_mean", 100.0)),
            level_decay=float(data_d.get("level_decay", 0.5)),
            init_mid=int(data_d.get("init_mid", 10_000)),
            init_depth=int(data_d.get("init_depth", 500)),
        )
    else:
        raise RunConfigError(f"unknown data kind {kind!r}")

    reward_d = _section(data, "reward")
    reward = RewardConfig(
        window=int(reward_d.get("window", 64)),
        alpha=float(reward_d.get("alpha", 0.01)),
    )

    env_d = _section(data, "env")
    cfg = EnvConfig(
        task=task,
        reward=reward,
        synthetic=synthetic,
        records=records,
        placement=str(env_d.get("placement", "passive")),
        shared_book=bool(env_d.get("shared_book", True)),
        learner_enabled=bool(env_d.get("learner_enabled", True)),
        w_long=int(env_d.get("w_long", 60)),
        event_log=bool(env_d.get("event_log", False)),
        seed=int(data_d.get("seed", 0)),
    )
    cfg.validate()
    return cfg


def episode_seeds_from_dict(data: Dict[str, Any]) -> List[int]:
    ep = _section(data, "episodes")
    if "seeds" in ep:
        seeds = [int(s) for s in ep["seeds"]]
        if not seeds:
            raise RunConfigError("episodes.seeds must be nonempty")
        return seeds
    count = int(ep.get("count", 1))
    base = int(ep.get("base_seed", 0))
    if count < 1:
        raise RunConfigError("episodes.count must be >= 1")
    return [base + i for i in range(count)]


def load_run_config(path: str) -> Tuple[EnvConfig, List[int], Dict[str, Any]]:
    """Parse a TOML run config file; returns (env config, seeds, raw dict)."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise RunConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise RunConfigError(f"bad TOML in {path}: {exc}") from exc
    cfg = env_config_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))
    return cfg, episode_seeds_from_dict(data), data
