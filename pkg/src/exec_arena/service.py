"""HTTP service wrapping the simulator: data generation, replay, episode
runs, feature dumps, and session-based environments.

The CLI is a thin client of these endpoints; the framed TCP protocol
remains the low-latency path for training loops. Sessions are in-memory
and per-server; each session owns one environment and is stepped strictly
sequentially under its own lock.
"""

from __future__ import annotations

import itertools
import threading
from typing import Dict, List, Optional, Tuple

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import pipelines
from .env import EnvError, ExecutionEnv
from .features import feature_csv
from .marketdata import (
    MessageFormatError,
    SyntheticConfig,
    generate_synthetic_day,
    parse_messages,
    serialize_messages,
)
from .reports import ReportError
from .runconfig import (
    RunConfigError,
    env_config_from_dict,
    episode_seeds_from_dict,
)
from .tcpserver import _jsonable, merge_config


class GenerateDataRequest(BaseModel):
    seed: int = 0
    duration_s: float = 3600.0
    limit_rate: float = 5.0
    market_rate: float = 0.5
    cancel_rate: float = 0.05
    size_mean: float = 100.0
    level_decay: float = 0.5
    init_mid: int = 10_000
    init_depth: int = 500


class GenerateDataResponse(BaseModel):
    csv: str
    records: int


class ReplayRequest(BaseModel):
    messages_csv: str
    depth_every_s: Optional[float] = None
    event_log: bool = False


class ReplayResponse(BaseModel):
    messages: int
    trades: int
    skipped_cancels: int
    trades_csv: str
    depth_csv: Optional[str] = None
    event_log_csv: Optional[str] = None


class PolicySpec(BaseModel):
    constant: Optional[List[float]] = None
    pieces: Optional[List[Tuple[int, List[float]]]] = None

    def build(self) -> pipelines.ScriptedPolicy:
        if self.pieces:
            return pipelines.ScriptedPolicy(self.pieces)
        if self.constant is not None:
            return pipelines.ScriptedPolicy.constant(self.constant)
        return pipelines.ScriptedPolicy.constant([0.0, 0.0, 0.0])


class EpisodeRunRequest(BaseModel):
    config: Dict = Field(default_factory=dict)
    policy: Optional[PolicySpec] = None
    baseline: bool = False    # teacher-only run; disables the learner


class EpisodeRunResponse(BaseModel):
    report_csv: str
    episodes: int
    rewards: List[List[float]]


class FeatureDumpRequest(BaseModel):
    messages_csv: str
    interval_s: float = 60.0
    total_volume: int = 1000
    steps: Optional[int] = None


class FeatureDumpResponse(BaseModel):
    csv: str
    rows: int


class SessionCreateRequest(BaseModel):
    config: Dict = Field(default_factory=dict)


class SessionState(BaseModel):
    session_id: int
    obs: List[List[float]]
    info: Dict


class SessionStepRequest(BaseModel):
    action: List[float]


class SessionStepResponse(BaseModel):
    obs: List[List[float]]
    reward: float
    done: bool
    info: Dict


class _Session:
    def __init__(self, env: ExecutionEnv) -> None:
        self.env = env
        self.lock = threading.Lock()
        self.done = False


def create_app(base_config: Optional[Dict] = None) -> FastAPI:
    app = FastAPI(title="exec-arena", version="0.1.0")
    base = base_config or {}
    sessions: Dict[int, _Session] = {}
    session_ids = itertools.count(1)
    sessions_lock = threading.Lock()

    def fail(status: int, exc: Exception) -> HTTPException:
        return HTTPException(status_code=status, detail=str(exc))

    @app.get("/health")
    def health() -> Dict[str, str]:
        return {"status": "ok"}

    @app.post("/data/generate", response_model=GenerateDataResponse)
    def generate(req: GenerateDataRequest) -> GenerateDataResponse:
        cfg = SyntheticConfig(
            seed=req.seed, duration_ns=int(req.duration_s * 1e9),
            limit_rate=req.limit_rate, market_rate=req.market_rate,
            cancel_rate=req.cancel_rate, size_mean=req.size_mean,
            level_decay=req.level_decay, init_mid=req.init_mid,
            init_depth=req.init_depth,
        )
        try:
            records = generate_synthetic_day(cfg)
        except ValueError as exc:
            raise fail(422, exc)
        return GenerateDataResponse(csv=serialize_messages(records),
                                    records=len(records))

    @app.post("/replay", response_model=ReplayResponse)
    def replay(req: ReplayRequest) -> ReplayResponse:
        try:
            records = parse_messages(req.messages_csv)
        except MessageFormatError as exc:
            raise fail(422, exc)
        every = int(req.depth_every_s * 1e9) if req.depth_every_s else None
        result = pipelines.replay_to_logs(records, depth_every_ns=every,
                                          event_log=req.event_log)
        return ReplayResponse(
            messages=result.messages, trades=result.trades,
            skipped_cancels=result.skipped_cancels,
            trades_csv=result.trades_csv, depth_csv=result.depth_csv,
            event_log_csv=result.event_log_csv,
        )

    @app.post("/episodes/run", response_model=EpisodeRunResponse)
    def run_episodes(req: EpisodeRunRequest) -> EpisodeRunResponse:
        config = merge_config(base, req.config)
        if req.baseline:
            config = merge_config(config, {"env": {"learner_enabled": False}})
        try:
            env_cfg = env_config_from_dict(config)
            seeds = episode_seeds_from_dict(config)
            policy = (req.policy or PolicySpec()).build()
            artifacts, report = pipelines.run_episodes(env_cfg, policy, seeds)
        except (RunConfigError, EnvError, ReportError, ValueError) as exc:
            raise fail(422, exc)
        return EpisodeRunResponse(
            report_csv=report, episodes=len(artifacts),
            rewards=[a.rewards for a in artifacts],
        )

    @app.post("/features", response_model=FeatureDumpResponse)
    def features(req: FeatureDumpRequest) -> FeatureDumpResponse:
        try:
            records = parse_messages(req.messages_csv)
            rows = pipelines.feature_rows_from_records(
                records, interval_ns=int(req.interval_s * 1e9),
                total_volume=req.total_volume, horizon_steps=req.steps,
            )
        except (MessageFormatError, ValueError) as exc:
            raise fail(422, exc)
        return FeatureDumpResponse(csv=feature_csv(rows), rows=len(rows))

    @app.post("/sessions", response_model=SessionState)
    def create_session(req: SessionCreateRequest) -> SessionState:
        config = merge_config(base, req.config)
        try:
            env = ExecutionEnv(env_config_from_dict(config))
            result = env.reset()
        except (RunConfigError, EnvError, ValueError) as exc:
            raise fail(422, exc)
        with sessions_lock:
            sid = next(session_ids)
            sessions[sid] = _Session(env)
        return SessionState(session_id=sid, obs=result.observation.tolist(),
                            info=_jsonable(result.info))

    def _get_session(sid: int) -> _Session:
        with sessions_lock:
            session = sessions.get(sid)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    @app.post("/sessions/{sid}/step", response_model=SessionStepResponse)
    def step_session(sid: int, req: SessionStepRequest) -> SessionStepResponse:
        session = _get_session(sid)
        if len(req.action) != 3:
            raise HTTPException(status_code=422, detail="action must have 3 values")
        with session.lock:
            if session.done:
                raise HTTPException(status_code=409, detail="episode_finished")
            try:
                result = session.env.step(req.action)
            except EnvError as exc:
                raise fail(409, exc)
            session.done = result.done
        return SessionStepResponse(obs=result.observation.tolist(),
                                   reward=result.reward, done=result.done,
                                   info=_jsonable(result.info))

    @app.delete("/sessions/{sid}")
    def close_session(sid: int) -> Dict[str, str]:
        with sessions_lock:
            if sessions.pop(sid, None) is None:
                raise HTTPException(status_code=404, detail="unknown session")
        return {"status": "closed"}

    return app
