"""Multi-agent limit-order-book execution simulator and RL environment."""

from .book import DepthSnapshot, Order, OrderBook, OrderRejected, Side, TradeRecord
from .env import (
    A_LOWER,
    A_UPPER,
    EnvConfig,
    EnvError,
    ExecutionEnv,
    StepResult,
    TaskConfig,
    blend_action,
    placement_prices,
)
from .features import FEATURE_NAMES, FeatureConfig, FeatureEngine
from .kernel import Kernel, KernelError
from .marketdata import (
    MessageRecord,
    ReplayAgent,
    SyntheticConfig,
    generate_synthetic_day,
    parse_messages,
    serialize_messages,
)
from .reports import EpisodeResult, delta_c, summarize
from .rewards import (
    RewardConfig,
    RewardState,
    competitive_reward,
    imitation_reward,
    total_reward,
    windowed_cost_volume,
)
from .runconfig import env_config_from_dict, load_run_config
from .service import create_app
from .tcpserver import EnvClient, EnvServer, start_server

__version__ = "0.1.0"
