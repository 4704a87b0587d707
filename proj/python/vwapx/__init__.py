"""Dual-level VWAP execution engine: U-shape Transformer allocation over
20-minute intervals plus a PPO-trained LSTM policy within them, with a
deterministic limit-order-book replay environment."""

from ._vwapx import (
    EXEC_STEPS,
    INTERVALS,
    SLOTS_PER_DAY,
    SUBINTERVALS,
    IntervalEnv,
    Tape,
    apportion,
    default_config,
    evaluate,
    historical_average,
    reward,
    sample_total_order,
    selftest,
    synth,
    train,
    vaa,
    volume_stats,
)

__all__ = [
    "EXEC_STEPS",
    "INTERVALS",
    "SLOTS_PER_DAY",
    "SUBINTERVALS",
    "IntervalEnv",
    "Tape",
    "apportion",
    "default_config",
    "evaluate",
    "historical_average",
    "reward",
    "sample_total_order",
    "selftest",
    "synth",
    "train",
    "vaa",
    "volume_stats",
]

__version__ = "0.1.0"
