"""Deterministic simulation of eventual leader election over lossy timed channels."""

from .core import (
    AddParams,
    AliveKnown,
    AliveUnknown,
    Label,
    compute_delta,
    decode_known,
    decode_unknown,
    encode_known,
    encode_unknown,
)
from .harness import RunResult, Scenario, run_scenario, sweep

__version__ = "0.1.0"

__all__ = [
    "AddParams",
    "AliveKnown",
    "AliveUnknown",
    "Label",
    "RunResult",
    "Scenario",
    "compute_delta",
    "decode_known",
    "decode_unknown",
    "encode_known",
    "encode_unknown",
    "run_scenario",
    "sweep",
]
