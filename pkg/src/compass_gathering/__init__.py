"""Two-robot gathering with unreliable compasses: algorithms, an adversarial
look-compute-move engine, and trace invariant checks."""

from .algorithms import (
    AlgorithmId,
    AlgorithmSpec,
    Decision,
    RobotState,
    StatePair,
    UNSTABLE,
    decide,
    region_table,
    stable_state,
)
from .engine import (
    Configuration,
    ContractViolation,
    EngineConfig,
    Execution,
    Outcome,
    SchedulerMode,
    gathering_status,
    is_settled,
    run,
    step_async,
    step_semi_sync,
)
from .frames import CompassMode, CompassSpec, LocalFrame, deviation_range, to_global, to_local
from .geometry import PARALLEL, AngularInterval, Point, argum, line_intersection, rotate

__all__ = [
    "AlgorithmId", "AlgorithmSpec", "AngularInterval", "CompassMode", "CompassSpec", "Configuration",
    "ContractViolation", "Decision", "EngineConfig", "Execution", "LocalFrame", "Outcome", "PARALLEL",
    "Point", "RobotState", "SchedulerMode", "StatePair", "UNSTABLE", "argum", "decide",
    "deviation_range", "gathering_status", "is_settled", "line_intersection", "region_table", "rotate",
    "run", "stable_state", "step_async", "step_semi_sync", "to_global", "to_local",
]
