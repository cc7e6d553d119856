"""Look-compute-move execution of two robots over integer ticks.

A run is driven by an adversary policy (see :mod:`compass_gathering.adversary`)
that supplies every nondeterministic choice: which robots are activated, the
compass deviation and scale of each new cycle, how far each moving robot gets
in each tick, and (asynchronous mode only) when a move phase ends. The engine
validates every choice against the model's contracts and records it in the
event log, so an execution can be replayed bit for bit from its events.

Per tick ``t`` the engine:

1. closes the open cycles the adversary chooses to end (asynchronous mode);
2. activates robots; each takes a snapshot of the other robot's position at
   ``t`` through a frame fixed for the whole cycle, and computes its target;
3. certifies gathering, detects deadlock, or stops at the horizon;
4. moves every robot with an open cycle toward its target, giving ``C(t+1)``.
   In semi-synchronous mode each cycle then ends before ``t+1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .algorithms import ActionKind, AlgorithmSpec, Decision, RobotState, decide, decide_with_region, sweep_state
from .frames import CompassMode, CompassSpec, LocalFrame, to_global, to_local
from .geometry import Point, argum

# Absolute slack for floating-point comparisons of distances.
DIST_EPS = 1e-12


class SchedulerMode(str, enum.Enum):
    SEMI_SYNC = "semi-synchronous"
    ASYNC = "asynchronous"


class EventKind(str, enum.Enum):
    ACTIVATE = "activate"
    LOOK = "look"
    PROGRESS = "progress"
    CYCLE_END = "cycle_end"
    TERMINATE = "terminate"


class Outcome(str, enum.Enum):
    GATHERED = "gathered"
    STUCK = "stuck"
    HORIZON = "horizon"
    SCRIPT_END = "script_end"


class EngineError(Exception):
    pass


class ContractViolation(EngineError):
    """An adversary choice broke a model contract; the run is aborted."""

    def __init__(self, tick: int, robot: Optional[int], message: str):
        self.tick = tick
        self.robot = robot
        where = f"tick {tick}" + ("" if robot is None else f", robot {robot}")
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class EngineConfig:
    mode: SchedulerMode = SchedulerMode.SEMI_SYNC
    delta: float = 0.01
    fairness_bound: int = 4
    max_cycle_ticks: int = 8
    horizon: int = 100_000
    # extra ticks simulated after gathering is certified
    linger: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", SchedulerMode(self.mode))
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.fairness_bound < 1 or self.max_cycle_ticks < 1:
            raise ValueError("fairness_bound and max_cycle_ticks must be >= 1")
        if self.horizon < 0 or self.linger < 0:
            raise ValueError("horizon and linger must be non-negative")

    @property
    def is_async(self) -> bool:
        return self.mode is SchedulerMode.ASYNC

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "delta": self.delta,
            "fairness_bound": self.fairness_bound,
            "max_cycle_ticks": self.max_cycle_ticks,
            "horizon": self.horizon,
            "linger": self.linger,
        }


class Configuration(NamedTuple):
    r0: Point
    r1: Point

    def co_located(self) -> bool:
        return self.r0[0] == self.r1[0] and self.r0[1] == self.r1[1]

    def to_list(self) -> list:
        return [[self.r0[0], self.r0[1]], [self.r1[0], self.r1[1]]]

    @classmethod
    def of(cls, r0, r1) -> "Configuration":
        return cls(Point(float(r0[0]), float(r0[1])), Point(float(r1[0]), float(r1[1])))


@dataclass(slots=True)
class TraceEvent:
    tick: int
    robot: int
    kind: EventKind
    deviation: float
    scale: float
    state: Optional[str] = None
    target: Optional[Point] = None  # global target
    observed: Optional[Point] = None  # local coordinates of the other robot
    displacement: Optional[float] = None
    position: Optional[Point] = None

    def to_dict(self) -> dict:
        d = {
            "record": "event",
            "tick": self.tick,
            "robot": self.robot,
            "kind": self.kind.value,
            "deviation": self.deviation,
            "scale": self.scale,
        }
        for name in ("state", "displacement"):
            v = getattr(self, name)
            if v is not None:
                d[name] = v
        for name in ("target", "observed", "position"):
            v = getattr(self, name)
            if v is not None:
                d[name] = [v[0], v[1]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEvent":
        def pt(key):
            v = d.get(key)
            return None if v is None else Point(float(v[0]), float(v[1]))

        return cls(
            tick=int(d["tick"]),
            robot=int(d["robot"]),
            kind=EventKind(d["kind"]),
            deviation=float(d["deviation"]),
            scale=float(d["scale"]),
            state=d.get("state"),
            target=pt("target"),
            observed=pt("observed"),
            displacement=None if d.get("displacement") is None else float(d["displacement"]),
            position=pt("position"),
        )


@dataclass(slots=True)
class CycleRuntime:
    robot: int
    start_tick: int
    frame: LocalFrame
    observed: Point
    decision: Decision
    start: Point
    target_global: Point
    total: float  # distance from start to target
    displaced: float = 0.0
    open: bool = True

    @property
    def remaining(self) -> float:
        return self.total - self.displaced

    def floor_met(self, delta: float) -> bool:
        return self.displaced == self.total or self.displaced >= min(delta, self.total) - DIST_EPS

    def position(self) -> Point:
        if self.displaced == self.total:
            return self.target_global
        if self.displaced == 0.0:
            return self.start
        f = self.displaced / self.total
        sx, sy = self.start
        return Point(sx + (self.target_global[0] - sx) * f, sy + (self.target_global[1] - sy) * f)


def plan_cycle(alg: AlgorithmSpec, robot: int, tick: int, frame: LocalFrame, other) -> CycleRuntime:
    """Look and compute: observe ``other`` through ``frame`` and fix the move target."""
    observed = to_local(frame, other)
    decision, region = decide_with_region(alg, observed)
    me = frame.origin
    if region is None or region.action is ActionKind.STAY:
        target = me
    elif region.action is ActionKind.MOVE_TO_OBSERVED:
        # identical to to_global(frame, observed) in exact arithmetic
        target = Point(float(other[0]), float(other[1]))
    else:
        target = to_global(frame, decision.target_local)
    total = math.hypot(target[0] - me[0], target[1] - me[1])
    return CycleRuntime(robot, tick, frame, observed, decision, me, target, total)


@dataclass
class Execution:
    algorithm: AlgorithmSpec
    engine: EngineConfig
    compass: CompassSpec
    initial: Configuration
    seed: Optional[int] = None
    adversary: str = ""
    configs: list = field(default_factory=list)
    events: list = field(default_factory=list)
    # remaining displacement of each robot after the activations of each tick
    remaining: list = field(default_factory=list)
    static_deviations: Optional[tuple] = None
    outcome: Optional[Outcome] = None
    gathered_tick: Optional[int] = None
    pseudo_ticks: list = field(default_factory=list)
    terminated: tuple = (False, False)

    @property
    def final(self) -> Configuration:
        return self.configs[-1]

    @property
    def last_tick(self) -> int:
        return len(self.configs) - 1

    @property
    def gathered(self) -> bool:
        return self.outcome is Outcome.GATHERED


class AdversaryPolicy:
    """Source of every nondeterministic choice in a run.

    Subclasses override the callbacks they care about; the defaults activate
    both robots every tick with perfect compasses, unit scale and full moves.
    """

    name = "default"

    def reset(self, sim: "Simulation") -> None:
        pass

    def static_deviation(self, sim: "Simulation", robot: int) -> float:
        return 0.0

    def close(self, sim: "Simulation", cycle: CycleRuntime) -> bool:
        return cycle.floor_met(sim.config.delta)

    def activations(self, sim: "Simulation"):
        return [i for i in (0, 1) if sim.can_activate(i)]

    def deviation(self, sim: "Simulation", robot: int) -> float:
        return 0.0

    def scale(self, sim: "Simulation", robot: int) -> float:
        return 1.0

    def progress(self, sim: "Simulation", cycle: CycleRuntime) -> float:
        return cycle.remaining

    def finished(self, sim: "Simulation") -> bool:
        return False


class Simulation:
    """Mutable state of one run. Use :func:`run` unless stepping by hand."""

    def __init__(self, alg: AlgorithmSpec, config: EngineConfig, compass: CompassSpec, initial, execution=None):
        self.alg = alg
        self.config = config
        self.compass = compass
        initial = Configuration.of(*initial)
        for p in initial:
            if not (math.isfinite(p[0]) and math.isfinite(p[1])):
                raise EngineError(f"non-finite initial position {p}")
        self.positions = [initial.r0, initial.r1]
        self.cycles: list = [None, None]
        self.terminated = [False, False]
        self.last_activation = [-1, -1]
        self.last_state = [None, None]
        self.static_deviations = None
        self.tick = 0
        self.done = False
        self.execution = execution or Execution(alg, config, compass, initial)
        self.execution.configs.append(initial)
        self.events = self.execution.events

    # -- queries used by adversaries -------------------------------------

    def can_activate(self, robot: int) -> bool:
        return not self.terminated[robot] and self.cycles[robot] is None

    def configuration(self) -> Configuration:
        return Configuration(self.positions[0], self.positions[1])

    def activation_deadline(self, robot: int) -> int:
        """Latest tick at which ``robot`` must be activated to keep fairness."""
        return self.last_activation[robot] + self.config.fairness_bound

    def close_deadline(self, cycle: CycleRuntime) -> int:
        """Latest tick at which ``cycle`` must be closed."""
        return min(cycle.start_tick + self.config.max_cycle_ticks, self.activation_deadline(cycle.robot))

    # -- stepping ---------------------------------------------------------

    def fix_static_deviations(self, policy: AdversaryPolicy) -> None:
        if not self.compass.is_static:
            return
        devs = tuple(float(policy.static_deviation(self, i)) for i in (0, 1))
        for i, d in enumerate(devs):
            if not self.compass.admits(d):
                raise ContractViolation(0, i, f"static deviation {d} exceeds bound {self.compass.bound}")
        self.static_deviations = devs
        self.execution.static_deviations = devs

    def step(self, policy: AdversaryPolicy) -> None:
        if self.done:
            raise EngineError("simulation already finished")
        t = self.tick
        cfg = self.config
        ex = self.execution

        # a finished policy gets one idle tick so the final status is still evaluated
        ending = policy.finished(self)

        if cfg.is_async and not ending:
            for cycle in self.cycles:
                if cycle is not None and policy.close(self, cycle):
                    if not cycle.floor_met(cfg.delta):
                        raise ContractViolation(
                            t, cycle.robot,
                            f"cycle closed after {cycle.displaced!r} < min(delta, {cycle.total!r})",
                        )
                    self._end_cycle(cycle)

        acts = [] if ending else sorted(set(int(i) for i in policy.activations(self)))
        for i in acts:
            if i not in (0, 1):
                raise ContractViolation(t, None, f"no robot {i}")
            if self.terminated[i]:
                raise ContractViolation(t, i, "activated after termination")
            if self.cycles[i] is not None:
                raise ContractViolation(t, i, "activated while its previous cycle is open")
        if not cfg.is_async and not acts and not all(self.terminated) and not ending:
            raise ContractViolation(t, None, "semi-synchronous tick without activation")

        frames = {}
        for i in acts:
            if self.static_deviations is not None:
                dev = self.static_deviations[i]
            else:
                dev = float(policy.deviation(self, i))
                if not self.compass.admits(dev):
                    raise ContractViolation(t, i, f"deviation {dev} exceeds bound {self.compass.bound}")
            sc = float(policy.scale(self, i))
            if not (sc > 0.0 and math.isfinite(sc)):
                raise ContractViolation(t, i, f"invalid scale {sc}")
            frames[i] = LocalFrame(self.positions[i], dev, sc)
            self.events.append(TraceEvent(t, i, EventKind.ACTIVATE, dev, sc))
            self.last_activation[i] = t

        # every snapshot is taken before anybody moves in this tick
        snapshot = (self.positions[0], self.positions[1])
        for i in acts:
            fr = frames[i]
            cycle = plan_cycle(self.alg, i, t, fr, snapshot[1 - i])
            state = cycle.decision.state
            self.last_state[i] = state
            if state is RobotState.T:
                self.terminated[i] = True
                self.events.append(TraceEvent(t, i, EventKind.TERMINATE, fr.deviation, fr.scale,
                                              state=state.value, observed=cycle.observed))
                continue
            self.cycles[i] = cycle
            self.events.append(TraceEvent(t, i, EventKind.LOOK, fr.deviation, fr.scale, state=state.value,
                                          target=cycle.target_global, observed=cycle.observed))

        for i in () if ending else (0, 1):
            if not self.terminated[i] and t - self.last_activation[i] >= cfg.fairness_bound:
                raise ContractViolation(t, i, f"not activated within {cfg.fairness_bound} ticks")
            c = self.cycles[i]
            if c is not None and t - c.start_tick >= cfg.max_cycle_ticks:
                raise ContractViolation(t, i, f"cycle open longer than {cfg.max_cycle_ticks} ticks")

        rem = tuple(0.0 if c is None else c.remaining for c in self.cycles)
        ex.remaining.append(rem)

        co_located = snapshot[0][0] == snapshot[1][0] and snapshot[0][1] == snapshot[1][1]
        if co_located:
            if rem[0] == 0.0 and rem[1] == 0.0:
                if ex.gathered_tick is None:
                    ex.gathered_tick = t
                    ex.outcome = Outcome.GATHERED
                if t >= ex.gathered_tick + cfg.linger:
                    return self._finish()
            else:
                ex.pseudo_ticks.append(t)
        elif ex.gathered_tick is not None:
            raise EngineError(f"robots separated at tick {t} after gathering at {ex.gathered_tick}")
        elif rem[0] == 0.0 and rem[1] == 0.0 and self._frozen():
            ex.outcome = Outcome.STUCK
            return self._finish()
        if ending:
            if ex.outcome is None:
                ex.outcome = Outcome.SCRIPT_END
            return self._finish()
        if t >= cfg.horizon:
            if ex.outcome is None:
                ex.outcome = Outcome.HORIZON
            return self._finish()

        for cycle in self.cycles:
            if cycle is None:
                continue
            i = cycle.robot
            if cycle.total == 0.0:
                continue
            disp = float(policy.progress(self, cycle))
            remaining = cycle.remaining
            if not (disp >= 0.0 and math.isfinite(disp)) or disp > remaining + DIST_EPS:
                raise ContractViolation(t, i, f"displacement {disp!r} outside [0, {remaining!r}]")
            if not cfg.is_async and disp < min(cfg.delta, cycle.total) - DIST_EPS:
                raise ContractViolation(t, i, f"move of {disp!r} below min(delta, {cycle.total!r})")
            if disp == 0.0:
                continue
            if disp >= remaining:
                cycle.displaced = cycle.total
            else:
                cycle.displaced += disp
            pos = cycle.position()
            if not (math.isfinite(pos[0]) and math.isfinite(pos[1])):
                raise EngineError(f"tick {t}, robot {i}: position overflowed to {pos}")
            self.positions[i] = pos
            fr = cycle.frame
            self.events.append(TraceEvent(t, i, EventKind.PROGRESS, fr.deviation, fr.scale,
                                          displacement=disp, position=pos))

        if not cfg.is_async:
            for cycle in self.cycles:
                if cycle is not None:
                    self._end_cycle(cycle)

        self.tick = t + 1
        ex.configs.append(Configuration(self.positions[0], self.positions[1]))

    def _end_cycle(self, cycle: CycleRuntime) -> None:
        cycle.open = False
        self.cycles[cycle.robot] = None
        fr = cycle.frame
        self.events.append(TraceEvent(self.tick, cycle.robot, EventKind.CYCLE_END, fr.deviation, fr.scale,
                                      displacement=cycle.displaced, position=self.positions[cycle.robot]))

    def _frozen(self) -> bool:
        """True when no robot can ever move again from the current configuration."""
        for i in (0, 1):
            if self.terminated[i]:
                continue
            me, other = self.positions[i], self.positions[1 - i]
            centre = argum((other[0] - me[0], other[1] - me[1]))
            if self.static_deviations is not None:
                d = decide(self.alg, to_local(LocalFrame(me, self.static_deviations[i]), other))
                if d.state is not RobotState.W:
                    return False
            elif sweep_state(self.alg, centre, self.compass.bound) is not RobotState.W:
                return False
        return True

    def _finish(self) -> None:
        self.done = True
        self.execution.terminated = tuple(self.terminated)


def run(alg: AlgorithmSpec, config: EngineConfig, compass: CompassSpec, adversary: AdversaryPolicy,
        initial, seed: Optional[int] = None) -> Execution:
    """Execute one run to gathering, deadlock, script end or the horizon."""
    sim = Simulation(alg, config, compass, initial)
    sim.execution.seed = seed
    sim.execution.adversary = adversary.name
    adversary.reset(sim)
    sim.fix_static_deviations(adversary)
    while not sim.done:
        sim.step(adversary)
    return sim.execution


class FixedChoices(AdversaryPolicy):
    """Policy for a single hand-specified step."""

    name = "fixed"

    def __init__(self, activate=(), deviations=None, scales=None, progress=None, close=()):
        self._activate = tuple(activate)
        self._dev = dict(deviations or {})
        self._scale = dict(scales or {})
        self._progress = dict(progress or {})
        self._close = set(close)

    def static_deviation(self, sim, robot):
        return self._dev.get(robot, 0.0)

    def close(self, sim, cycle):
        return cycle.robot in self._close

    def activations(self, sim):
        return self._activate

    def deviation(self, sim, robot):
        return self._dev.get(robot, 0.0)

    def scale(self, sim, robot):
        return self._scale.get(robot, 1.0)

    def progress(self, sim, cycle):
        v = self._progress.get(cycle.robot, "full")
        return cycle.remaining if v == "full" else v


def step_semi_sync(alg: AlgorithmSpec, config, activations, frames=None, progress=None,
                   delta: float = 0.01) -> Configuration:
    """One semi-synchronous tick from ``config``; returns the next configuration.

    ``frames`` maps robot -> (deviation, scale); ``progress`` maps robot ->
    global displacement or ``"full"`` (the default).
    """
    frames = frames or {}
    devs = {i: f[0] for i, f in frames.items()}
    scales = {i: f[1] for i, f in frames.items()}
    bound = max([abs(d) for d in devs.values()] + [0.0])
    eng = EngineConfig(SchedulerMode.SEMI_SYNC, delta=delta, fairness_bound=1 << 30, horizon=1)
    sim = Simulation(alg, eng, CompassSpec(CompassMode.DYNAMIC, min(bound, math.pi)), config)
    sim.step(FixedChoices(activations, devs, scales, progress))
    return sim.configuration()


def step_async(sim: Simulation, tick: int, choices: AdversaryPolicy) -> Simulation:
    """Advance ``sim`` by the single tick ``tick`` using ``choices``."""
    if sim.tick != tick:
        raise EngineError(f"simulation is at tick {sim.tick}, not {tick}")
    if not sim.config.is_async:
        raise EngineError("step_async needs an asynchronous simulation")
    sim.step(choices)
    return sim


@dataclass(frozen=True)
class GatheringStatus:
    kind: str  # "gathered", "pseudo_gathered" or "inconclusive"
    tick: Optional[int] = None
    pseudo_ticks: tuple = ()


def is_settled(execution: Execution, robot: int, tick: int) -> bool:
    """True iff ``robot`` has no pending displacement at ``tick``."""
    if not 0 <= tick < len(execution.remaining):
        raise IndexError(f"tick {tick} outside the trace")
    return execution.remaining[tick][robot] == 0.0


def gathering_status(execution: Execution) -> GatheringStatus:
    pseudo = []
    gathered = None
    for t, cfg in enumerate(execution.configs):
        if t >= len(execution.remaining) or not cfg.co_located():
            continue
        if is_settled(execution, 0, t) and is_settled(execution, 1, t):
            if gathered is None:
                gathered = t
        else:
            pseudo.append(t)
    if gathered is not None:
        return GatheringStatus("gathered", gathered, tuple(pseudo))
    if pseudo:
        return GatheringStatus("pseudo_gathered", None, tuple(pseudo))
    return GatheringStatus("inconclusive")
