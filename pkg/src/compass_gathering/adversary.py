"""Adversary policies: random fair schedules, scripts, replays, the mirror
strategy and a randomized search for long or non-gathering executions."""

from __future__ import annotations

import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .algorithms import RobotState, decide, region_table
from .engine import (
    AdversaryPolicy,
    Configuration,
    CycleRuntime,
    EngineConfig,
    EventKind,
    Execution,
    Outcome,
    SchedulerMode,
    run,
)
from .frames import CompassMode, CompassSpec, LocalFrame, to_local
from .geometry import TWO_PI

# fractions of the remaining distance; 0.0 stands for the delta floor
DEFAULT_PROGRESS_GRID = (0.0, 0.25, 0.5, 1.0)


def _floor_step(sim, cycle: CycleRuntime) -> float:
    """Smallest displacement that satisfies the delta floor from here on."""
    need = min(sim.config.delta, cycle.total) - cycle.displaced
    return max(need, 0.0)


class RandomFair(AdversaryPolicy):
    """Uniformly random choices subject to bounded fairness ``k``.

    Static deviations are drawn once from [-bound, bound]. Dynamic deviations
    are redrawn at every activation and hit the extremes -bound and +bound a
    third of the time each, since boundary views are where algorithms break.
    """

    name = "random_fair"

    def __init__(self, seed, k: int = 4, activation_prob: float = 0.5, close_prob: float = 0.5,
                 scale_range=(0.5, 2.0), progress_grid=DEFAULT_PROGRESS_GRID):
        if k < 1:
            raise ValueError("fairness bound k must be >= 1")
        self.seed = seed
        self.k = k
        self.activation_prob = activation_prob
        self.close_prob = close_prob
        self.scale_range = scale_range
        self.progress_grid = tuple(progress_grid)
        self.rng = random.Random(seed)

    def reset(self, sim):
        self.rng = random.Random(self.seed)
        self.k_eff = min(self.k, sim.config.fairness_bound)

    def _deadline(self, sim, robot):
        return sim.last_activation[robot] + self.k_eff

    def static_deviation(self, sim, robot):
        b = sim.compass.bound
        return self.rng.uniform(-b, b)

    def activations(self, sim):
        t = sim.tick
        acts = []
        ready = [i for i in (0, 1) if sim.can_activate(i)]
        for i in ready:
            if t >= self._deadline(sim, i) or self.rng.random() < self.activation_prob:
                acts.append(i)
        if not acts and ready:
            acts.append(self.rng.choice(ready))
        return acts

    def deviation(self, sim, robot):
        b = sim.compass.bound
        u = self.rng.random()
        if u < 1 / 3:
            return -b
        if u < 2 / 3:
            return b
        return self.rng.uniform(-b, b)

    def scale(self, sim, robot):
        lo, hi = self.scale_range
        return self.rng.uniform(lo, hi)

    def close(self, sim, cycle):
        if not cycle.floor_met(sim.config.delta):
            return False
        if sim.tick >= self._close_deadline(sim, cycle):
            return True
        return self.rng.random() < self.close_prob

    def _close_deadline(self, sim, cycle):
        return min(cycle.start_tick + sim.config.max_cycle_ticks, cycle.start_tick + self.k_eff)

    def _fraction(self, sim, cycle) -> float:
        return self.rng.choice(self.progress_grid)

    def progress(self, sim, cycle):
        frac = self._fraction(sim, cycle)
        if not sim.config.is_async:
            if frac >= 1.0:
                return cycle.remaining
            return max(min(sim.config.delta, cycle.total), frac * cycle.total)
        # asynchronous: a share of what is left, possibly nothing this tick
        if self.rng.random() < 0.25:
            disp = 0.0
        elif frac >= 1.0:
            disp = cycle.remaining
        elif frac == 0.0:
            disp = _floor_step(sim, cycle)
        else:
            disp = frac * cycle.remaining
        if sim.tick + 1 >= self._close_deadline(sim, cycle):
            disp = max(disp, _floor_step(sim, cycle))
        return min(disp, cycle.remaining)


def random_fair(seed, k: int = 4, **kwargs) -> RandomFair:
    return RandomFair(seed, k, **kwargs)


class GreedyStaller(RandomFair):
    """Random fair adversary that, with probability ``greed``, picks the
    deviation putting the activated robot in the least helpful state
    (Rotate, then Wait, then Approach) and moves it by the delta floor."""

    name = "greedy_staller"
    PREFERENCE = {RobotState.R: 3, RobotState.W: 2, RobotState.A: 1, RobotState.G: 0, RobotState.T: 0}

    def __init__(self, seed, greed: float, k: int = 4, **kwargs):
        super().__init__(seed, k, **kwargs)
        self.greed = greed

    def deviation(self, sim, robot):
        b = sim.compass.bound
        if self.rng.random() >= self.greed or b == 0.0:
            return super().deviation(sim, robot)
        me, other = sim.positions[robot], sim.positions[1 - robot]
        best, best_rank = None, -1
        for dev in (-b, -b / 2, 0.0, b / 2, b):
            st = decide(sim.alg, to_local(LocalFrame(me, dev), other)).state
            rank = self.PREFERENCE[st]
            if rank > best_rank:
                best, best_rank = dev, rank
        return best

    def _fraction(self, sim, cycle):
        if self.rng.random() < self.greed:
            return 0.0
        return super()._fraction(sim, cycle)


class SymmetricMirror(AdversaryPolicy):
    """Keeps the configuration point-symmetric about its midpoint.

    The two static deviations differ by exactly pi, so both robots see the
    other at the same local coordinates, compute the same local target, and
    move in opposite global directions. Both robots are activated every tick
    and move by the same amount: the delta floor by default, or the full
    distance with ``progress="full"`` (which can overflow doubles within a few
    hundred ticks, since the distance may triple per tick).
    """

    name = "symmetric_mirror"

    def __init__(self, axis_angle: float = math.pi / 2, bound: float = math.pi / 2, progress: str = "floor"):
        dev0 = math.remainder(axis_angle, TWO_PI)
        dev1 = math.remainder(axis_angle - math.pi, TWO_PI)
        if dev1 == -math.pi:
            dev1 = math.pi
        if max(abs(dev0), abs(dev1)) > bound + 1e-15:
            raise ValueError(
                f"mirror deviations ({dev0:.4g}, {dev1:.4g}) exceed the compass bound {bound:.4g}; "
                "a mirror adversary needs a bound of at least pi/2"
            )
        if progress not in ("floor", "full"):
            raise ValueError("progress must be 'floor' or 'full'")
        self.deviations = (dev0, dev1)
        self.mode = progress

    def reset(self, sim):
        if not sim.compass.is_static:
            raise ValueError("mirror adversary runs with static compasses")
        if not all(sim.compass.admits(d) for d in self.deviations):
            raise ValueError("mirror deviations exceed the run's compass bound")

    def static_deviation(self, sim, robot):
        return self.deviations[robot]

    def activations(self, sim):
        return [i for i in (0, 1) if sim.can_activate(i)]

    def close(self, sim, cycle):
        return True

    def progress(self, sim, cycle):
        if self.mode == "full":
            return cycle.remaining
        return min(sim.config.delta, cycle.total)


def symmetric_mirror(axis_angle: float = math.pi / 2, bound: float = math.pi / 2, **kwargs) -> SymmetricMirror:
    return SymmetricMirror(axis_angle, bound, **kwargs)


# -- scripts ----------------------------------------------------------------


@dataclass
class TickDirective:
    tick: int
    activate: tuple = ()
    close: tuple = ()
    deviation: dict = field(default_factory=dict)
    scale: dict = field(default_factory=dict)
    # fraction of the remaining distance covered in this tick
    progress: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "TickDirective":
        def robots(m):
            return {int(k): v for k, v in (m or {}).items()}

        prog = {}
        for k, v in robots(d.get("progress")).items():
            prog[k] = 1.0 if v == "full" else float(v)
        return cls(
            tick=int(d["tick"]),
            activate=tuple(int(i) for i in d.get("activate", ())),
            close=tuple(int(i) for i in d.get("close", ())),
            deviation={k: float(v) for k, v in robots(d.get("deviation")).items()},
            scale={k: float(v) for k, v in robots(d.get("scale")).items()},
            progress=prog,
        )

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "activate": list(self.activate),
            "close": list(self.close),
            "deviation": {str(k): v for k, v in self.deviation.items()},
            "scale": {str(k): v for k, v in self.scale.items()},
            "progress": {str(k): v for k, v in self.progress.items()},
        }


@dataclass
class ScenarioScript:
    """A fully specified run: model parameters, initial configuration and
    per-tick directives. Loaded from and saved to JSON."""

    algorithm: str
    phi: float
    initial: Configuration
    directives: list
    mode: SchedulerMode = SchedulerMode.SEMI_SYNC
    compass: CompassSpec = field(default_factory=CompassSpec)
    static_deviations: tuple = (0.0, 0.0)
    terminate_variant: bool = False
    override: bool = False
    delta: float = 0.01
    fairness_bound: int = 4
    max_cycle_ticks: int = 8
    horizon: int = 1000
    name: str = ""
    expect: dict = field(default_factory=dict)

    def algorithm_spec(self):
        return region_table(self.algorithm, self.phi, self.terminate_variant, self.override)

    def engine_config(self) -> EngineConfig:
        return EngineConfig(self.mode, self.delta, self.fairness_bound, self.max_cycle_ticks, self.horizon)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioScript":
        comp = d.get("compass", {})
        return cls(
            algorithm=d["algorithm"],
            phi=float(d.get("phi", 0.0)),
            initial=Configuration.of(*d["initial"]),
            directives=[TickDirective.from_dict(x) for x in d.get("ticks", [])],
            mode=SchedulerMode(d.get("mode", SchedulerMode.SEMI_SYNC.value)),
            compass=CompassSpec(comp.get("mode", "static"), float(comp.get("bound", 0.0))),
            static_deviations=tuple(float(x) for x in d.get("static_deviations", (0.0, 0.0))),
            terminate_variant=bool(d.get("terminate_variant", False)),
            override=bool(d.get("override", False)),
            delta=float(d.get("delta", 0.01)),
            fairness_bound=int(d.get("fairness_bound", 4)),
            max_cycle_ticks=int(d.get("max_cycle_ticks", 8)),
            horizon=int(d.get("horizon", 1000)),
            name=d.get("name", ""),
            expect=d.get("expect", {}),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "algorithm": self.algorithm,
            "phi": self.phi,
            "terminate_variant": self.terminate_variant,
            "override": self.override,
            "mode": self.mode.value,
            "compass": {"mode": self.compass.mode.value, "bound": self.compass.bound},
            "static_deviations": list(self.static_deviations),
            "delta": self.delta,
            "fairness_bound": self.fairness_bound,
            "max_cycle_ticks": self.max_cycle_ticks,
            "horizon": self.horizon,
            "initial": self.initial.to_list(),
            "ticks": [x.to_dict() for x in self.directives],
            "expect": self.expect,
        }

    @classmethod
    def load(cls, path) -> "ScenarioScript":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


class ScriptError(ValueError):
    pass


class Scripted(AdversaryPolicy):
    """Follows a :class:`ScenarioScript` verbatim; ticks without a directive
    activate nobody. The run ends once the last directive's tick has moved."""

    name = "scripted"

    def __init__(self, script: ScenarioScript):
        self.script = script
        self.by_tick = {}
        for d in script.directives:
            if d.tick in self.by_tick:
                raise ScriptError(f"two directives for tick {d.tick}")
            self.by_tick[d.tick] = d
        self.last_tick = max(self.by_tick, default=-1)

    def _directive(self, sim) -> TickDirective:
        return self.by_tick.get(sim.tick) or TickDirective(sim.tick)

    def static_deviation(self, sim, robot):
        return self.script.static_deviations[robot]

    def close(self, sim, cycle):
        return cycle.robot in self._directive(sim).close

    def activations(self, sim):
        return self._directive(sim).activate

    def deviation(self, sim, robot):
        d = self._directive(sim)
        if robot not in d.deviation:
            raise ScriptError(f"tick {sim.tick}: no deviation given for robot {robot} (dynamic compass)")
        return d.deviation[robot]

    def scale(self, sim, robot):
        return self._directive(sim).scale.get(robot, 1.0)

    def progress(self, sim, cycle):
        frac = self._directive(sim).progress.get(cycle.robot, 0.0 if sim.config.is_async else 1.0)
        if frac >= 1.0:
            return cycle.remaining
        return frac * cycle.remaining

    def finished(self, sim):
        return sim.tick > self.last_tick


def scripted(script: ScenarioScript) -> Scripted:
    return Scripted(script)


def run_script(script: ScenarioScript) -> Execution:
    return run(script.algorithm_spec(), script.engine_config(), script.compass, Scripted(script),
               script.initial)


def stuck_terminate_script() -> ScenarioScript:
    """The counterexample showing that the terminating variant of A_SS fails
    under asynchrony: r1 reaches r0 while r0's move is still pending, sees a
    single point and halts; r0 then walks away and waits forever."""
    return ScenarioScript(
        name="stuck-terminate",
        algorithm="SS",
        phi=0.0,
        terminate_variant=True,
        mode=SchedulerMode.ASYNC,
        compass=CompassSpec(CompassMode.STATIC, 0.0),
        initial=Configuration.of((0.0, 0.0), (0.0, -1.0)),
        directives=[
            TickDirective(0, activate=(0, 1), progress={0: 0.0, 1: 1.0}),
            TickDirective(1, close=(1,), activate=(1,), progress={0: 1.0}),
            TickDirective(2, close=(0,), activate=(0,)),
        ],
        horizon=10,
        expect={"outcome": "stuck", "final": [[-1.0, 0.0], [0.0, 0.0]], "terminated": [False, True]},
    )


def sd_quarter_opening_script() -> ScenarioScript:
    """A_SD at phi = pi/4 from ((0,0),(0,1)) with deviations +pi/4 and -pi/4."""
    return ScenarioScript(
        name="sd-quarter-opening",
        algorithm="SD",
        phi=math.pi / 4,
        override=True,
        mode=SchedulerMode.SEMI_SYNC,
        compass=CompassSpec(CompassMode.DYNAMIC, math.pi / 4),
        initial=Configuration.of((0.0, 0.0), (0.0, 1.0)),
        directives=[TickDirective(0, activate=(0, 1), deviation={0: math.pi / 4, 1: -math.pi / 4})],
        horizon=10,
        expect={"outcome": "script_end"},
    )


# -- replay -----------------------------------------------------------------


class Replay(AdversaryPolicy):
    """Re-issues the adversary choices recorded in an execution's events."""

    name = "replay"

    def __init__(self, execution: Execution):
        self.source = execution
        self.activate = {}
        self.close_at = set()
        self.moves = {}
        semi = not execution.engine.is_async
        for ev in execution.events:
            if ev.kind is EventKind.ACTIVATE:
                self.activate.setdefault(ev.tick, {})[ev.robot] = (ev.deviation, ev.scale)
            elif ev.kind is EventKind.CYCLE_END and not semi:
                self.close_at.add((ev.tick, ev.robot))
            elif ev.kind is EventKind.PROGRESS:
                self.moves[(ev.tick, ev.robot)] = ev.displacement
        self.last_tick = execution.last_tick

    def static_deviation(self, sim, robot):
        devs = self.source.static_deviations
        if devs is None:
            raise ValueError("trace has no static deviations")
        return devs[robot]

    def close(self, sim, cycle):
        return (sim.tick, cycle.robot) in self.close_at

    def activations(self, sim):
        return sorted(self.activate.get(sim.tick, {}))

    def deviation(self, sim, robot):
        return self.activate[sim.tick][robot][0]

    def scale(self, sim, robot):
        return self.activate[sim.tick][robot][1]

    def progress(self, sim, cycle):
        return self.moves.get((sim.tick, cycle.robot), 0.0)

    def finished(self, sim):
        # other outcomes end the replay by themselves at the same tick
        if self.source.outcome is Outcome.SCRIPT_END:
            return sim.tick >= self.last_tick
        return sim.tick > self.last_tick


def replay(execution: Execution) -> Execution:
    """Re-run ``execution`` from its recorded choices."""
    out = run(execution.algorithm, execution.engine, execution.compass, Replay(execution),
              execution.initial, execution.seed)
    out.adversary = execution.adversary
    return out


def replay_matches(original: Execution, replayed: Execution) -> Optional[str]:
    """None if the replay is bit-identical, else a description of the first mismatch."""
    a, b = original.configs, replayed.configs
    for t in range(min(len(a), len(b))):
        if tuple(a[t]) != tuple(b[t]):
            return f"configuration differs at tick {t}: {a[t]} != {b[t]}"
    if len(a) != len(b):
        return f"trace has {len(a)} configurations, replay produced {len(b)}"
    if len(original.events) != len(replayed.events):
        return f"trace has {len(original.events)} events, replay produced {len(replayed.events)}"
    for i, (x, y) in enumerate(zip(original.events, replayed.events)):
        if x != y:
            return f"event {i} differs: {x} != {y}"
    oa = original.outcome.value if original.outcome else None
    ob = replayed.outcome.value if replayed.outcome else None
    if oa != ob and oa != Outcome.SCRIPT_END.value and ob != Outcome.SCRIPT_END.value:
        return f"outcome differs: {oa} != {ob}"
    return None


# -- search -----------------------------------------------------------------


@dataclass
class SearchReport:
    best_execution: Optional[Execution]
    objective: float
    cycle_found: bool
    candidates: int = 0
    gathered: int = 0
    max_ticks_to_gather: int = 0
    best_params: Optional[tuple] = None
    recurrence: Optional[tuple] = None  # (earlier tick, later tick)

    @property
    def all_gathered(self) -> bool:
        return self.candidates > 0 and self.gathered == self.candidates


def _repeatable(acts, terminated, s: int, t: int, k: int) -> bool:
    """Whether repeating ticks [s, t) forever keeps every live robot fair."""
    for i in (0, 1):
        if terminated[i]:
            continue
        ticks = [a for a in acts[i] if s <= a < t]
        if not ticks:
            return False
        if ticks[0] + (t - s) - ticks[-1] > k:
            return False
    return True


def find_recurrence(execution: Execution, tol: float = 1e-9):
    """First pair of ticks (s, t), s < t, whose configurations agree after
    translating r0 to the origin, at which no robot has a pending move, and
    such that ticks [s, t) can be repeated forever by a fair adversary.

    Returns None if there is no such pair.
    """
    acts = ([], [])
    for ev in execution.events:
        if ev.kind is EventKind.ACTIVATE:
            acts[ev.robot].append(ev.tick)
    k = execution.engine.fairness_bound
    seen = {}
    rem = execution.remaining
    for t, (r0, r1) in enumerate(execution.configs):
        if t >= len(rem) or rem[t][0] != 0.0 or rem[t][1] != 0.0:
            continue
        dx, dy = r1[0] - r0[0], r1[1] - r0[1]
        if dx == 0.0 and dy == 0.0:
            continue
        kx, ky = round(dx / tol), round(dy / tol)
        for ox in (-1, 0, 1):
            for oy in (-1, 0, 1):
                for s in seen.get((kx + ox, ky + oy), ()):
                    p0, p1 = execution.configs[s]
                    if (abs(p1[0] - p0[0] - dx) <= tol and abs(p1[1] - p0[1] - dy) <= tol
                            and _repeatable(acts, execution.terminated, s, t, k)):
                        return s, t
        seen.setdefault((kx, ky), deque(maxlen=16)).append(t)
    return None


def sample_initial(rng: random.Random, max_distance: float, box: float = 5.0) -> Configuration:
    """Random configuration with separation in (0, max_distance] and y0 <= y1."""
    x0, y0 = rng.uniform(-box, box), rng.uniform(-box, box)
    d = max_distance * (1.0 - rng.random())  # (0, max]
    th = rng.uniform(0.0, TWO_PI)
    x1, y1 = x0 + d * math.cos(th), y0 + d * math.sin(th)
    if y1 < y0:
        x0, y0, x1, y1 = x1, y1, x0, y0
    return Configuration.of((x0, y0), (x1, y1))


def worst_case_search(alg_id, phi: float, compass_mode, budget: int, seed, *,
                      mode=SchedulerMode.SEMI_SYNC, override: bool = False, horizon: int = 100_000,
                      delta: float = 0.01, k: int = 4, max_cycle_ticks: int = 8,
                      max_initial_distance: float = 1.0, initial=None,
                      stop_on_certificate: bool = True, observe=None) -> SearchReport:
    """Randomized restarts plus greedy refinement over staller adversaries.

    The objective of a candidate is the number of ticks before gathering
    (the horizon if it never gathers). Half the budget samples fresh
    (seed, greed) pairs; the rest perturbs the greed of the best candidate
    so far. A candidate that reaches the horizon without gathering, or whose
    trace contains a configuration recurrence, is a certificate; the search
    stops there unless ``stop_on_certificate`` is False. Ties keep the
    earlier candidate. ``observe``, if given, is called with every candidate
    execution.
    """
    report = SearchReport(None, 0.0, False)
    if budget <= 0:
        return report
    alg = region_table(alg_id, phi, override=override)
    compass = CompassSpec(CompassMode(compass_mode), phi)
    eng = EngineConfig(SchedulerMode(mode), delta, k, max_cycle_ticks, horizon)
    rng = random.Random(seed)
    best_greed = None
    for n in range(budget):
        cand_seed = rng.getrandbits(64)
        if best_greed is None or n < budget // 2:
            greed = rng.random()
        else:
            greed = min(1.0, max(0.0, best_greed + rng.uniform(-0.1, 0.2)))
        init = initial if initial is not None else sample_initial(rng, max_initial_distance)
        ex = run(alg, eng, compass, GreedyStaller(cand_seed, greed, k), init, cand_seed)
        report.candidates += 1
        if observe is not None:
            observe(ex)
        if ex.gathered:
            report.gathered += 1
            report.max_ticks_to_gather = max(report.max_ticks_to_gather, ex.gathered_tick)
            objective = float(ex.gathered_tick)
            rec = None
        else:
            objective = float(ex.last_tick)
            rec = find_recurrence(ex)
        if objective > report.objective or report.best_execution is None or (rec and not report.cycle_found):
            report.best_execution = ex
            report.objective = objective
            report.best_params = (cand_seed, greed)
            best_greed = greed
            if rec:
                report.cycle_found = True
                report.recurrence = rec
        certificate = report.cycle_found or (
            report.best_execution is not None
            and not report.best_execution.gathered
            and report.best_execution.outcome in (Outcome.HORIZON, Outcome.STUCK)
        )
        if certificate and stop_on_certificate:
            break
    return report
