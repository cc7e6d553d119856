"""Observables over configurations and traces, and the trace invariant checker."""

from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .algorithms import AlgorithmId, AlgorithmSpec, RobotState, StatePair, decide
from .engine import DIST_EPS, EventKind, Execution
from .frames import LocalFrame, to_local
from .geometry import PARALLEL, GeometryError, Point, argum, cross, line_intersection, rotate

# Tolerance for the angle and half-plane checks of check_trace.
CHECK_TOL = 1e-10

# How close to the axes' intersection a robot must be to count as sitting on it.
ON_AXIS_TOL = 1e-12

# Rounding error, in ulps of the largest coordinate, assumed for a stored position.
POSITION_ULPS = 4

# State pairs reachable under A_SS with phi < pi/2.
SS_PAIRS = frozenset(
    StatePair(RobotState(a), RobotState(b))
    for a, b in ("GG", "AA", "RR", "AR", "AW", "RA", "RW", "WA", "WR")
)


def _frame(config, robot: int, deviation: float) -> LocalFrame:
    return LocalFrame(config[robot], deviation)


def state_pair(alg: AlgorithmSpec, config, frames) -> StatePair:
    """State of each robot under ``frames`` (LocalFrame or deviation per robot)."""
    states = []
    for i in (0, 1):
        fr = frames[i]
        if not isinstance(fr, LocalFrame):
            fr = _frame(config, i, float(fr))
        states.append(decide(alg, to_local(fr, config[1 - i])).state)
    return StatePair(*states)


def alpha(config) -> float:
    """Global argument of the segment from r0 to r1, in [0, 2*pi)."""
    r0, r1 = config
    try:
        return argum((r1[0] - r0[0], r1[1] - r0[1]))
    except GeometryError:
        raise GeometryError("alpha is undefined for co-located robots") from None


def signed_alpha(config) -> float:
    """Like :func:`alpha` but in (-pi, pi], so small clockwise overshoots stay small."""
    r0, r1 = config
    if r0[0] == r1[0] and r0[1] == r1[1]:
        raise GeometryError("alpha is undefined for co-located robots")
    return math.atan2(r1[1] - r0[1], r1[0] - r0[0])


def alpha_resolution(config) -> float:
    """Rounding uncertainty of :func:`alpha` for ``config``, in radians.

    Positions are stored as doubles, so a segment of length d at coordinate
    magnitude m has its argument fixed only to about eps * m / d. Far from
    the origin and close to gathering this exceeds any fixed tolerance.
    """
    r0, r1 = config
    d = math.hypot(r1[0] - r0[0], r1[1] - r0[1])
    if d == 0.0:
        return math.inf
    m = max(abs(r0[0]), abs(r0[1]), abs(r1[0]), abs(r1[1]))
    return POSITION_ULPS * sys.float_info.epsilon * m / d


def _alpha_steps(ex, ticks, check):
    """Shared positivity and monotonicity test of SD-ALPHA and AD-ALPHA."""
    prev = prev_res = None
    for t in ticks:
        c = ex.configs[t]
        a, res = signed_alpha(c), alpha_resolution(c)
        # a sign flip within rounding is only excused when alpha is unresolvable anyway
        if a <= 0.0 and not (res >= CHECK_TOL and a > -res):
            check.fail(t, f"alpha = {a / math.pi:.6g}pi is not positive")
        if prev is not None and a > prev + CHECK_TOL + res + prev_res:
            check.fail(t, f"alpha rose from {prev / math.pi:.12g}pi to {a / math.pi:.12g}pi")
        prev, prev_res = a, res


class AxisClass(str, enum.Enum):
    PP = "PP"
    PN = "PN"
    NP = "NP"
    NN = "NN"
    PARALLEL = "Parallel"


def axis_class(config, frames, weak: bool = False) -> AxisClass:
    """Side of the local x-axes' intersection ``o`` on which each robot sits.

    Robot i is P when ``o`` lies behind it on its own x-axis (local
    x-coordinate of ``o`` below 0) and N when it lies ahead. ``frames`` holds
    each robot's deviation or LocalFrame. A robot sitting exactly at ``o``
    counts as N when ``weak`` is set; the strict partition does not cover
    that case and raises GeometryError. "Exactly" means within
    ``ON_AXIS_TOL`` relative to the robots' separation, since ``o`` is
    computed in floating point.
    """
    devs = [f.deviation if isinstance(f, LocalFrame) else float(f) for f in frames]
    o = line_intersection(config[0], devs[0], config[1], devs[1])
    if o is PARALLEL:
        return AxisClass.PARALLEL
    tol = ON_AXIS_TOL * (1.0 + math.dist(config[0], config[1]))
    signs = []
    for i in (0, 1):
        x = to_local(LocalFrame(config[i], devs[i]), o)[0]
        if x < -tol:
            signs.append("P")
        elif x > tol or weak:
            signs.append("N")
        else:
            raise GeometryError(f"robot {i} lies on the intersection of the x-axes")
    return AxisClass("".join(signs))


class EffectiveStatePair(NamedTuple):
    """State each robot is engaged in: its state at its latest activation."""

    s0: RobotState
    s1: RobotState

    def __str__(self):
        return f"({self.s0.value},{self.s1.value})"


class CheckStatus(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    NA = "n/a"


@dataclass
class CheckResult:
    name: str
    status: CheckStatus = CheckStatus.PASS
    first_tick: Optional[int] = None
    detail: str = ""

    def fail(self, tick: int, detail: str) -> None:
        if self.status is not CheckStatus.FAIL:
            self.status = CheckStatus.FAIL
            self.first_tick = tick
            self.detail = detail

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status.value, "first_tick": self.first_tick, "detail": self.detail}


@dataclass
class InvariantReport:
    results: list = field(default_factory=list)

    def __getitem__(self, name: str) -> CheckResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def ok(self) -> bool:
        return all(r.status is not CheckStatus.FAIL for r in self.results)

    def failures(self) -> list:
        return [r for r in self.results if r.status is CheckStatus.FAIL]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": [r.to_dict() for r in self.results]}

    def render(self) -> str:
        lines = []
        for r in self.results:
            line = f"{r.name:28s} {r.status.value}"
            if r.status is CheckStatus.FAIL:
                line += f" at tick {r.first_tick}: {r.detail}"
            lines.append(line)
        return "\n".join(lines)


CHECK_NAMES = (
    "SS-NEVER-WW", "SS-MEMBERSHIP", "SD-ALPHA", "SD-ROTATE-DIR",
    "AD-ORDER", "AD-ALPHA", "AD-HALFPLANE", "AD-NO-AA",
    "GOAL-ABSORBING", "PSEUDO-DETECT",
    "DELTA-FLOOR", "FAIRNESS", "FRAME-FROZEN", "SEMI-SYNC-NO-MIDMOVE-LOOK",
)


class _TraceIndex:
    """Per-tick views of an execution that several checks share."""

    def __init__(self, ex: Execution):
        self.ex = ex
        self.activations = {}  # tick -> {robot: event}
        self.looks = []
        self.by_kind = {k: [] for k in EventKind}
        for ev in ex.events:
            self.by_kind[ev.kind].append(ev)
            if ev.kind is EventKind.ACTIVATE:
                self.activations.setdefault(ev.tick, {})[ev.robot] = ev
        n = len(ex.configs)
        # deviation in force and state engaged at each tick
        self.deviation = [[0.0, 0.0] for _ in range(n)]
        self.engaged = [[RobotState.W, RobotState.W] for _ in range(n)]
        if ex.static_deviations is not None:
            for row in self.deviation:
                row[:] = ex.static_deviations
        decided = {}
        for ev in ex.events:
            if ev.kind in (EventKind.LOOK, EventKind.TERMINATE):
                decided[(ev.tick, ev.robot)] = RobotState(ev.state)
        dev = list(self.deviation[0])
        eng = [RobotState.W, RobotState.W]
        for t in range(n):
            for i, ev in self.activations.get(t, {}).items():
                dev[i] = ev.deviation
                eng[i] = decided.get((t, i), eng[i])
            self.deviation[t] = list(dev)
            self.engaged[t] = list(eng)
        self.first_colocated = next((t for t, c in enumerate(ex.configs) if c.co_located()), None)

    def before_colocation(self):
        end = self.first_colocated if self.first_colocated is not None else len(self.ex.configs)
        return range(end)


def _ss_checks(alg, ex, idx, results):
    never_ww = CheckResult("SS-NEVER-WW")
    member = CheckResult("SS-MEMBERSHIP")
    if alg.id is not AlgorithmId.SS or not alg.valid:
        never_ww.status = member.status = CheckStatus.NA
    else:
        for t, cfg in enumerate(ex.configs):
            s0, s1 = state_pair(alg, cfg, idx.deviation[t])
            pair = StatePair(*(RobotState.G if s is RobotState.T else s for s in (s0, s1)))
            if pair == (RobotState.W, RobotState.W):
                never_ww.fail(t, "state pair (W,W)")
            if pair not in SS_PAIRS:
                member.fail(t, f"state pair {pair} outside the reachable set")
    results += [never_ww, member]


def _sd_applicable(alg, ex) -> bool:
    r0, r1 = ex.initial
    return (alg.id is AlgorithmId.SD and alg.valid and not ex.engine.is_async
            and ex.compass.bound <= alg.phi and r0[1] < r1[1])


def _sd_checks(alg, ex, idx, results):
    mono = CheckResult("SD-ALPHA")
    rot = CheckResult("SD-ROTATE-DIR")
    if not _sd_applicable(alg, ex):
        mono.status = rot.status = CheckStatus.NA
        results += [mono, rot]
        return
    ticks = idx.before_colocation()
    _alpha_steps(ex, ticks, mono)
    omega = math.pi / 2 + alg.phi
    last = ticks[-1] if len(ticks) else -1
    for ev in idx.by_kind[EventKind.LOOK]:
        if ev.state != RobotState.R.value or ev.tick > last:
            continue
        cfg = ex.configs[ev.tick]
        me, other = cfg[ev.robot], cfg[1 - ev.robot]
        d = rotate((other[0] - me[0], other[1] - me[1]), omega)
        want = Point(me[0] + d[0], me[1] + d[1])
        if math.hypot(ev.target[0] - want[0], ev.target[1] - want[1]) > CHECK_TOL * max(1.0, abs(d[0]) + abs(d[1])):
            rot.fail(ev.tick, f"robot {ev.robot} rotate target {ev.target} != {want}")
            continue
        moved = [cfg[0], cfg[1]]
        moved[ev.robot] = ev.target
        if moved[0] == moved[1]:
            continue
        a0, a1 = signed_alpha(cfg), signed_alpha(moved)
        if not (0.0 < a1 <= a0 + CHECK_TOL):
            rot.fail(ev.tick, f"robot {ev.robot} rotation turns the segment from "
                              f"{a0 / math.pi:.6g}pi to {a1 / math.pi:.6g}pi")
    results += [mono, rot]


def _ad_checks(alg, ex, idx, results):
    names = ("AD-ORDER", "AD-ALPHA", "AD-HALFPLANE", "AD-NO-AA")
    order, mono, half, no_aa = (CheckResult(n) for n in names)
    r0, r1 = ex.initial
    if not (alg.id is AlgorithmId.AD and alg.valid and ex.compass.bound <= alg.phi and r0[1] < r1[1]):
        for c in (order, mono, half, no_aa):
            c.status = CheckStatus.NA
        results += [order, mono, half, no_aa]
        return
    ticks = idx.before_colocation()
    _alpha_steps(ex, ticks, mono)
    for t in ticks:
        c = ex.configs[t]
        gap = c.r1[1] - c.r0[1]
        res = alpha_resolution(c)
        if gap <= 0.0 and not (res >= CHECK_TOL and -gap <= res * math.dist(c.r0, c.r1)):
            order.fail(t, f"y0 = {c.r0[1]!r} >= y1 = {c.r1[1]!r}")
        if idx.engaged[t] == [RobotState.A, RobotState.A]:
            no_aa.fail(t, "effective state pair (A,A)")
    last = ticks[-1] if len(ticks) else -1
    for ev in idx.by_kind[EventKind.LOOK]:
        if ev.tick > last:
            continue
        c = ex.configs[ev.tick]
        seg = (c.r1[0] - c.r0[0], c.r1[1] - c.r0[1])
        side = cross(seg, (ev.target[0] - c.r0[0], ev.target[1] - c.r0[1])) / math.hypot(*seg)
        # r0 keeps to the left of the line r0 -> r1, r1 to the right
        if (ev.robot == 0 and side < -CHECK_TOL) or (ev.robot == 1 and side > CHECK_TOL):
            half.fail(ev.tick, f"robot {ev.robot} target {ev.target} at signed distance {side:.3g}")
    results += [order, mono, half, no_aa]


def _goal_checks(ex, idx, results):
    absorb = CheckResult("GOAL-ABSORBING")
    pseudo = CheckResult("PSEUDO-DETECT")
    g = ex.gathered_tick
    if g is None:
        absorb.status = CheckStatus.NA
    else:
        for t in range(g + 1, len(ex.configs)):
            if ex.configs[t] != ex.configs[g]:
                absorb.fail(t, f"configuration {ex.configs[t]} differs from the gathered {ex.configs[g]}")
                break
    flagged = set(ex.pseudo_ticks)
    for t, c in enumerate(ex.configs):
        if t >= len(ex.remaining) or not c.co_located():
            if t in flagged:
                pseudo.fail(t, "tick flagged pseudo-gathered without co-location")
            continue
        unsettled = ex.remaining[t] != (0.0, 0.0)
        if unsettled and t not in flagged:
            pseudo.fail(t, "co-located with an unsettled robot but not flagged")
        if unsettled and g == t:
            pseudo.fail(t, "pseudo-gathered tick certified as gathered")
        if not unsettled and t in flagged:
            pseudo.fail(t, "settled co-location flagged pseudo-gathered")
    if g is not None and (not ex.configs[g].co_located() or ex.remaining[g] != (0.0, 0.0)):
        pseudo.fail(g, "gathering certified on an unsettled or separated configuration")
    results += [absorb, pseudo]


def _engine_checks(ex, idx, results):
    floor = CheckResult("DELTA-FLOOR")
    fair = CheckResult("FAIRNESS")
    frozen = CheckResult("FRAME-FROZEN")
    midmove = CheckResult("SEMI-SYNC-NO-MIDMOVE-LOOK")
    delta = ex.engine.delta

    open_cycle = [None, None]  # (start tick, deviation, scale, start position, target)
    for ev in ex.events:
        i = ev.robot
        if ev.kind is EventKind.ACTIVATE:
            open_cycle[i] = [ev.tick, ev.deviation, ev.scale, ex.configs[ev.tick][i], None]
            continue
        cyc = open_cycle[i]
        if cyc is None:
            frozen.fail(ev.tick, f"robot {i} {ev.kind.value} event outside a cycle")
            continue
        if ev.deviation != cyc[1] or ev.scale != cyc[2]:
            frozen.fail(ev.tick, f"robot {i} frame changed within the cycle started at {cyc[0]}")
        if ev.kind is EventKind.LOOK:
            cyc[4] = ev.target
        elif ev.kind is EventKind.TERMINATE:
            open_cycle[i] = None
        elif ev.kind is EventKind.CYCLE_END:
            start, target = cyc[3], cyc[4]
            total = math.hypot(target[0] - start[0], target[1] - start[1])
            at_target = ev.position == target
            if not at_target and ev.displacement < min(delta, total) - DIST_EPS:
                floor.fail(ev.tick, f"robot {i} cycle closed after {ev.displacement!r} < min(delta, {total!r})")
            if not ex.engine.is_async and ev.tick != cyc[0]:
                midmove.fail(ev.tick, f"robot {i} cycle from tick {cyc[0]} spans several ticks")
            open_cycle[i] = None

    k = ex.engine.fairness_bound
    acts = ([-1], [-1])
    end = [ex.last_tick, ex.last_tick]
    for ev in idx.by_kind[EventKind.ACTIVATE]:
        acts[ev.robot].append(ev.tick)
    for ev in idx.by_kind[EventKind.TERMINATE]:
        end[ev.robot] = ev.tick
    for i in (0, 1):
        nxt = acts[i][1:] + [math.inf]
        for a, b in zip(acts[i], nxt):
            # some tick t with a + k <= t < b, up to the robot's last tick, lacks an activation
            if a + k <= min(b - 1, end[i]):
                fair.fail(a + k, f"robot {i} not activated in ticks {a + 1}..{a + k}")
                break
    if ex.engine.is_async:
        midmove.status = CheckStatus.NA
    results += [floor, fair, frozen, midmove]


def check_trace(alg: AlgorithmSpec, execution: Execution) -> InvariantReport:
    """Evaluate every applicable invariant on ``execution``."""
    idx = _TraceIndex(execution)
    results = []
    _ss_checks(alg, execution, idx, results)
    _sd_checks(alg, execution, idx, results)
    _ad_checks(alg, execution, idx, results)
    _goal_checks(execution, idx, results)
    _engine_checks(execution, idx, results)
    return InvariantReport(results)


def effective_state_pair(execution: Execution, tick: int) -> EffectiveStatePair:
    idx = _TraceIndex(execution)
    return EffectiveStatePair(*idx.engaged[tick])
