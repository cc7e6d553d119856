"""The three two-robot gathering algorithms as angular region tables.

Each algorithm maps the observed position ``p`` of the other robot (in the
observer's local frame) to a state and a local target. Apart from the origin,
which always means Gathered, the state depends only on ``argum(p)``; the table
lists the arcs of [0, 2*pi) and the action taken in each.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

from .geometry import ANGLE_EPS, ORIGIN, TWO_PI, AngularInterval, Point, argum, rotate

PI = math.pi


class RobotState(str, enum.Enum):
    G = "G"
    A = "A"
    R = "R"
    W = "W"
    T = "T"

    def __str__(self):
        return self.value


class ActionKind(str, enum.Enum):
    MOVE_TO_OBSERVED = "move_to_observed"
    MOVE_WEST = "move_west"  # to (-|p|, 0)
    ROTATE = "rotate"
    STAY = "stay"


class AlgorithmId(str, enum.Enum):
    SS = "SS"
    SD = "SD"
    AD = "AD"


# Open upper bounds of the parameter range for which each algorithm gathers.
VALIDITY_LIMIT = {AlgorithmId.SS: PI / 2, AlgorithmId.SD: PI / 4, AlgorithmId.AD: PI / 6}


class AlgorithmError(ValueError):
    pass


@dataclass(frozen=True)
class Region:
    interval: AngularInterval
    state: RobotState
    action: ActionKind
    omega: float = 0.0  # rotation angle for ROTATE


@dataclass(frozen=True)
class AlgorithmSpec:
    id: AlgorithmId
    phi: float
    regions: tuple
    terminate_variant: bool = False
    override: bool = False

    @property
    def valid(self) -> bool:
        return self.phi < VALIDITY_LIMIT[self.id]

    @property
    def name(self) -> str:
        suffix = "+T" if self.terminate_variant else ""
        return f"{self.id.value}({self.phi:.6g}){suffix}"

    def to_dict(self) -> dict:
        return {
            "id": self.id.value,
            "phi": self.phi,
            "terminate_variant": self.terminate_variant,
            "override": self.override,
            "regions": [
                {
                    "state": r.state.value,
                    "action": r.action.value,
                    "omega": r.omega,
                    **r.interval.to_dict(),
                }
                for r in self.regions
            ],
        }


class Decision(NamedTuple):
    state: RobotState
    target_local: Point


class StatePair(NamedTuple):
    s0: RobotState
    s1: RobotState

    def __str__(self):
        return f"({self.s0.value},{self.s1.value})"


class _Unstable:
    def __repr__(self):
        return "Unstable"


UNSTABLE = _Unstable()


def _arc(lower, upper, state, action, omega=0.0, lower_closed=False, upper_closed=True):
    width = upper - lower
    if width < -ANGLE_EPS:
        raise AlgorithmError(f"region {state.value} has negative width {width:.3g}")
    return Region(
        AngularInterval(lower=lower % TWO_PI + 0.0, width=max(width, 0.0),
                        lower_closed=lower_closed, upper_closed=upper_closed),
        state, action, omega,
    )


def region_table(alg_id, phi: float, terminate_variant: bool = False, override: bool = False) -> AlgorithmSpec:
    """Build the region table of algorithm ``alg_id`` with parameter ``phi``.

    A ``phi`` outside the algorithm's gathering range is accepted only with
    ``override=True``, and only while the regions still partition the circle.
    """
    alg_id = AlgorithmId(alg_id)
    if not (0.0 <= phi <= PI) or not math.isfinite(phi):
        raise AlgorithmError(f"phi must lie in [0, pi], got {phi}")
    if phi >= VALIDITY_LIMIT[alg_id] and not override:
        raise AlgorithmError(
            f"{alg_id.value} requires phi < {VALIDITY_LIMIT[alg_id] / PI:.4g}pi; "
            f"got {phi / PI:.4g}pi (pass override=True for necessity experiments)"
        )
    A_, R_, W_ = RobotState.A, RobotState.R, RobotState.W
    approach, stay = ActionKind.MOVE_TO_OBSERVED, ActionKind.STAY
    if alg_id is AlgorithmId.SS:
        regions = (
            _arc(0.0, PI, A_, approach),
            _arc(PI, 1.5 * PI + phi, R_, ActionKind.MOVE_WEST),
            _arc(1.5 * PI + phi, TWO_PI, W_, stay),
        )
    elif alg_id is AlgorithmId.SD:
        omega = PI / 2 + phi
        regions = (
            _arc(-PI / 2 + phi, PI / 2 - phi, W_, stay),
            _arc(PI / 2 - phi, PI / 2 + phi, R_, ActionKind.ROTATE, omega),
            _arc(PI / 2 + phi, 1.5 * PI - phi, A_, approach),
            _arc(1.5 * PI - phi, 1.5 * PI + phi, R_, ActionKind.ROTATE, omega),
        )
    else:
        omega = 2 * PI / 3 + 2 * phi
        regions = (
            _arc(2 * PI / 3 + phi, 1.5 * PI, A_, approach, lower_closed=True, upper_closed=False),
            _arc(1.5 * PI, TWO_PI + PI / 3 - phi, W_, stay, lower_closed=True, upper_closed=True),
            _arc(PI / 3 - phi, 2 * PI / 3 + phi, R_, ActionKind.ROTATE, omega,
                 lower_closed=False, upper_closed=False),
        )
    total = sum(r.interval.width for r in regions)
    if abs(total - TWO_PI) > 1e-9:
        raise AlgorithmError(f"regions cover {total / PI:.6g}pi instead of 2pi")
    return AlgorithmSpec(alg_id, phi, regions, terminate_variant, override)


def classify(alg: AlgorithmSpec, theta: float) -> Region:
    for region in alg.regions:
        if region.interval.contains(theta):
            return region
    raise AlgorithmError(f"angle {theta!r} falls in no region of {alg.name}")


def decide(alg: AlgorithmSpec, p) -> Decision:
    """State and local target for a robot that sees the other robot at ``p``."""
    return decide_with_region(alg, p)[0]


def decide_with_region(alg: AlgorithmSpec, p):
    """Like :func:`decide`, also returning the matched region (None at the origin)."""
    if p[0] == 0.0 and p[1] == 0.0:
        return Decision(RobotState.T if alg.terminate_variant else RobotState.G, ORIGIN), None
    region = classify(alg, argum(p))
    action = region.action
    if action is ActionKind.MOVE_TO_OBSERVED:
        target = Point(float(p[0]), float(p[1]))
    elif action is ActionKind.STAY:
        target = ORIGIN
    elif action is ActionKind.MOVE_WEST:
        target = Point(-math.hypot(p[0], p[1]), 0.0)
    else:
        target = rotate(p, region.omega)
    return Decision(region.state, target), region


def stable_state(alg: AlgorithmSpec, config, bound: float):
    """State pair forced on ``config`` by every deviation in [-bound, bound].

    Returns :data:`UNSTABLE` if some robot's observed argument can fall in
    more than one region.
    """
    r0, r1 = config
    if r0[0] == r1[0] and r0[1] == r1[1]:
        g = RobotState.T if alg.terminate_variant else RobotState.G
        return StatePair(g, g)
    states = []
    for me, other in ((r0, r1), (r1, r0)):
        centre = argum((other[0] - me[0], other[1] - me[1]))
        state = sweep_state(alg, centre, bound)
        if state is None:
            return UNSTABLE
        states.append(state)
    return StatePair(*states)


def sweep_state(alg: AlgorithmSpec, centre: float, bound: float):
    """The single state of every view in [centre - bound, centre + bound], else None."""
    for region in alg.regions:
        if region.interval.contains_arc(centre - bound, 2.0 * bound):
            return region.state
    return None
