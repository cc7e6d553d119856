"""Local coordinate systems of the robots and the global/local transforms."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .geometry import AngularInterval, Point, TWO_PI


class CompassMode(str, enum.Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class LocalFrame:
    """Frame of one robot for one cycle.

    ``deviation`` is the angle from the global x-axis to the local x-axis;
    ``scale`` is the number of local units per global unit.
    """

    origin: Point
    deviation: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if not -math.pi <= self.deviation <= math.pi:
            raise ValueError(f"deviation outside [-pi, pi]: {self.deviation}")


def to_local(frame: LocalFrame, p) -> Point:
    """Coordinates of the global point ``p`` in ``frame``: sc * R(-phi) * (p - origin)."""
    dx = p[0] - frame.origin[0]
    dy = p[1] - frame.origin[1]
    c = math.cos(frame.deviation)
    s = math.sin(frame.deviation)
    sc = frame.scale
    return Point(sc * (c * dx + s * dy), sc * (-s * dx + c * dy))


def to_global(frame: LocalFrame, q) -> Point:
    """Inverse of :func:`to_local`."""
    c = math.cos(frame.deviation)
    s = math.sin(frame.deviation)
    inv = 1.0 / frame.scale
    x, y = q
    return Point(frame.origin[0] + inv * (c * x - s * y), frame.origin[1] + inv * (s * x + c * y))


@dataclass(frozen=True)
class CompassSpec:
    mode: CompassMode = CompassMode.STATIC
    bound: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mode", CompassMode(self.mode))
        if not 0.0 <= self.bound <= math.pi:
            raise ValueError(f"compass bound must lie in [0, pi], got {self.bound}")

    @property
    def is_static(self) -> bool:
        return self.mode is CompassMode.STATIC

    def admits(self, deviation: float) -> bool:
        return abs(deviation) <= self.bound


def deviation_range(spec: CompassSpec) -> AngularInterval:
    """The closed arc [-bound, +bound] of admissible deviations."""
    return AngularInterval.between(
        -spec.bound, -spec.bound + min(2.0 * spec.bound, TWO_PI), lower_closed=True, upper_closed=True
    )
