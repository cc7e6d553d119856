"""Planar vector and angle arithmetic.

Angles are plain floats in radians. Every function that returns an angle
normalizes it to the half-open range [0, 2*pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

TWO_PI = 2.0 * math.pi

# Values this close to an interval endpoint are treated as lying on it.
ANGLE_EPS = 1e-12
PARALLEL_EPS = 1e-12


class GeometryError(ValueError):
    """Raised when a geometric operation is called outside its domain."""


class Point(NamedTuple):
    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return Point(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Point(self.x - other[0], self.y - other[1])

    def scaled(self, c: float) -> "Point":
        return Point(self.x * c, self.y * c)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def is_origin(self) -> bool:
        return self.x == 0.0 and self.y == 0.0


# Same representation, different coordinate system.
GlobalPoint = Point
LocalPoint = Point

ORIGIN = Point(0.0, 0.0)


class Parallel:
    """Marker returned by :func:`line_intersection` for parallel lines."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Parallel"


PARALLEL = Parallel()


def normalize_angle(theta: float) -> float:
    """Map ``theta`` into [0, 2*pi)."""
    r = math.fmod(theta, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r = 0.0
    return r + 0.0  # no negative zero


def argum(p) -> float:
    """Argument of the non-zero vector ``p`` in [0, 2*pi)."""
    x, y = p
    if x == 0.0 and y == 0.0:
        raise GeometryError("argument of the zero vector is undefined")
    a = math.atan2(y, x)
    if a < 0.0:
        a += TWO_PI
        if a >= TWO_PI:
            a = 0.0
    return a


def rotate(p, omega: float) -> Point:
    """Rotate ``p`` counterclockwise by ``omega`` about the origin."""
    c = math.cos(omega)
    s = math.sin(omega)
    x, y = p
    return Point(x * c - y * s, x * s + y * c)


def cross(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def line_intersection(o1, dir1: float, o2, dir2: float):
    """Intersection of two lines given by a point and a direction angle.

    Returns :data:`PARALLEL` when the directions agree modulo pi.
    """
    d = math.fmod(abs(dir1 - dir2), math.pi)
    if d < PARALLEL_EPS or math.pi - d < PARALLEL_EPS:
        return PARALLEL
    u = (math.cos(dir1), math.sin(dir1))
    v = (math.cos(dir2), math.sin(dir2))
    w = (o2[0] - o1[0], o2[1] - o1[1])
    # o1 + s*u = o2 + t*v  ->  s = cross(w, v) / cross(u, v)
    s = cross(w, v) / cross(u, v)
    return Point(o1[0] + s * u[0], o1[1] + s * u[1])


@dataclass(frozen=True)
class AngularInterval:
    """A counterclockwise arc starting at ``lower`` and spanning ``width``.

    ``lower`` is normalized to [0, 2*pi); ``width`` lies in [0, 2*pi]. An arc
    of zero width with an open endpoint is empty. Membership snaps angles
    within ``ANGLE_EPS`` of an endpoint onto it before applying the
    open/closed rule.
    """

    lower: float
    width: float
    lower_closed: bool = False
    upper_closed: bool = True

    @classmethod
    def between(cls, lower: float, upper: float, lower_closed=False, upper_closed=True):
        """Arc from ``lower`` counterclockwise to ``upper``.

        ``upper`` may exceed ``lower`` by up to 2*pi; if it is smaller the
        arc wraps through zero.
        """
        width = upper - lower
        if width < 0.0:
            width = normalize_angle(width)
        if width > TWO_PI + ANGLE_EPS:
            raise GeometryError(f"arc wider than a full turn: {width}")
        return cls(normalize_angle(lower), min(width, TWO_PI), lower_closed, upper_closed)

    @property
    def upper(self) -> float:
        return normalize_angle(self.lower + self.width)

    @property
    def measure(self) -> float:
        return self.width

    def is_empty(self) -> bool:
        return self.width == 0.0 and not (self.lower_closed and self.upper_closed)

    def _offset(self, theta: float) -> float:
        d = normalize_angle(theta - self.lower)
        if d < ANGLE_EPS or TWO_PI - d < ANGLE_EPS:
            return 0.0
        if abs(d - self.width) < ANGLE_EPS:
            return self.width
        return d

    def contains(self, theta: float) -> bool:
        d = self._offset(theta)
        if d == 0.0:
            if self.width == 0.0:
                return self.lower_closed and self.upper_closed
            if self.lower_closed:
                return True
            # at the lower end, which also coincides with the upper end of a full turn
            return self.width == TWO_PI and self.upper_closed
        if d < self.width:
            return True
        if d == self.width:
            return self.upper_closed
        return False

    def contains_arc(self, start: float, length: float) -> bool:
        """True iff the closed arc [start, start + length] lies in this interval."""
        if length < 0.0:
            raise GeometryError("negative arc length")
        if not self.contains(start):
            return False
        d = self._offset(start)
        end = d + length
        if abs(end - self.width) < ANGLE_EPS:
            return self.upper_closed
        return end < self.width

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "width": self.width,
            "lower_closed": self.lower_closed,
            "upper_closed": self.upper_closed,
        }

    def __str__(self):
        lb = "[" if self.lower_closed else "("
        rb = "]" if self.upper_closed else ")"
        return f"{lb}{self.lower / math.pi:.4g}pi, {(self.lower + self.width) / math.pi:.4g}pi{rb}"
