"""Reference classifiers written directly from the region inequalities,
shared by the unit tests and the acceptance run."""

import math

from compass_gathering.algorithms import RobotState
from compass_gathering.geometry import TWO_PI

PI = math.pi
A, R, W = RobotState.A, RobotState.R, RobotState.W


def naive_scan(alg_id, phi):
    """Boundary list of each algorithm, written from the region inequalities.

    Each entry is (upper bound, upper bound included, state), in increasing
    order over [0, 2*pi).
    """
    if alg_id == "SS":
        return [(PI, True, A), (1.5 * PI + phi, True, R), (TWO_PI, True, W)]
    if alg_id == "SD":
        return [
            (PI / 2 - phi, True, W),
            (PI / 2 + phi, True, R),
            (1.5 * PI - phi, True, A),
            (1.5 * PI + phi, True, R),
            (TWO_PI, False, W),
        ]
    return [
        (PI / 3 - phi, True, W),
        (2 * PI / 3 + phi, False, R),
        (1.5 * PI, False, A),
        (TWO_PI, False, W),
    ]


def naive_state(alg_id, phi, theta):
    """Reference classifier for ``theta`` in [0, 2*pi): the first boundary
    of the scan that admits theta decides the state."""
    # angle 0 is the direction 2*pi, the closed end of A_SS's Wait region
    if alg_id == "SS" and theta == 0.0:
        return W
    for bound, inclusive, state in naive_scan(alg_id, phi):
        if theta < bound or (inclusive and theta == bound):
            return state
    raise AssertionError(f"angle {theta} not covered")
