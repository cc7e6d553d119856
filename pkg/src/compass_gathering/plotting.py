"""Matplotlib renderings of trajectories and sweep tables."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.lines import Line2D  # noqa: E402

from .engine import EventKind, Execution  # noqa: E402

STATE_COLORS = {"G": "tab:green", "A": "tab:blue", "R": "tab:red", "W": "tab:gray", "T": "black"}
ROBOT_MARKERS = ("o", "s")


def _state_segments(ex: Execution):
    """(robot, state, start, end) for every PROGRESS event."""
    state = [None, None]
    last = [ex.initial.r0, ex.initial.r1]
    for ev in ex.events:
        if ev.kind is EventKind.LOOK:
            state[ev.robot] = ev.state
        elif ev.kind is EventKind.PROGRESS:
            yield ev.robot, state[ev.robot], last[ev.robot], ev.position
            last[ev.robot] = ev.position


def plot_trajectories(ex: Execution, path, annotate: int = 6, title=None) -> None:
    """Both trajectories coloured by the state of the cycle that produced each
    move, plus the segment r0 -> r1 and its angle at a few ticks."""
    fig, ax = plt.subplots(figsize=(6.5, 6.5))
    for robot, st, a, b in _state_segments(ex):
        ax.plot([a[0], b[0]], [a[1], b[1]], color=STATE_COLORS.get(st, "k"), lw=1.4,
                ls="-" if robot == 0 else "--")
    for i in (0, 1):
        xs = [c[i][0] for c in ex.configs]
        ys = [c[i][1] for c in ex.configs]
        ax.plot(xs[:1], ys[:1], ROBOT_MARKERS[i], mfc="white", mec="k", ms=8)
        ax.plot(xs[-1:], ys[-1:], ROBOT_MARKERS[i], color="k", ms=6)
        ax.annotate(f"r{i}", (xs[-1], ys[-1]), textcoords="offset points", xytext=(6, 6))

    n = len(ex.configs)
    if annotate > 0 and n > 0:
        step = max(1, (n - 1) // annotate)
        for t in range(0, n, step):
            c = ex.configs[t]
            if c.co_located():
                continue
            ax.plot([c.r0[0], c.r1[0]], [c.r0[1], c.r1[1]], color="tab:orange", lw=0.6, ls=":")
            a = math.atan2(c.r1[1] - c.r0[1], c.r1[0] - c.r0[0]) / math.pi
            mid = ((c.r0[0] + c.r1[0]) / 2, (c.r0[1] + c.r1[1]) / 2)
            ax.annotate(f"t={t}: {a:.3f}π", mid, fontsize=7, color="tab:orange")

    handles = [Line2D([], [], color=c, label=s) for s, c in STATE_COLORS.items()]
    handles += [Line2D([], [], color="k", ls="-", label="r0"), Line2D([], [], color="k", ls="--", label="r1")]
    ax.legend(handles=handles, loc="best", fontsize=8)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    outcome = ex.outcome.value if ex.outcome else "running"
    ax.set_title(title or f"{ex.algorithm.name}, {ex.engine.mode.value}, {outcome}")
    ax.grid(True, lw=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_sweep(rows, path) -> None:
    """Gathered fraction and worst ticks-to-gather for each sweep cell."""
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    labels = [r["cell"] for r in rows]
    xs = range(len(rows))
    frac = [r["gathered"] / r["trials"] if r["trials"] else 0.0 for r in rows]
    top.bar(xs, frac, color=["tab:green" if f == 1.0 else "tab:red" for f in frac])
    top.set_ylim(0, 1.05)
    top.set_ylabel("gathered fraction")
    bottom.bar(xs, [r["max_ticks"] for r in rows], color="tab:blue")
    bottom.set_ylabel("max ticks to gather")
    bottom.set_xticks(list(xs))
    bottom.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
