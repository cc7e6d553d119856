"""Line-delimited JSON traces.

A trace file holds one JSON object per line, told apart by ``record``:

* ``header``: algorithm table, engine and compass settings, C(0), seed,
  static deviations and adversary name;
* ``config``: ``tick``, ``positions`` ([[x0, y0], [x1, y1]]) and, for ticks
  that were processed, ``remaining`` (pending displacement per robot);
* ``event``: one :class:`~compass_gathering.engine.TraceEvent`;
* ``footer``: ``outcome``, ``gathered_tick``, ``pseudo_ticks``, ``terminated``.

Floats are written with ``repr`` precision, so reading a trace back yields
bit-identical values.
"""

from __future__ import annotations

import json

from .algorithms import region_table
from .engine import Configuration, EngineConfig, Execution, Outcome, TraceEvent
from .frames import CompassSpec

SCHEMA_VERSION = 1


class TraceFormatError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


def iter_records(execution: Execution):
    ex = execution
    yield {
        "record": "header",
        "schema": SCHEMA_VERSION,
        "algorithm": ex.algorithm.to_dict(),
        "engine": ex.engine.to_dict(),
        "compass": {"mode": ex.compass.mode.value, "bound": ex.compass.bound},
        "initial": ex.initial.to_list(),
        "seed": ex.seed,
        "static_deviations": None if ex.static_deviations is None else list(ex.static_deviations),
        "adversary": ex.adversary,
    }
    events_by_tick = {}
    for ev in ex.events:
        events_by_tick.setdefault(ev.tick, []).append(ev)
    for t, cfg in enumerate(ex.configs):
        rec = {"record": "config", "tick": t, "positions": cfg.to_list()}
        if t < len(ex.remaining):
            rec["remaining"] = list(ex.remaining[t])
        yield rec
        for ev in events_by_tick.pop(t, ()):
            yield ev.to_dict()
    for t in sorted(events_by_tick):
        for ev in events_by_tick[t]:
            yield ev.to_dict()
    yield {
        "record": "footer",
        "outcome": None if ex.outcome is None else ex.outcome.value,
        "gathered_tick": ex.gathered_tick,
        "pseudo_ticks": list(ex.pseudo_ticks),
        "terminated": list(ex.terminated),
    }


def dumps(execution: Execution) -> str:
    return "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in iter_records(execution))


def write_trace(execution: Execution, path) -> None:
    with open(path, "w") as fh:
        for rec in iter_records(execution):
            fh.write(json.dumps(rec, separators=(",", ":")))
            fh.write("\n")


def loads(text: str) -> Execution:
    header = footer = None
    configs, remaining, events = [], [], []
    lineno = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise TraceFormatError(lineno, "record is not an object")
        kind = rec.get("record")
        try:
            if kind == "header":
                if header is not None:
                    raise TraceFormatError(lineno, "second header")
                header = rec
            elif header is None:
                raise TraceFormatError(lineno, "record before the header")
            elif kind == "config":
                if rec["tick"] != len(configs):
                    raise TraceFormatError(lineno, f"expected tick {len(configs)}, found {rec['tick']}")
                configs.append(Configuration.of(*rec["positions"]))
                if "remaining" in rec:
                    if len(remaining) != len(configs) - 1:
                        raise TraceFormatError(lineno, "remaining displacement missing for an earlier tick")
                    remaining.append(tuple(float(x) for x in rec["remaining"]))
            elif kind == "event":
                events.append(TraceEvent.from_dict(rec))
            elif kind == "footer":
                footer = rec
            else:
                raise TraceFormatError(lineno, f"unknown record type {kind!r}")
        except TraceFormatError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise TraceFormatError(lineno, f"malformed {kind} record: {exc!r}") from None
    if header is None:
        raise TraceFormatError(max(lineno, 1), "no header record")
    if not configs:
        raise TraceFormatError(lineno, "no configuration records")
    try:
        a = header["algorithm"]
        alg = region_table(a["id"], float(a["phi"]), bool(a.get("terminate_variant")), bool(a.get("override")))
        eng = EngineConfig(**header["engine"])
        comp = CompassSpec(header["compass"]["mode"], float(header["compass"]["bound"]))
        initial = Configuration.of(*header["initial"])
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(1, f"malformed header: {exc}") from None
    devs = header.get("static_deviations")
    ex = Execution(alg, eng, comp, initial, header.get("seed"), header.get("adversary", ""),
                   configs=configs, events=events, remaining=remaining,
                   static_deviations=None if devs is None else tuple(float(d) for d in devs))
    if footer is not None:
        ex.outcome = None if footer.get("outcome") is None else Outcome(footer["outcome"])
        ex.gathered_tick = footer.get("gathered_tick")
        ex.pseudo_ticks = list(footer.get("pseudo_ticks", ()))
        ex.terminated = tuple(footer.get("terminated", (False, False)))
    return ex


def read_trace(path) -> Execution:
    with open(path) as fh:
        return loads(fh.read())
