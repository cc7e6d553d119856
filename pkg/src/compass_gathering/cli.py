"""Command line front end.

Exit codes: 0 success, 1 property failure (no gathering, invariant failure,
replay mismatch, unexpected scenario outcome), 2 usage or input error,
3 engine contract violation.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import random
import re
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .adversary import (
    ScenarioScript,
    ScriptError,
    SymmetricMirror,
    random_fair,
    stuck_terminate_script,
    replay,
    replay_matches,
    run_script,
    sample_initial,
    sd_quarter_opening_script,
    worst_case_search,
)
from .algorithms import AlgorithmError, region_table
from .analysis import check_trace, state_pair
from .engine import AdversaryPolicy, Configuration, ContractViolation, EngineConfig, EngineError, run
from .frames import CompassSpec
from .trace import TraceFormatError, read_trace, write_trace

EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, EXIT_CONTRACT = 0, 1, 2, 3

BUILTIN_SCENARIOS = {"stuck-terminate": stuck_terminate_script, "sd-quarter-opening": sd_quarter_opening_script}


class UsageError(ValueError):
    pass


_ANGLE = re.compile(r"^\s*([-+]?\d*\.?\d*(?:e[-+]?\d+)?)\s*\*?\s*(pi|π)?\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$", re.I)


def parse_angle(text) -> float:
    """Radians from ``"0.3"``, ``"pi/4"``, ``"0.49pi"``, ``"3*pi/8"`` or a number."""
    if isinstance(text, (int, float)):
        return float(text)
    m = _ANGLE.match(str(text))
    if not m or (not m.group(1) and not m.group(2)):
        raise UsageError(f"cannot parse angle {text!r}")
    coef, pi, den = m.groups()
    value = float(coef) if coef not in ("", "+", "-") else (-1.0 if coef == "-" else 1.0)
    if pi:
        value *= math.pi
    if den:
        value /= float(den)
    return value


@dataclass
class RunSpec:
    algorithm: str = "SS"
    phi: float = 0.0
    override: bool = False
    terminate: bool = False
    mode: str = "semi-synchronous"
    compass: str = "static"
    bound: Optional[float] = None  # defaults to phi
    delta: float = 0.01
    k: int = 4
    max_cycle_ticks: int = 8
    horizon: int = 100_000
    trials: int = 500
    seed: int = 0
    max_distance: float = 10.0
    adversary: str = "random"
    budget: int = 1000
    phis: list = field(default_factory=list)

    @property
    def compass_bound(self) -> float:
        return self.phi if self.bound is None else self.bound

    def algorithm_spec(self, phi=None):
        return region_table(self.algorithm, self.phi if phi is None else phi, self.terminate, self.override)

    def engine(self) -> EngineConfig:
        return EngineConfig(self.mode, self.delta, self.k, self.max_cycle_ticks, self.horizon)

    def compass_spec(self, phi=None) -> CompassSpec:
        b = self.compass_bound if phi is None else (phi if self.bound is None else self.bound)
        return CompassSpec(self.compass, b)


_SPEC_FIELDS = {
    "algorithm": str, "phi": parse_angle, "override": None, "terminate": None, "mode": str,
    "compass": str, "bound": parse_angle, "delta": float, "k": int, "max_cycle_ticks": int,
    "horizon": int, "trials": int, "seed": int, "max_distance": float, "adversary": str, "budget": int,
    "phis": lambda s: [parse_angle(x) for x in str(s).replace(",", " ").split()],
}


def load_config(path) -> dict:
    """Read the ``[run]`` section of an INI-style key = value file."""
    cp = configparser.ConfigParser()
    try:
        if not cp.read(path):
            raise UsageError(f"cannot read config file {path}")
    except configparser.Error as exc:
        raise UsageError(f"config file {path}: {exc}") from None
    if not cp.has_section("run"):
        raise UsageError(f"config file {path} has no [run] section")
    out = {}
    sec = cp["run"]
    for key in sec:
        name = key.replace("-", "_")
        if name not in _SPEC_FIELDS:
            raise UsageError(f"config file {path}: unknown key {key!r}")
        conv = _SPEC_FIELDS[name]
        try:
            out[name] = sec.getboolean(key) if conv is None else conv(sec[key])
        except ValueError as exc:
            raise UsageError(f"config file {path}: bad value for {key}: {exc}") from None
    return out


def build_spec(args) -> RunSpec:
    values = load_config(args.config) if getattr(args, "config", None) else {}
    for name in _SPEC_FIELDS:
        v = getattr(args, name, None)
        if v is not None and v is not False:
            values[name] = v
    spec = RunSpec(**values)
    if spec.mode in ("semi", "ssync", "semi-sync"):
        spec.mode = "semi-synchronous"
    if spec.mode in ("async",):
        spec.mode = "asynchronous"
    return spec


def _add_run_options(p, with_phi=True):
    p.add_argument("--config", help="INI file with a [run] section; flags override it")
    p.add_argument("-a", "--algorithm", choices=["SS", "SD", "AD"])
    if with_phi:
        p.add_argument("--phi", type=parse_angle, help="algorithm parameter, e.g. 0.3, pi/8, 0.49pi")
    p.add_argument("--override", action="store_true", help="allow phi beyond the algorithm's valid range")
    p.add_argument("--terminate", action="store_true", help="use the Terminate variant")
    p.add_argument("--mode", choices=["semi-synchronous", "asynchronous", "semi", "async"])
    p.add_argument("--compass", choices=["static", "dynamic"])
    p.add_argument("--bound", type=parse_angle, help="compass deviation bound (default: phi)")
    p.add_argument("--delta", type=float)
    p.add_argument("-k", type=int, help="fairness bound")
    p.add_argument("--max-cycle-ticks", dest="max_cycle_ticks", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-distance", dest="max_distance", type=float)
    p.add_argument("--adversary", choices=["random", "search", "mirror", "default"])


def _policy(spec: RunSpec, seed) -> AdversaryPolicy:
    if spec.adversary == "random":
        return random_fair(seed, spec.k)
    if spec.adversary == "mirror":
        return SymmetricMirror(bound=spec.compass_bound)
    if spec.adversary == "default":
        return AdversaryPolicy()
    raise UsageError(f"adversary {spec.adversary!r} is not available here")


def _initial(spec: RunSpec, args, rng) -> Configuration:
    if getattr(args, "initial", None):
        x0, y0, x1, y1 = args.initial
        return Configuration.of((x0, y0), (x1, y1))
    return sample_initial(rng, spec.max_distance)


def _emit(ex, report, args, out):
    if getattr(args, "trace", None):
        write_trace(ex, args.trace)
    if getattr(args, "report", None):
        with open(args.report, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
    if getattr(args, "plot", None):
        from .plotting import plot_trajectories

        plot_trajectories(ex, args.plot)
    print(f"outcome: {ex.outcome.value}", file=out)
    print(f"ticks: {ex.last_tick}", file=out)
    if ex.gathered_tick is not None:
        print(f"gathered at tick {ex.gathered_tick}", file=out)
    f = ex.final
    print(f"final: (({f.r0[0]!r}, {f.r0[1]!r}), ({f.r1[0]!r}, {f.r1[1]!r}))", file=out)
    print(f"terminated: {list(ex.terminated)}", file=out)
    if ex.pseudo_ticks:
        print(f"pseudo-gathered ticks: {ex.pseudo_ticks[:20]}", file=out)
    print(report.render(), file=out)


def cmd_simulate(args, out) -> int:
    spec = build_spec(args)
    alg = spec.algorithm_spec()
    if spec.adversary == "search":
        rep = worst_case_search(spec.algorithm, spec.phi, spec.compass, spec.budget, spec.seed,
                                mode=spec.mode, override=spec.override, horizon=spec.horizon,
                                delta=spec.delta, k=spec.k, max_cycle_ticks=spec.max_cycle_ticks,
                                max_initial_distance=spec.max_distance)
        print(f"search: {rep.candidates} candidates, {rep.gathered} gathered, "
              f"cycle_found={rep.cycle_found}, objective={rep.objective:g}", file=out)
        if rep.best_execution is None:
            return EXIT_OK
        ex = rep.best_execution
    else:
        ex = run(alg, spec.engine(), spec.compass_spec(), _policy(spec, spec.seed),
                 _initial(spec, args, random.Random(spec.seed)), spec.seed)
    report = check_trace(alg, ex)
    _emit(ex, report, args, out)
    return EXIT_OK if ex.gathered and report.ok else EXIT_PROPERTY


def _load_scenario(name) -> ScenarioScript:
    if name in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[name]()
    try:
        return ScenarioScript.load(name)
    except FileNotFoundError:
        raise UsageError(f"no scenario file {name!r} (built-ins: {', '.join(BUILTIN_SCENARIOS)})") from None
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"scenario {name}: {exc}") from None


def _scenario_matches(script: ScenarioScript, ex) -> list:
    exp = script.expect
    problems = []
    if not exp:
        return [] if ex.gathered else [f"did not gather ({ex.outcome.value})"]
    if "outcome" in exp and ex.outcome.value != exp["outcome"]:
        problems.append(f"outcome {ex.outcome.value} != expected {exp['outcome']}")
    if "final" in exp and ex.final.to_list() != [list(map(float, p)) for p in exp["final"]]:
        problems.append(f"final {ex.final.to_list()} != expected {exp['final']}")
    if "terminated" in exp and list(ex.terminated) != list(exp["terminated"]):
        problems.append(f"terminated {list(ex.terminated)} != expected {exp['terminated']}")
    return problems


def cmd_scenario(args, out) -> int:
    script = _load_scenario(args.scenario)
    ex = run_script(script)
    alg = script.algorithm_spec()
    report = check_trace(alg, ex)
    _emit(ex, report, args, out)
    devs = ex.static_deviations or (0.0, 0.0)
    pairs = [str(state_pair(alg, c, devs)) for c in ex.configs] if ex.static_deviations else []
    if pairs:
        print(f"state pairs: {' '.join(pairs)}", file=out)
    problems = _scenario_matches(script, ex)
    for p in problems:
        print(f"MISMATCH: {p}", file=out)
    return EXIT_PROPERTY if problems else EXIT_OK


def _cell_label(spec: RunSpec, phi: float) -> str:
    return f"{spec.algorithm}/{spec.mode}/{spec.compass}/phi={phi / math.pi:.4g}pi"


def run_cell(spec: RunSpec, phi: float) -> dict:
    """All trials of one sweep cell; deterministic in (spec, phi)."""
    alg = spec.algorithm_spec(phi)
    eng = spec.engine()
    comp = spec.compass_spec(phi)
    label = _cell_label(spec, phi)
    row = {"cell": label, "algorithm": spec.algorithm, "mode": spec.mode, "compass": spec.compass,
           "phi": phi, "phi_over_pi": phi / math.pi, "adversary": spec.adversary, "trials": 0,
           "gathered": 0, "max_ticks": 0, "invariant_failures": 0, "failed_checks": {}, "errors": 0}

    def account(ex):
        row["trials"] += 1
        if ex.gathered:
            row["gathered"] += 1
            row["max_ticks"] = max(row["max_ticks"], ex.gathered_tick)
        rep = check_trace(alg, ex)
        if not rep.ok:
            row["invariant_failures"] += 1
            for r in rep.failures():
                row["failed_checks"][r.name] = row["failed_checks"].get(r.name, 0) + 1

    for trial in range(spec.trials):
        seed = f"{spec.seed}:{label}:{trial}"
        rng = random.Random(seed + ":initial")
        try:
            ex = run(alg, eng, comp, _policy(spec, seed) if spec.adversary != "search" else random_fair(seed, spec.k),
                     sample_initial(rng, spec.max_distance), seed)
        except (ContractViolation, EngineError):
            row["trials"] += 1
            row["errors"] += 1
            continue
        account(ex)
    if spec.adversary == "search" and spec.budget > 0:
        rep = worst_case_search(spec.algorithm, phi, spec.compass, spec.budget, f"{spec.seed}:{label}:search",
                                mode=spec.mode, override=spec.override, horizon=spec.horizon, delta=spec.delta,
                                k=spec.k, max_cycle_ticks=spec.max_cycle_ticks, stop_on_certificate=True)
        row["search_candidates"] = rep.candidates
        row["search_gathered"] = rep.gathered
        row["search_cycle_found"] = rep.cycle_found
        row["trials"] += rep.candidates
        row["gathered"] += rep.gathered
        row["max_ticks"] = max(row["max_ticks"], rep.max_ticks_to_gather)
    return row


CSV_COLUMNS = ("cell", "algorithm", "mode", "compass", "phi_over_pi", "adversary", "trials", "gathered",
               "max_ticks", "invariant_failures", "errors", "failed_checks")


def cmd_sweep(args, out) -> int:
    spec = build_spec(args)
    for phi in spec.phis:
        spec.algorithm_spec(phi)  # validate the whole grid before running anything
    rows = [run_cell(spec, phi) for phi in spec.phis]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([json.dumps(r[c], sort_keys=True) if c == "failed_checks" else r[c] for c in CSV_COLUMNS])
    with open(out_dir / "sweep.json", "w") as fh:
        json.dump({"spec": asdict(spec), "cells": rows}, fh, indent=2)
    if rows:
        from .plotting import plot_sweep

        plot_sweep(rows, out_dir / "sweep.svg")
    print(f"{'cell':48s} {'trials':>7s} {'gathered':>9s} {'max ticks':>10s} {'inv fail':>9s}", file=out)
    for r in rows:
        print(f"{r['cell']:48s} {r['trials']:7d} {r['gathered']:9d} {r['max_ticks']:10d} "
              f"{r['invariant_failures']:9d}", file=out)
        for name, n in sorted(r["failed_checks"].items()):
            print(f"    {name}: {n} trace(s)", file=out)
    ok = all(r["gathered"] == r["trials"] and r["invariant_failures"] == 0 and r["errors"] == 0 for r in rows)
    return EXIT_OK if ok else EXIT_PROPERTY


def cmd_verify(args, out) -> int:
    ex = read_trace(args.trace_file)
    again = replay(ex)
    mismatch = replay_matches(ex, again)
    report = check_trace(ex.algorithm, ex)
    print(f"replay: {'bit-exact' if mismatch is None else 'MISMATCH: ' + mismatch}", file=out)
    print(report.render(), file=out)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump({"replay_mismatch": mismatch, **report.to_dict()}, fh, indent=2)
    return EXIT_OK if mismatch is None and report.ok else EXIT_PROPERTY


def cmd_plot(args, out) -> int:
    from .plotting import plot_trajectories

    ex = read_trace(args.trace_file)
    plot_trajectories(ex, args.out, annotate=args.annotate)
    print(f"wrote {args.out}", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="compass-gathering",
                                     description="Two-robot gathering with unreliable compasses.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one execution and check its invariants")
    _add_run_options(p)
    p.add_argument("--budget", type=int, help="candidate runs for --adversary search")
    p.add_argument("--initial", type=float, nargs=4, metavar=("X0", "Y0", "X1", "Y1"))
    p.add_argument("--trace", help="write the JSONL trace here")
    p.add_argument("--report", help="write the invariant report (JSON) here")
    p.add_argument("--plot", help="write an SVG of the trajectories here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scenario", help="run a scripted scenario (file or built-in name)")
    p.add_argument("scenario", help=f"JSON script or one of: {', '.join(BUILTIN_SCENARIOS)}")
    p.add_argument("--trace")
    p.add_argument("--report")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("sweep", help="run many trials per phi and tabulate gathering")
    _add_run_options(p, with_phi=False)
    p.add_argument("--phis", type=lambda s: [parse_angle(x) for x in s.replace(",", " ").split()],
                   help="comma separated phi grid, e.g. '0,pi/6,pi/3,0.49pi'")
    p.add_argument("--trials", type=int)
    p.add_argument("--budget", type=int, help="search candidates per cell with --adversary search")
    p.add_argument("--out-dir", default="sweep-out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="replay a trace bit-exactly and re-check its invariants")
    p.add_argument("trace_file")
    p.add_argument("--report")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="render a trace as SVG")
    p.add_argument("trace_file")
    p.add_argument("-o", "--out", default="trace.svg")
    p.add_argument("--annotate", type=int, default=6, help="number of segment angle labels")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (UsageError, AlgorithmError, TraceFormatError, ScriptError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EngineError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
