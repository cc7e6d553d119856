import json
import math
import random

import pytest

from compass_gathering.adversary import random_fair, stuck_terminate_script, replay, replay_matches, run_script, sample_initial
from compass_gathering.algorithms import region_table
from compass_gathering.engine import EngineConfig, SchedulerMode, run
from compass_gathering.frames import CompassMode, CompassSpec
from compass_gathering.trace import TraceFormatError, dumps, loads, read_trace, write_trace

PI = math.pi


def _runs():
    rng = random.Random(8)
    yield run(region_table("SS", PI / 3), EngineConfig(SchedulerMode.ASYNC), CompassSpec(CompassMode.STATIC, PI / 3),
              random_fair(1), sample_initial(rng, 10), 1)
    yield run(region_table("SD", PI / 8), EngineConfig(), CompassSpec(CompassMode.DYNAMIC, PI / 8),
              random_fair(2), sample_initial(rng, 10), 2)
    yield run(region_table("AD", PI / 12), EngineConfig(SchedulerMode.ASYNC), CompassSpec(CompassMode.DYNAMIC, PI / 12),
              random_fair(3), sample_initial(rng, 10), 3)
    yield run_script(stuck_terminate_script())


@pytest.mark.parametrize("ex", list(_runs()), ids=["ss-async", "sd", "ad-async", "stuck-terminate"])
def test_round_trip_and_replay(ex, tmp_path):
    path = tmp_path / "t.jsonl"
    write_trace(ex, path)
    back = read_trace(path)
    assert back.configs == ex.configs
    assert back.events == ex.events
    assert back.remaining == ex.remaining
    assert back.outcome is ex.outcome and back.gathered_tick == ex.gathered_tick
    assert tuple(back.terminated) == tuple(ex.terminated)
    assert dumps(back) == dumps(ex)
    assert replay_matches(back, replay(back)) is None


def test_corrupted_position_is_a_mismatch():
    ex = next(_runs())
    lines = dumps(ex).splitlines()
    i = next(n for n, line in enumerate(lines) if '"record":"config","tick":1,' in line)
    rec = json.loads(lines[i])
    rec["positions"][0][0] += 1e-9
    lines[i] = json.dumps(rec)
    bad = loads("\n".join(lines))
    msg = replay_matches(bad, replay(bad))
    assert msg is not None and "tick 1" in msg


def test_parse_errors_carry_line_numbers():
    text = dumps(run_script(stuck_terminate_script()))
    lines = text.splitlines()
    with pytest.raises(TraceFormatError, match="line 3: invalid JSON"):
        loads("\n".join(lines[:2] + ["{oops"] + lines[3:]))
    with pytest.raises(TraceFormatError, match="line 1: record before the header"):
        loads("\n".join(lines[1:]))
    with pytest.raises(TraceFormatError, match="no header"):
        loads("")
    with pytest.raises(TraceFormatError, match="unknown record type"):
        loads("\n".join(lines[:1] + ['{"record": "x"}']))
    skipped = [ln for ln in lines if '"tick":1,' not in ln or '"record":"config"' not in ln]
    with pytest.raises(TraceFormatError, match="expected tick 1"):
        loads("\n".join(skipped))
