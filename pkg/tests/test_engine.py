import math
import random

import pytest

from compass_gathering.adversary import SymmetricMirror, random_fair, stuck_terminate_script, run_script, sample_initial
from compass_gathering.algorithms import region_table
from compass_gathering.engine import (
    AdversaryPolicy,
    Configuration,
    ContractViolation,
    EngineConfig,
    EventKind,
    FixedChoices,
    Outcome,
    SchedulerMode,
    Simulation,
    gathering_status,
    is_settled,
    run,
    step_async,
    step_semi_sync,
)
from compass_gathering.frames import CompassMode, CompassSpec, LocalFrame, to_local
from compass_gathering.geometry import Point

PI = math.pi
SS0 = region_table("SS", 0.0)
ASYNC = EngineConfig(SchedulerMode.ASYNC, horizon=50)
PERFECT = CompassSpec(CompassMode.STATIC, 0.0)


def test_step_semi_sync_horizontal_gathers():
    # r0 sees r1 at argument 0 (Wait); r1 sees r0 at pi (Approach)
    assert step_semi_sync(SS0, ((0, 0), (2, 0)), {0, 1}) == ((0.0, 0.0), (0.0, 0.0))


def test_step_semi_sync_stuck_terminate_configuration():
    assert step_semi_sync(SS0, ((0, 0), (0, -1)), {0, 1}) == ((-1.0, 0.0), (0.0, 0.0))


def test_step_semi_sync_wait_is_a_noop():
    assert step_semi_sync(SS0, ((0, 0), (2, 0)), {0}) == ((0.0, 0.0), (2.0, 0.0))


def test_step_semi_sync_partial_progress_and_floor():
    nxt = step_semi_sync(SS0, ((0, 0), (2, 0)), {1}, progress={1: 0.5})
    assert nxt == ((0.0, 0.0), (1.5, 0.0))
    with pytest.raises(ContractViolation):
        step_semi_sync(SS0, ((0, 0), (2, 0)), {1}, progress={1: 0.001}, delta=0.01)
    with pytest.raises(ContractViolation):
        step_semi_sync(SS0, ((0, 0), (2, 0)), set())


def test_step_semi_sync_frames_apply():
    sd = region_table("SD", PI / 8)
    # r0 with deviation -pi/8 sees r1 straight ahead at pi/2 + pi/8: Rotate by 5pi/8
    nxt = step_semi_sync(sd, ((0, 0), (0, 1)), {0}, frames={0: (-PI / 8, 2.0)})
    d = (math.cos(PI / 2 + 5 * PI / 8), math.sin(PI / 2 + 5 * PI / 8))
    assert nxt.r0 == pytest.approx(d, abs=1e-15)
    assert nxt.r1 == (0.0, 1.0)


def _async_sim(initial, alg=SS0, **kw):
    return Simulation(alg, EngineConfig(SchedulerMode.ASYNC, **kw), PERFECT, initial)


def test_stuck_terminate_by_hand():
    sim = _async_sim(((0, 0), (0, -1)), alg=region_table("SS", 0.0, terminate_variant=True))
    sim.fix_static_deviations(FixedChoices())
    step_async(sim, 0, FixedChoices(activate=(0, 1), progress={0: 0.0, 1: "full"}))
    assert sim.configuration() == ((0.0, 0.0), (0.0, 0.0))
    assert not is_settled(sim.execution, 0, 0)
    step_async(sim, 1, FixedChoices(close=(1,), activate=(1,), progress={0: "full"}))
    assert sim.terminated == [False, True]
    assert sim.configuration() == ((-1.0, 0.0), (0.0, 0.0))
    assert sim.execution.pseudo_ticks == [1]
    step_async(sim, 2, FixedChoices(close=(0,), activate=(0,)))
    assert sim.done and sim.execution.outcome is Outcome.STUCK
    assert sim.execution.final == ((-1.0, 0.0), (0.0, 0.0))


def test_step_async_rejects_wrong_tick():
    sim = _async_sim(((0, 0), (1, 0)))
    with pytest.raises(Exception):
        step_async(sim, 3, FixedChoices(activate=(0,)))


def test_mid_move_observation_sees_interpolated_position():
    sim = _async_sim(((0, 0), (0, -2)))
    sim.fix_static_deviations(FixedChoices())
    # r1 approaches r0 and covers half the way in tick 0
    step_async(sim, 0, FixedChoices(activate=(1,), progress={1: 1.0}))
    assert sim.positions[1] == (0.0, -1.0)
    step_async(sim, 1, FixedChoices(activate=(0,), progress={0: 0.0, 1: 0.0}))
    look = [e for e in sim.events if e.kind is EventKind.LOOK and e.robot == 0][0]
    assert look.tick == 1
    assert look.observed == (0.0, -1.0)


def test_async_delta_floor_at_close():
    sim = _async_sim(((0, 0), (0, -2)), delta=0.25)
    sim.fix_static_deviations(FixedChoices())
    step_async(sim, 0, FixedChoices(activate=(1,), progress={1: 0.25}))
    step_async(sim, 1, FixedChoices(activate=(0,), close=(1,)))
    ends = [e for e in sim.events if e.kind is EventKind.CYCLE_END and e.robot == 1]
    assert ends and ends[0].displacement == 0.25

    sim = _async_sim(((0, 0), (0, -2)), delta=0.25)
    sim.fix_static_deviations(FixedChoices())
    step_async(sim, 0, FixedChoices(activate=(1,), progress={1: 0.1}))
    with pytest.raises(ContractViolation, match="closed after"):
        step_async(sim, 1, FixedChoices(activate=(0,), close=(1,)))


class _Lazy(AdversaryPolicy):
    """Only ever activates r0."""

    def activations(self, sim):
        return [0] if sim.can_activate(0) else []


class _NeverClose(AdversaryPolicy):
    def close(self, sim, cycle):
        return False

    def progress(self, sim, cycle):
        return 0.0


def test_fairness_violation_aborts():
    cfg = EngineConfig(SchedulerMode.SEMI_SYNC, fairness_bound=3, horizon=100)
    with pytest.raises(ContractViolation, match="not activated within 3"):
        # r0 waits forever, so only r1 could make progress
        run(SS0, cfg, PERFECT, _Lazy(), ((0, 0), (5, -1)))


def test_cycle_length_violation_aborts():
    cfg = EngineConfig(SchedulerMode.ASYNC, fairness_bound=50, max_cycle_ticks=5, horizon=100)
    with pytest.raises(ContractViolation, match="longer than 5"):
        run(SS0, cfg, PERFECT, _NeverClose(), ((0, 0), (5, 1)))


def test_other_contract_violations():
    sim = _async_sim(((0, 0), (0, -2)))
    sim.fix_static_deviations(FixedChoices())
    step_async(sim, 0, FixedChoices(activate=(1,), progress={1: 0.5}))
    with pytest.raises(ContractViolation, match="previous cycle is open"):
        step_async(sim, 1, FixedChoices(activate=(1,)))

    sd = region_table("SD", PI / 8)
    sim = Simulation(sd, EngineConfig(), CompassSpec(CompassMode.DYNAMIC, PI / 8), ((0, 0), (1, 1)))
    with pytest.raises(ContractViolation, match="exceeds bound"):
        sim.step(FixedChoices(activate=(0,), deviations={0: PI / 4}))

    sim = Simulation(sd, EngineConfig(), CompassSpec(CompassMode.STATIC, PI / 8), ((0, 0), (1, 1)))
    with pytest.raises(ContractViolation, match="static deviation"):
        sim.fix_static_deviations(FixedChoices(deviations={1: -1.0}))

    sim = _async_sim(((0, 0), (0, -2)))
    sim.fix_static_deviations(FixedChoices())
    with pytest.raises(ContractViolation, match="displacement"):
        step_async(sim, 0, FixedChoices(activate=(1,), progress={1: 3.0}))


def test_run_greedy_full_progress_gathers_at_tick_1():
    ex = run(SS0, EngineConfig(), PERFECT, AdversaryPolicy(), ((0, 0), (2, 0)))
    assert ex.outcome is Outcome.GATHERED and ex.gathered_tick == 1
    assert gathering_status(ex).kind == "gathered" and gathering_status(ex).tick == 1


def test_run_colocated_start_gathers_at_zero():
    ex = run(region_table("AD", 0.2), EngineConfig(), CompassSpec(CompassMode.DYNAMIC, 0.2),
             random_fair(1), ((3, 3), (3, 3)))
    assert ex.gathered_tick == 0 and len(ex.configs) == 1


def test_horizon_cutoff():
    ss = region_table("SS", PI / 2, override=True)
    ex = run(ss, EngineConfig(horizon=10), CompassSpec(CompassMode.STATIC, PI / 2), SymmetricMirror(),
             ((0, 0), (1, 0)))
    assert ex.outcome is Outcome.HORIZON
    assert len(ex.configs) == 11
    assert gathering_status(ex).kind == "inconclusive"


def test_linger_keeps_goal_absorbing():
    ex = run(SS0, EngineConfig(linger=5), PERFECT, AdversaryPolicy(), ((0, 0), (2, 0)))
    assert ex.gathered_tick == 1
    assert ex.configs[1:] == [ex.configs[1]] * (len(ex.configs) - 1)
    assert len(ex.configs) == 7


def test_is_settled_cases():
    sim = _async_sim(((0, 0), (0, -2)))
    sim.fix_static_deviations(FixedChoices())
    # r0 sees r1 below it (Rotate under A_SS), r1 approaches; r0 gets no progress
    step_async(sim, 0, FixedChoices(activate=(0, 1), progress={0: 0.0, 1: 0.5}))
    ex = sim.execution
    assert not is_settled(ex, 0, 0) and not is_settled(ex, 1, 0)

    sim = _async_sim(((0, 0), (2, 0)))
    sim.fix_static_deviations(FixedChoices())
    # r0 waits: its open cycle targets its own position
    step_async(sim, 0, FixedChoices(activate=(0,)))
    assert sim.cycles[0] is not None
    assert is_settled(sim.execution, 0, 0)
    assert is_settled(sim.execution, 1, 0)  # never activated
    with pytest.raises(IndexError):
        is_settled(sim.execution, 0, 5)


def test_gathering_status_pseudo():
    ex = run_script(stuck_terminate_script())
    status = gathering_status(ex)
    assert status.kind == "pseudo_gathered" and status.pseudo_ticks == (1,)


def _fingerprint(ex):
    return (tuple(ex.configs), tuple(ex.events), ex.outcome, ex.gathered_tick)


@pytest.mark.parametrize("mode", list(SchedulerMode))
def test_runs_are_deterministic(mode):
    ad = region_table("AD", PI / 12)
    comp = CompassSpec(CompassMode.DYNAMIC, PI / 12)
    init = sample_initial(random.Random(4), 10)
    a = run(ad, EngineConfig(mode), comp, random_fair(99), init, 99)
    b = run(ad, EngineConfig(mode), comp, random_fair(99), init, 99)
    assert _fingerprint(a) == _fingerprint(b)


def test_semi_sync_looks_never_see_a_moving_robot():
    sd = region_table("SD", PI / 8)
    comp = CompassSpec(CompassMode.DYNAMIC, PI / 8)
    rng = random.Random(5)
    for seed in range(30):
        ex = run(sd, EngineConfig(), comp, random_fair(seed), sample_initial(rng, 10), seed)
        frames = {}
        for ev in ex.events:
            if ev.kind is EventKind.ACTIVATE:
                frames[ev.robot] = LocalFrame(ex.configs[ev.tick][ev.robot], ev.deviation, ev.scale)
            elif ev.kind is EventKind.LOOK:
                # the snapshot is the other robot's position at the start of the tick
                other = ex.configs[ev.tick][1 - ev.robot]
                assert ev.observed == to_local(frames[ev.robot], other)
            elif ev.kind is EventKind.CYCLE_END:
                assert ev.position == ex.configs[ev.tick + 1][ev.robot]


def test_configuration_helpers():
    c = Configuration.of((1, 2), (1, 2))
    assert c.co_located() and c.to_list() == [[1.0, 2.0], [1.0, 2.0]]
    assert isinstance(c.r0, Point)
    with pytest.raises(ValueError):
        EngineConfig(delta=0.0)
    with pytest.raises(ValueError):
        EngineConfig(fairness_bound=0)
