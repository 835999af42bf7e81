import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from seqmt import procedures as P
from seqmt.critical_values import CriticalLadder, RejectiveLadder, StandardizedLadder, rejective_ladder
from seqmt.fixed_baseline import fixed_stepdown, fixed_stepup
from seqmt.statistics import GaussianLLRStatistic, PrecomputedStatistic, SimpleLLR, SimpleLLRStatistic

A = [-2.34, -1.94, -1.27]
B = [1.93, 1.53, 0.86]
LADDER = StandardizedLadder.common(CriticalLadder(A, B))
BERN = SimpleLLRStatistic(SimpleLLR(h={0: 0.6, 1: 0.4}, g={0: 0.4, 1: 0.6}))

# observations of the three worked sample paths, one list per stream
PATHS = {
    1: [[0, 1, 1, 1, 1, 1, 1], [1, 0, 1, 1, 1, 1, 1], [0, 1, 0, 0, 1, 0, 0, 0, 0, 0]],
    2: [[0, 1, 1, 1, 1, 1, 1], [1, 0, 0, 1, 1, 1, 1, 1], [0, 1, 0, 0, 0, 0, 0, 0]],
    3: [[1, 0, 1, 1, 1, 1, 1], [1, 1, 1, 0, 1, 1, 1], [0, 1, 0, 1, 1, 1, 1]],
}
# expected (verdict, stage, sample size) per stream
EXPECTED = {
    1: [(1, 1, 7), (1, 1, 7), (-1, 2, 10)],
    2: [(1, 1, 7), (1, 2, 8), (-1, 2, 8)],
    3: [(1, 1, 7), (1, 1, 7), (1, 1, 7)],
}
# published two-decimal statistic values of sample path 1
PATH1_STATS = [
    [-0.41, 0.00, 0.41, 0.81, 1.22, 1.62, 2.03],
    [0.41, 0.00, 0.41, 0.81, 1.22, 1.62, 2.03],
    [-0.41, 0.00, -0.41, -0.81, -0.41, -0.81, -1.22, -1.62, -2.03, -2.43],
]
STEP = math.log(1.5)


def _summary(state):
    return [(int(state.verdicts[j]), int(state.stages[j]), int(state.sample_sizes[j])) for j in range(state.J)]


def _cfg(**kw):
    kw.setdefault("mode", "stepdown")
    kw.setdefault("ladder", LADDER)
    return P.ProcedureConfig(**kw)


@pytest.mark.parametrize("path", [1, 2, 3])
def test_worked_paths_replay_from_observations(path):
    state = P.run_stepdown(P.ArraySource(PATHS[path]), _cfg(tie_seed=0), BERN)
    assert state.status == "complete"
    assert _summary(state) == EXPECTED[path]
    # stopped statistics are integer multiples of log 1.5
    assert np.allclose(state.values / STEP, np.round(state.values / STEP))


def test_worked_path_statistics_match_published_values():
    x = np.array(PATHS[1][2], dtype=float)[:, None]
    vals, _ = BERN.advance(BERN.initial_state(1), 0, x)
    assert_array_equal(np.round(vals[:, 0], 2), PATH1_STATS[2])
    state = P.run_stepdown(P.ArraySource(PATHS[1]), _cfg(), BERN)
    assert_array_equal(np.round(state.values, 2), [2.03, 2.03, -2.43])


def test_worked_path_replay_from_precomputed_statistics():
    state = P.run_stepdown(P.ArraySource(PATH1_STATS), _cfg(trace=True), PrecomputedStatistic())
    assert _summary(state) == EXPECTED[1]
    assert [t["n"] for t in state.trace] == [7, 10]
    assert state.trace[0]["m"] == 2 and state.trace[1]["m_prime"] == 1


def test_worked_path3_rejective_replay():
    cfg = P.ProcedureConfig("stepdown", StandardizedLadder.common(RejectiveLadder(B)), rejective=True, horizon=10)
    state = P.run_rejective_stepdown(P.ArraySource(PATHS[3]), cfg, BERN)
    assert _summary(state) == EXPECTED[3]


def test_stage_decide_examples():
    out = P.stage_decide([-2.43, 0.5, 2.03], [2, 1, 0], 0, 0, A, B, "stepdown")
    assert (out.m, out.m_prime) == (1, 1)
    assert list(out.rejected) == [0] and list(out.accepted) == [2]
    out = P.stage_decide([2.5, 3.0, 1.0], [0, 1, 2], 0, 0, A, B, "stepdown")
    assert (out.m, out.m_prime) == (3, 0)
    b2 = [1.93, 1.53]
    a2 = [-2.34, -1.94]
    up = P.stage_decide([1.4, 2.0], [0, 1], 0, 0, a2, b2, "stepup")
    assert (up.m, up.m_prime) == (1, 0) and list(up.rejected) == [1]
    up = P.stage_decide([1.6, 2.0], [0, 1], 0, 0, a2, b2, "stepup")
    down = P.stage_decide([1.6, 2.0], [0, 1], 0, 0, a2, b2, "stepdown")
    assert up.m == down.m == 2


def test_stepup_can_reject_past_a_failing_rank():
    # the largest statistic misses b_1 but the second clears b_2
    b = [3.0, 1.0]
    with pytest.raises(ValueError):
        P.stage_decide([1.5, 2.0], [0, 1], 0, 0, [-3.0, -1.0], b, "stepdown")
    up = P.stage_decide([1.5, 2.0], [0, 1], 0, 0, [-3.0, -1.0], b, "stepup")
    assert up.m == 2


def test_stage_decide_errors():
    with pytest.raises(ValueError):
        P.stage_decide([0.0, 0.1], [0, 1], 0, 0, A[:2], B[:2], "stepdown")
    with pytest.raises(ValueError):
        P.stage_decide([0.0], [0], 0, 0, A, B, "sideways")


def test_stage_decide_offsets_use_r_and_c():
    # after one rejection the largest active value faces b_2
    out = P.stage_decide([1.6, -0.5], [1, 2], 1, 0, A, B, "stepdown")
    assert out.m == 1 and list(out.rejected) == [1]
    with pytest.raises(ValueError):
        P.stage_decide([-1.5, 0.0], [1, 2], 1, 0, A, B, "stepdown")
    # after one acceptance the smallest active value faces a_2
    out = P.stage_decide([-2.0, 0.0], [1, 2], 0, 1, A, B, "stepdown")
    assert out.m_prime == 1 and list(out.accepted) == [1]


def test_stage_decide_random_ties_are_seeded():
    vals = [2.5, 2.5, 2.5]
    orders = {tuple(P.stage_decide(vals, [0, 1, 2], 0, 0, A, B, "stepdown", np.random.default_rng(s)).order) for s in range(20)}
    assert len(orders) > 1
    o1 = P.stage_decide(vals, [0, 1, 2], 0, 0, A, B, "stepdown", np.random.default_rng(3)).order
    o2 = P.stage_decide(vals, [0, 1, 2], 0, 0, A, B, "stepdown", np.random.default_rng(3)).order
    assert_array_equal(o1, o2)


@settings(max_examples=200, deadline=None)
@given(
    K=st.integers(1, 6),
    vals=st.lists(st.floats(-4, 4), min_size=6, max_size=6),
    mode=st.sampled_from(["stepdown", "stepup"]),
)
def test_stage_decide_never_conflicts(K, vals, mode):
    a = np.array([-3.0, -2.5, -2.0, -1.5, -1.0, -0.5])
    b = np.array([3.0, 2.5, 2.0, 1.5, 1.0, 0.5])
    v = np.array(vals[:K])
    try:
        out = P.stage_decide(v, np.arange(K), 6 - K, 0, a, b, mode)
    except ValueError:
        return
    assert out.m + out.m_prime <= K
    assert not set(out.rejected) & set(out.accepted)


# fixed-sample reduction -------------------------------------------------------


def _one_step(stats, b, mode):
    lad = StandardizedLadder.common(RejectiveLadder(b))
    cfg = P.ProcedureConfig(mode, lad, rejective=True, horizon=1)
    return P.run_procedure(P.ArraySource(np.asarray(stats)[None, :]), PrecomputedStatistic(), cfg)


def test_horizon_one_reduces_to_fixed_sample():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        J = int(rng.integers(1, 11))
        p = rng.uniform(0, 0.2, J) ** rng.uniform(0.5, 3)
        alphas = np.sort(rng.uniform(0.001, 0.2, J))
        b = rejective_ladder(alphas).B
        stats = -np.log(p)
        down = _one_step(stats, b, "stepdown")
        up = _one_step(stats, b, "stepup")
        assert_array_equal(down.rejected, fixed_stepdown(p, alphas))
        assert_array_equal(up.rejected, fixed_stepup(p, alphas))
        assert set(down.rejected) <= set(up.rejected)
        assert np.all(up.sample_sizes == 1) and up.status == "complete"


def test_rejective_accepts_everything_without_crossing():
    cfg = P.ProcedureConfig("stepup", StandardizedLadder.common(RejectiveLadder([5.0, 4.0])), rejective=True, horizon=20)
    state = P.run_rejective_stepup(P.ArraySource(np.zeros((30, 2))), cfg, PrecomputedStatistic())
    assert_array_equal(state.verdicts, [-1, -1])
    assert_array_equal(state.sample_sizes, [20, 20])


def test_rejective_truncation_after_late_rejection():
    cfg = P.ProcedureConfig("stepdown", StandardizedLadder.common(RejectiveLadder([2.0, 1.0])), rejective=True, horizon=3)
    data = np.array([[0.0, 0.0], [0.0, 0.0], [2.5, 0.0]])
    state = P.run_procedure(P.ArraySource(data), PrecomputedStatistic(), cfg)
    assert_array_equal(state.verdicts, [1, -1])
    assert_array_equal(state.sample_sizes, [3, 3])


# single stream and general runs -------------------------------------------------


def test_single_stream_stepup_equals_stepdown():
    lad = StandardizedLadder.common(CriticalLadder([-2.0], [2.5]))
    rng = np.random.default_rng(8)
    for _ in range(50):
        data = rng.normal(0.2, 1, size=(400, 1))
        d = P.run_stepdown(P.ArraySource(data), P.ProcedureConfig("stepdown", lad), GaussianLLRStatistic(1.0))
        u = P.run_stepup(P.ArraySource(data), P.ProcedureConfig("stepup", lad), GaussianLLRStatistic(1.0))
        assert _summary(d) == _summary(u)


def _gauss_cfg(mode, J, seed=None):
    A_ = np.linspace(-4, -2, J)
    B_ = np.linspace(4, 2, J)
    return P.ProcedureConfig(mode, StandardizedLadder.common(CriticalLadder(A_, B_)), tie_seed=seed, trace=True)


@pytest.mark.parametrize("mode", ["stepdown", "stepup"])
def test_runs_conserve_and_are_deterministic(mode):
    rng = np.random.default_rng(12)
    J = 8
    data = rng.normal(np.r_[np.zeros(4), np.ones(4)], 2.0, size=(5000, J))
    s1 = P.run_procedure(P.ArraySource(data), GaussianLLRStatistic(2.0), _gauss_cfg(mode, J, 1))
    s2 = P.run_procedure(P.ArraySource(data), GaussianLLRStatistic(2.0), _gauss_cfg(mode, J, 1))
    assert s1.status == "complete"
    assert s1.decisions == s2.decisions
    assert s1.rejected_count + s1.accepted_count == J
    for t in s1.trace:
        # boundary pair fixed from counts known before the stage
        assert t["b"] == _gauss_cfg(mode, J).ladder.b[t["r"]]
    for d in s1.decisions:
        assert d.sample_size == s1.sample_sizes[d.stream]
        if d.verdict is P.Verdict.REJECTED:
            assert d.standardized_value >= _gauss_cfg(mode, J).ladder.b[-1]
        else:
            assert d.standardized_value <= _gauss_cfg(mode, J).ladder.a[-1]


def test_guard_trip_is_reported():
    lad = StandardizedLadder.common(CriticalLadder([-5.0, -4.0], [5.0, 4.0]))
    cfg = P.ProcedureConfig("stepdown", lad, max_stage_guard=50)
    state = P.run_stepdown(P.ArraySource(np.zeros((100, 2))), cfg, PrecomputedStatistic())
    assert state.status == "guard"
    assert_array_equal(state.verdicts, [0, 0])


def test_source_exhaustion_raises():
    with pytest.raises(P.SourceExhausted):
        P.run_stepdown(P.ArraySource(np.zeros((10, 3))), _cfg(), PrecomputedStatistic())


def test_missing_observation_for_active_stream_raises():
    with pytest.raises(ValueError):
        P.run_stepdown(P.ArraySource([[0, 1, 1], [1, 1, 1, 1, 1, 1, 1], [0]]), _cfg(), BERN)


def test_config_validation():
    with pytest.raises(ValueError):
        P.ProcedureConfig("stepdown", StandardizedLadder.common(RejectiveLadder(B)))
    with pytest.raises(ValueError):
        P.ProcedureConfig("stepdown", LADDER, rejective=True)
    with pytest.raises(ValueError):
        P.ProcedureConfig("stepdown", LADDER, horizon=5)
    with pytest.raises(ValueError):
        P.run_stepup(P.ArraySource(PATHS[1]), _cfg(), BERN)
    with pytest.raises(ValueError):
        P.run_stepdown(P.ArraySource([[0, 1]]), _cfg(), BERN)


def test_decisions_csv():
    state = P.run_stepdown(P.ArraySource(PATHS[2]), _cfg(), BERN)
    text = P.decisions_to_csv([(0, state)])
    rows = [r.split(",") for r in text.strip().split("\n")]
    assert rows[0] == ["replicate_id", "stream", "verdict", "stage", "sample_size", "statistic_value"]
    assert [r[1:5] for r in rows[1:]] == [
        ["1", "Rejected", "1", "7"],
        ["2", "Rejected", "2", "8"],
        ["3", "Accepted", "2", "8"],
    ]
    assert float(rows[1][5]) == pytest.approx(5 * STEP)
