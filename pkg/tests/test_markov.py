import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from usfcert import rng
from usfcert.markov import (GeneratorError, RegimePath, occupation_standard_error, sample_path,
                            stationary_distribution, validate_generator)

G1 = [[-1.0, 1.0], [2.0, -2.0]]
G2 = [[-1.0, 1.0], [1.0, -1.0]]


@pytest.mark.parametrize("gamma", [G1, G2, [[0.0]]])
def test_valid_generators(gamma):
    assert validate_generator(gamma) == []


def test_row_sum_violation_reported():
    problems = validate_generator([[-1.0, 2.0], [1.0, -1.0]])
    assert len(problems) == 1 and "row 1" in problems[0]


def test_negative_rate_and_shape():
    assert any("(1,2)" in p for p in validate_generator([[1.0, -1.0], [0.0, 0.0]]))
    assert validate_generator([[0.0, 0.0]])[0].startswith("generator must be square")


def test_sample_path_rejects_invalid():
    with pytest.raises(GeneratorError):
        sample_path([[-1.0, 2.0], [1.0, -1.0]], 0, 1, 0, rng.stream(0, 0))


def test_single_regime_never_jumps():
    p = sample_path([[0.0]], 0.0, 100.0, 0, rng.stream(1, 0))
    assert p.n_jumps == 0


def test_absorbing_state_holds():
    p = sample_path([[0.0, 0.0], [2.0, -2.0]], 0.0, 1000.0, 0, rng.stream(2, 0))
    assert p.n_jumps == 0 and p.state_at(999.0) == 0


def test_stationary_distribution():
    assert stationary_distribution(G1) == pytest.approx([2 / 3, 1 / 3])
    assert stationary_distribution(G2) == pytest.approx([0.5, 0.5])


def test_stationary_reducible_rank_error():
    with pytest.raises(np.linalg.LinAlgError):
        stationary_distribution([[0.0, 0.0], [0.0, 0.0]])


def test_long_run_occupation():
    p = sample_path(G1, 0.0, 1e4, 0, rng.stream(3, 0, rng.REGIME))
    occ = p.occupation(2)
    se = occupation_standard_error(p, 2)
    assert abs(occ[0] - 2 / 3) < 3 * se[0]
    assert occ.sum() == pytest.approx(1.0)


def test_holding_times_exponential():
    p = sample_path(G1, 0.0, 2e4, 0, rng.stream(4, 0))
    hold = np.diff(np.append(p.jump_times, p.t_end))[:-1]
    s = p.states[:-1]
    # mean holding time 1/|gamma_ii|, within 5 standard errors
    for i, rate in ((0, 1.0), (1, 2.0)):
        h = hold[s == i]
        assert abs(h.mean() - 1 / rate) < 5 / rate / np.sqrt(h.size)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_path_invariants(seed, a, b):
    gamma = [[-a, a], [b, -b]]
    p = sample_path(gamma, 1.0, 30.0, 1, rng.stream(seed, 7))
    assert p.jump_times[0] == 1.0
    assert np.all(np.diff(p.jump_times) > 0)
    assert np.all(p.states[1:] != p.states[:-1])
    assert p.jump_times[-1] < 30.0


def test_determinism_same_stream():
    a = sample_path(G1, 0, 50, 0, rng.stream(9, 3, rng.REGIME))
    b = sample_path(G1, 0, 50, 0, rng.stream(9, 3, rng.REGIME))
    assert np.array_equal(a.jump_times, b.jump_times) and np.array_equal(a.states, b.states)


def test_state_at_right_continuous():
    p = RegimePath(np.array([0.0, 1.0, 2.5]), np.array([0, 1, 0]), 4.0)
    assert p.state_at(1.0) == 1
    assert p.state_at(np.nextafter(1.0, 0)) == 0
    assert list(p.state_at(np.array([0.5, 2.5, 3.9]))) == [0, 0, 0]


def test_csv_export_is_one_based(tmp_path):
    p = RegimePath(np.array([0.0, 1.25]), np.array([0, 1]), 3.0)
    f = tmp_path / "r.csv"
    p.write_csv(f)
    assert f.read_text().splitlines() == ["t_jump,state", "0.0,1", "1.25,2"]


def test_streams_are_distinct():
    a = rng.stream(0, 0, rng.BROWNIAN).standard_normal(4)
    b = rng.stream(0, 1, rng.BROWNIAN).standard_normal(4)
    c = rng.stream(0, 0, rng.REGIME).standard_normal(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
