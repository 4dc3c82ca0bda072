import math

import numpy as np
import pytest

from usfcert.moments import (MomentEstimate, fit_decay, iss_gain_probe, mann_kendall,
                             run_ensemble, steady_state, summarize, table_nondecreasing)
from usfcert.sdde import SddeModel, SimConfig, builtin_example2, linear_model

GBM = linear_model(-0.5, 0.3)


def zero_model():
    return SddeModel(1, 1, 0.0, lambda t, x, y, r, u: 0.0 * x,
                     lambda t, x, y, r, u: np.zeros(x.shape + (1,)))


@pytest.fixture(scope="module")
def gbm_est():
    return run_ensemble(GBM, SimConfig(1e-3, (0.0, 1.0), record_every=250), 10_000, 2.0)


def test_zero_system_exact():
    est = run_ensemble(zero_model(), SimConfig(0.01, (0.0, 1.0)), 50, 2.0)
    assert np.all(est.mean == 1.0) and np.all(est.ci_half == 0.0)


def test_gbm_matches_moment_ode(gbm_est):
    exact = np.exp(-0.91 * gbm_est.times)
    assert np.all(np.abs(gbm_est.mean - exact) <= gbm_est.ci_half + 1e-15)
    assert not gbm_est.unreliable and not gbm_est.heavy_tails


def test_ci_shrinks_like_inverse_sqrt_n():
    cfg = SimConfig(1e-2, (0.0, 1.0), record_every=100)
    small = run_ensemble(GBM, cfg, 2000).ci_half[-1]
    large = run_ensemble(GBM, cfg, 8000).ci_half[-1]
    assert small / large == pytest.approx(2.0, rel=0.2)


def test_disjoint_seed_families_agree():
    cfg = SimConfig(1e-2, (0.0, 1.0), record_every=50)
    a = run_ensemble(GBM, cfg, 4000, index_offset=0)
    b = run_ensemble(GBM, cfg, 4000, index_offset=4000)
    assert np.all(np.abs(a.mean - b.mean) <= a.ci_half + b.ci_half)


def test_threads_do_not_change_results():
    cfg = SimConfig(1e-2, (0.0, 1.0), master_seed=3)
    a = run_ensemble(GBM, cfg, 600, threads=1, batch_size=100)
    b = run_ensemble(GBM, cfg, 600, threads=4, batch_size=64)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.ci_half, b.ci_half)


def test_input_validation():
    with pytest.raises(ValueError):
        run_ensemble(GBM, SimConfig(0.1, (0, 1)), 1)
    with pytest.raises(ValueError):
        run_ensemble(GBM, SimConfig(0.1, (0, 1)), 10, p=0.0)


def test_nan_budget_flag():
    t = np.linspace(0, 1, 5)
    s = np.ones((5, 100))
    s[3:, :2] = np.nan
    est = summarize(t, s, 2.0)
    assert est.n_nan == 2 and est.unreliable
    s[3:, 1] = 1.0
    assert not summarize(t, s, 2.0).unreliable


def test_heavy_tail_flag():
    gen = np.random.default_rng(0)
    s = np.vstack([np.ones(5000), gen.pareto(2.5, 5000)])
    assert summarize(np.array([0.0, 1.0]), s, 4.0).heavy_tails


def _synthetic(values, times):
    values = np.asarray(values, float)
    return MomentEstimate(times, 2.0, values, np.zeros_like(values), 10)


def test_fit_decay_exact_exponential():
    t = np.linspace(0, 3, 31)
    fit = fit_decay(_synthetic(np.exp(-0.91 * t), t))
    assert fit.alpha == pytest.approx(0.91, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.beta == pytest.approx(1.0)


def test_fit_decay_constant():
    t = np.linspace(0, 3, 31)
    fit = fit_decay(_synthetic(np.full(31, 2.0), t))
    assert fit.alpha == pytest.approx(0.0, abs=1e-12) and fit.r2 == 0.0


def test_fit_decay_errors():
    t = np.linspace(0, 3, 31)
    v = np.exp(-t)
    v[10] = 0.0
    with pytest.raises(ValueError, match="positive"):
        fit_decay(_synthetic(v, t))
    with pytest.raises(ValueError):
        fit_decay(_synthetic(np.ones(31), t), window=(1.0, 5.0))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gbm_alpha_ci_covers_truth(seed):
    est = run_ensemble(GBM, SimConfig(5e-3, (0.0, 1.0), master_seed=seed, record_every=20), 3000)
    fit = fit_decay(est, n_boot=300, seed=seed)
    assert fit.alpha_ci[0] <= 0.91 <= fit.alpha_ci[1]


def test_mann_kendall():
    s, z = mann_kendall(np.arange(10.0))
    assert s == 45 and z > 3
    assert mann_kendall(np.arange(10.0)[::-1])[1] < -3


def test_iss_probe_linear_input():
    m = linear_model(-1.0, 0.3, input_gain=1.0)
    rows = iss_gain_probe(m, SimConfig(1e-2, (0.0, 10.0)), [0.0, 1.0, 2.0], N=200)
    assert rows[0].steady < 1e-5
    # steady state of d/dt m2 = (2a + b^2) m2 + 2 u E x, E x = u: m2 = 2u^2 / (2 - 0.09)
    for r in rows[1:]:
        assert r.steady == pytest.approx(2 * r.level ** 2 / 1.91, rel=0.1)
    assert all(r.settled for r in rows)
    assert table_nondecreasing(rows)


def test_iss_probe_flags_divergence():
    m = linear_model(0.3, 0.3, input_gain=1.0)
    rows = iss_gain_probe(m, SimConfig(1e-2, (0.0, 10.0)), [0.0, 0.5], N=200)
    assert not any(r.settled for r in rows)


def test_iss_probe_example2_small():
    m = builtin_example2(1.0, 0.1, 131, 0.5)
    rows = iss_gain_probe(m, SimConfig(2e-3, (0.0, 8.0), record_every=10), [0.0, 0.1, 0.2], N=100)
    assert table_nondecreasing(rows)
    assert rows[0].steady < 1e-2


def test_steady_state_nonfinite_is_unsettled():
    t = np.linspace(0, 1, 11)
    est = _synthetic(np.r_[np.ones(10), np.nan], t)
    assert steady_state(est)[2] is False


def test_moment_csv(tmp_path, gbm_est):
    f = tmp_path / "m.csv"
    gbm_est.write_csv(f)
    lines = f.read_text().splitlines()
    assert lines[0] == "t,moment,ci_half,N,p"
    row = lines[-1].split(",")
    assert float(row[1]) == gbm_est.mean[-1] and row[3] == "10000"
