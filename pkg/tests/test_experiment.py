import json
import math

import numpy as np
import pytest

from inveff.exceptions import ConfigError, SummabilityRefusal
from inveff.experiment import (
    ExperimentConfig,
    compare_to_bound,
    jackknife_variance_difference_se,
    jackknife_variance_se,
    normality_diagnostic,
    replication_seed,
    run_monte_carlo,
)
from inveff.noise import gaussian_error, logistic_error
from inveff.operators import InputFunction, identity_operator, make_input_power_decay


def small(**kw):
    base = dict(n_grid=[50, 100], replications=120, block_size=40, master_seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_smoke_two_replications():
    res = run_monte_carlo(ExperimentConfig(n_grid=[10], replications=2))
    payload = json.loads(res.dumps())
    assert payload["schema_version"] == 1
    assert {(r["n"], r["estimator"]) for r in payload["rows"]} == {(10, "naive"), (10, "one_step")}
    for r in payload["rows"]:
        assert r["replications"] == 2 and r["variance"] >= 0
        assert r["normality"] is None and r["variance_se"] is None


def test_determinism_across_worker_counts():
    cfg = small()
    a = run_monte_carlo(cfg, workers=1, keep_replicates=True)
    b = run_monte_carlo(cfg, workers=3, keep_replicates=True)
    assert a.dumps() == b.dumps()
    assert a.to_csv() == b.to_csv()
    assert a.replicates_csv() == b.replicates_csv()


def test_block_size_does_not_change_output():
    a, b = run_monte_carlo(small(block_size=7)), run_monte_carlo(small(block_size=120))
    assert a.rows == b.rows and a.comparisons == b.comparisons


def test_seed_derivation_is_keyed():
    assert replication_seed(1, 100, 0) != replication_seed(1, 100, 1)
    assert replication_seed(1, 100, 0) != replication_seed(1, 200, 0)
    assert replication_seed(1, 100, 0) == replication_seed(1, 100, 0)


def test_result_shapes_and_csv():
    res = run_monte_carlo(small(), keep_replicates=True)
    assert res.truncation == {"50": 4, "100": 4}
    lines = res.to_csv().strip().splitlines()
    assert lines[0].startswith("n,estimator,m,")
    assert len(lines) == 1 + 4
    assert len(res.replicates_csv().strip().splitlines()) == 1 + 2 * 120
    assert res.row(100, "one_step")["normality"]["replicates"] == 120
    assert "wall_time_s" not in res.to_json()["metadata"]
    assert res.to_json(include_timing=True)["metadata"]["wall_time_s"] > 0


@pytest.mark.parametrize(
    "kw",
    [
        {"replications": 1},
        {"n_grid": [0]},
        {"n_grid": []},
        {"truncation": {"r": 0.5}},
        {"truncation": {"m": -1}},
        {"truncation": {"r": 0.3, "m": 2}},
        {"target": {"kind": "coefficient", "k": -1}},
        {"target": {"kind": "pointwise"}},
        {"truth": {"weights": [1]}},
        {"operator": "laplacian"},
        {"error_model": {"name": "gaussian", "sigma": -1}},
    ],
)
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        run_monte_carlo(ExperimentConfig(**{"replications": 5, "n_grid": [10], **kw}))


def test_unknown_config_key():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"replications": 5, "colour": "red"})


def test_functional_refusal_propagates():
    k = np.arange(201)
    c = np.sqrt(2) * (1 - np.cos((k + 1) * np.pi)) / ((k + 1) * np.pi)
    cfg = ExperimentConfig(
        operator="brownian_bridge",
        target={"kind": "functional", "phi_coefficients": c.tolist(), "K_max": 200},
        n_grid=[20],
        replications=3,
    )
    with pytest.raises(SummabilityRefusal):
        run_monte_carlo(cfg)


def test_rate_condition_warning():
    cfg = small(truth={"power_decay": {"s": 1.2, "K_max": 16}}, truncation={"r": 0.3}, replications=3, n_grid=[20])
    with pytest.warns(RuntimeWarning, match="violates"):
        run_monte_carlo(cfg)


def test_jackknife_matches_brute_force():
    z = np.random.default_rng(5).standard_t(5, size=40)
    loo = np.array([np.var(np.delete(z, i), ddof=1) for i in range(z.size)])
    R = z.size
    brute = math.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2))
    assert jackknife_variance_se(z) == pytest.approx(brute, rel=1e-10)
    w = z + np.random.default_rng(6).normal(size=40)
    loo_w = np.array([np.var(np.delete(w, i), ddof=1) for i in range(R)])
    d = loo - loo_w
    brute_d = math.sqrt((R - 1) / R * np.sum((d - d.mean()) ** 2))
    assert jackknife_variance_difference_se(z, w) == pytest.approx(brute_d, rel=1e-10)


def test_normality_diagnostic():
    R = 10**5
    d = normality_diagnostic(np.random.default_rng(1).standard_normal(R))
    assert abs(d["skewness"]) < 4 * math.sqrt(6 / R)
    assert abs(d["excess_kurtosis"]) < 4 * math.sqrt(24 / R)
    assert d["se_skewness"] == math.sqrt(6 / R)
    assert normality_diagnostic(np.full(200, 2.5))["degenerate"] is True
    with pytest.raises(ConfigError):
        normality_diagnostic(np.zeros(99))


def test_compare_to_bound_logistic_gap():
    res = run_monte_carlo(small(n_grid=[200], replications=400))
    rep = compare_to_bound(res, identity_operator(), logistic_error(), InputFunction([0.0]))
    assert rep.noise_floor == pytest.approx(math.pi**2 / 3)
    assert rep.optimal_bound == pytest.approx(3.0)
    assert rep.middle_strict and not rep.first_strict and rep.theory_ordering
    assert rep.passed


def test_compare_to_bound_gaussian_tight():
    res = run_monte_carlo(small(error_model={"name": "gaussian", "sigma": 1.0}, n_grid=[200], replications=400))
    rep = compare_to_bound(res, identity_operator(), gaussian_error(1.0), InputFunction([0.0]))
    assert not rep.middle_strict
    assert rep.noise_floor == pytest.approx(rep.optimal_bound, rel=1e-14)
    assert rep.passed


def test_compare_to_bound_nondegenerate_truth():
    truth = make_input_power_decay(2, 1.0, 8)
    cfg = small(truth={"power_decay": {"s": 2, "amplitude": 1.0, "K_max": 8}}, n_grid=[200], replications=200)
    res = run_monte_carlo(cfg)
    rep = compare_to_bound(res, identity_operator(), logistic_error(), truth)
    assert rep.first_strict and rep.plugin_variance > rep.noise_floor
    assert res.bounds["first_strict"]


@pytest.mark.slow
def test_monotone_efficiency_trend():
    res = run_monte_carlo(ExperimentConfig(n_grid=[500, 2000, 8000], replications=4000, master_seed=17))
    rows = [res.row(n, "one_step") for n in (500, 2000, 8000)]
    for a, b in zip(rows, rows[1:]):
        slack = 4 * math.hypot(a["ratio_to_optimal_se"], b["ratio_to_optimal_se"])
        assert abs(b["ratio_to_optimal"] - 1) <= abs(a["ratio_to_optimal"] - 1) + slack
    assert all(r["pass"] for r in res.bounds["rows"])


@pytest.mark.slow
def test_gaussian_variance_gap_is_second_order():
    # identity, f = 0, Lambda(y) = y: one-step = naive - sum_{j<=m} f^_j (G^_j0 - delta_j0)
    # with G^ the empirical Gram matrix; expanding to O(1/n) gives
    # n (Var naive - Var one-step) = (m + 1/2) / n + o(m / n)
    n, m = 2000, 10
    cfg = ExperimentConfig(error_model={"name": "gaussian", "sigma": 1.0}, n_grid=[n], replications=20000,
                           truncation={"m": m}, master_seed=99)
    c = run_monte_carlo(cfg).comparison(n)
    assert abs(c["variance_difference"] - (m + 0.5) / n) < 4 * c["variance_difference_se"]
