"""Exit criteria for the package, one test per criterion.

Each test prints a ``[PASS]``/``[FAIL]`` line; the lines are repeated in the
terminal summary (see ``conftest.py``).  Statistical bands are the stated
percentage or four jackknife standard errors, whichever is looser.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from inveff.cli import run_cli
from inveff.estimators import FunctionalSpec, efficient_functional, gamma_representer
from inveff.exceptions import SummabilityRefusal
from inveff.experiment import ExperimentConfig, run_monte_carlo
from inveff.noise import gaussian_error, logistic_error, validate_error_model
from inveff.operators import (
    InputFunction,
    brownian_bridge_operator,
    forward_apply,
    greens_quadrature_oracle,
    identity_operator,
    make_input_power_decay,
    sine_basis,
    unit_mass,
)
from inveff.simulate import generate_dataset

BB = brownian_bridge_operator()
WORKERS = os.cpu_count() or 1

ACCEPTANCE_LINES = []


def report(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def within(value, target, rel, se):
    return abs(value - target) <= max(rel * abs(target), 4 * se)


def test_01_operator_oracle_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        f = InputFunction(rng.normal(size=21))
        x = float(rng.random())
        worst = max(worst, abs(forward_apply(BB, f, x) - greens_quadrature_oracle(f, x, 256)))
    dt = time.perf_counter() - t0
    report(1, worst < 1e-6 and dt < 1.0, f"max |Kf - Green quadrature| = {worst:.2e} (< 1e-6) in {dt:.3f}s")


def test_02_eigen_relation():
    xs = np.linspace(0, 1, 51)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(11):
        got = np.array([greens_quadrature_oracle(unit_mass(k), x, 256) for x in xs])
        worst = max(worst, np.max(np.abs(got - BB.eigenvalues(k)[k] * sine_basis(k, xs))))
    dt = time.perf_counter() - t0
    report(2, worst < 1e-6 and dt < 1.0, f"max |K phi_k - rho_k phi_k| = {worst:.2e} over k<=10 in {dt:.3f}s")


def test_03_error_model_identities():
    t0 = time.perf_counter()
    log_r = validate_error_model(logistic_error(), 1e-6)
    gau_r = validate_error_model(gaussian_error(1.0), 1e-6)
    dt = time.perf_counter() - t0
    names = ["normalization", "mean_zero", "integral_y_dpsi", "fisher_score_squared", "fisher_score_derivative"]
    ok = all(r[n].passed for r in (log_r, gau_r) for n in names)
    em = logistic_error()
    ok &= abs(log_r["fisher_score_squared"].measured - 1 / 3) < 1e-6 and abs(em.fisher_info - 1 / 3) < 1e-6
    ok &= abs(log_r["variance"].measured - math.pi**2 / 3) < 1e-6 and abs(em.variance - math.pi**2 / 3) < 1e-6
    cr = gau_r["cramer_rao"].measured
    ok &= abs(cr - 1.0) < 1e-10
    ok &= dt < 1.0
    report(3, ok, f"logistic I = {log_r['fisher_score_squared'].measured:.9f}, sigma^2 = {log_r['variance'].measured:.9f}; "
                  f"gaussian sigma^2 I = {cr!r}; {dt:.3f}s")


def test_04_unbiasedness():
    f = make_input_power_decay(3, 1, 16)
    em = logistic_error()
    n, R, ks = 500, 10**4, (0, 1, 3)
    t0 = time.perf_counter()
    est = np.empty((R, len(ks)))
    for r in range(R):
        ds = generate_dataset(BB, f, em, n, 10**6 + r)
        B = BB.output_matrix(ds.xs, 3)
        naive = np.sum(B * ds.ys, axis=1) / n / BB.eigenvalues(3)
        est[r] = naive[list(ks)]
    dt = time.perf_counter() - t0
    mean = est.mean(axis=0)
    se = est.std(axis=0, ddof=1) / math.sqrt(R)
    z = (mean - f.coefficients[list(ks)]) / se
    ok = bool(np.all(np.abs(z) < 4)) and dt < 60
    report(4, ok, "standardized bias " + ", ".join(f"k={k}: {v:+.2f}" for k, v in zip(ks, z)) + f" in {dt:.1f}s")


def test_05_efficiency_gap():
    cfg = ExperimentConfig(operator="identity", error_model={"name": "logistic"}, n_grid=[2000], replications=20000, master_seed=5)
    t0 = time.perf_counter()
    res = run_monte_carlo(cfg, workers=1)
    dt = time.perf_counter() - t0
    nv, os_ = res.row(2000, "naive"), res.row(2000, "one_step")
    cmp = res.comparison(2000)
    ok_naive = within(nv["variance"], math.pi**2 / 3, 0.05, nv["variance_se"])
    ok_os = within(os_["variance"], 3.0, 0.05, os_["variance_se"])
    ok_gap = cmp["variance_difference"] > 4 * cmp["variance_difference_se"]
    report(5, ok_naive and ok_os and ok_gap and dt < 300,
           f"Var naive = {nv['variance']:.4f} (pi^2/3 = {math.pi**2 / 3:.4f}), Var one-step = {os_['variance']:.4f} (3), "
           f"gap = {cmp['variance_difference']:.4f} = {cmp['variance_difference'] / cmp['variance_difference_se']:.1f} SE; {dt:.1f}s")


def test_06_normal_no_loss():
    cfg = ExperimentConfig(operator="identity", error_model={"name": "gaussian", "sigma": 1.0}, n_grid=[2000], replications=20000, master_seed=6)
    res = run_monte_carlo(cfg, workers=1)
    nv, os_ = res.row(2000, "naive"), res.row(2000, "one_step")
    cmp = res.comparison(2000)
    ok = within(nv["variance"], 1.0, 0.05, nv["variance_se"]) and within(os_["variance"], 1.0, 0.05, os_["variance_se"])
    ok &= abs(cmp["variance_difference"]) <= 4 * cmp["variance_difference_se"]
    report(6, ok, f"Var naive = {nv['variance']:.4f}, Var one-step = {os_['variance']:.4f} (1); "
                  f"difference = {cmp['variance_difference']:+.4f} ({cmp['variance_difference'] / cmp['variance_difference_se']:+.2f} SE)")


def test_07_indirect_operator_bound():
    cfg = ExperimentConfig(
        operator="brownian_bridge",
        error_model={"name": "logistic"},
        truth={"power_decay": {"s": 3, "amplitude": 1.0}},
        truncation={"r": 0.3},
        n_grid=[500, 2000, 8000],
        replications=10000,
        master_seed=7,
    )
    t0 = time.perf_counter()
    res = run_monte_carlo(cfg, workers=WORKERS)
    dt = time.perf_counter() - t0
    bound = 3 * math.pi**4
    rows = [res.row(n, "one_step") for n in cfg.n_grid]
    ratios = [r["variance"] / bound for r in rows]
    ses = [r["variance_se"] / bound for r in rows]
    ok = 0.85 <= ratios[-1] <= 1.15
    for j in range(len(ratios) - 1):
        ok &= abs(ratios[j + 1] - 1) <= abs(ratios[j] - 1) + 4 * math.hypot(ses[j], ses[j + 1])
    ok &= dt < 900
    report(7, ok, "Var one-step / 3 pi^4 = " + ", ".join(f"n={n}: {r:.4f}+-{s:.4f}" for n, r, s in zip(cfg.n_grid, ratios, ses))
           + f"; {dt:.1f}s")


def test_08_general_functional():
    phi = FunctionalSpec.unit([1.0, 1.0])
    rep = gamma_representer(identity_operator(), phi)
    cfg = ExperimentConfig(
        operator="identity",
        error_model={"name": "logistic"},
        target={"kind": "functional", "phi_coefficients": [1.0, 1.0]},
        n_grid=[2000],
        replications=20000,
        master_seed=8,
    )
    res = run_monte_carlo(cfg, workers=1)
    os_ = res.row(2000, "one_step")
    bound = rep.norm_sq / logistic_error().fisher_info
    ok = abs(rep.norm_sq - 1.0) <= 4 * np.finfo(float).eps and within(os_["variance"], 3.0, 0.05, os_["variance_se"])
    ok &= res.optimal_bound == pytest.approx(bound, rel=1e-15)
    report(8, ok, f"||gamma||^2 = {rep.norm_sq!r}, Var one-step functional = {os_['variance']:.4f} (bound {bound:.4f})")


def test_09_summability_guardrail():
    # phi = 1 projected on the sine basis: <1, phi_k> = sqrt(2)(1 - cos((k+1) pi)) / ((k+1) pi)
    k = np.arange(201)
    const = FunctionalSpec.unit(np.sqrt(2) * (1 - np.cos((k + 1) * np.pi)) / ((k + 1) * np.pi))
    smooth = FunctionalSpec.unit((k + 1.0) ** -4)
    ds = generate_dataset(BB, make_input_power_decay(3, 1, 16), logistic_error(), 500, 9)
    rep_c = gamma_representer(BB, const, 200)
    rep_s = gamma_representer(BB, smooth, 200)
    refused = False
    try:
        efficient_functional(ds, BB, logistic_error(), const, 7, 200)
    except SummabilityRefusal:
        refused = True
    value = efficient_functional(ds, BB, logistic_error(), smooth, 7, 200)
    ok = (not rep_c.convergent) and refused and rep_s.convergent and math.isfinite(value)
    report(9, ok, f"constant: {rep_c.verdict} (growth {rep_c.tail_growth:.3f}), refused={refused}; "
                  f"smoothed: {rep_s.verdict} (growth {rep_s.tail_growth:.2e}), estimate {value:.4f}")


def test_10_cli_determinism(tmp_path):
    cfg = {
        "operator": "brownian_bridge",
        "error_model": {"name": "logistic"},
        "truth": {"power_decay": {"s": 3, "K_max": 32}},
        "n_grid": [200, 800],
        "replications": 400,
        "master_seed": 10,
        "block_size": 50,
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    outputs = []
    for w in ("1", "8", "1", "8"):
        out = tmp_path / f"run_{len(outputs)}.json"
        plot = tmp_path / f"reps_{len(outputs)}.csv"
        code = run_cli(["mc", "--config", str(path), "--out", str(out), "--workers", w, "--plot-data", str(plot)])
        assert code == 0
        outputs.append((out.read_bytes(), out.with_suffix(".csv").read_bytes(), plot.read_bytes()))
    ok = all(o == outputs[0] for o in outputs)
    report(10, ok, f"{len(outputs)} mc runs at workers 1 and 8 byte-identical ({len(outputs[0][0])} B json, {len(outputs[0][2])} B replicates)")
