"""Seeded Monte Carlo harness comparing naive and one-step estimators.

Seed splitting: replication ``i`` at sample size ``n`` uses the dataset seed
``SeedSequence(master_seed, spawn_key=(n, i)).generate_state(1, uint64)[0]``;
the dataset seed is then split into design and noise streams (see
:mod:`inveff.simulate`).  Replications run in fixed-size blocks, possibly in
worker processes, and are reassembled in replication order, so the output does
not depend on the worker count.
"""

import csv
import io
import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .estimators import (
    DEFAULT_RATE,
    FunctionalSpec,
    _plugin_variance,
    decay_condition_holds,
    gamma_representer,
    one_step_path,
    truncation_schedule,
)
from .exceptions import ConfigError, SummabilityRefusal
from .noise import get_error_model
from .operators import DEFAULT_K_MAX, InputFunction, get_operator, make_input_power_decay
from .simulate import generate_dataset

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ESTIMATORS = ("naive", "one_step")
MIN_NORMALITY_REPLICATES = 100


@dataclass
class ExperimentConfig:
    operator: dict = field(default_factory=lambda: {"name": "identity"})
    error_model: dict = field(default_factory=lambda: {"name": "logistic"})
    truth: dict = field(default_factory=lambda: {"coefficients": [0.0]})
    target: dict = field(default_factory=lambda: {"kind": "coefficient", "k": 0})
    n_grid: list = field(default_factory=lambda: [2000])
    replications: int = 1000
    truncation: dict = field(default_factory=lambda: {"r": DEFAULT_RATE})
    K_max: int = DEFAULT_K_MAX
    master_seed: int = 0
    workers: int = 1
    block_size: int = 250
    output: dict = None

    def __post_init__(self):
        if isinstance(self.operator, str):
            self.operator = {"name": self.operator}
        if isinstance(self.error_model, str):
            self.error_model = {"name": self.error_model}
        self.n_grid = [int(n) for n in self.n_grid]
        self.validate()

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data.pop("schema_version", None)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown experiment config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad experiment config: {exc}") from None

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, **asdict(self)}

    def validate(self):
        if int(self.replications) != self.replications or self.replications < 2:
            raise ConfigError(f"replications must be an integer >= 2, got {self.replications}")
        if not self.n_grid or min(self.n_grid) < 1:
            raise ConfigError(f"n_grid must be a nonempty list of sizes >= 1, got {self.n_grid}")
        if self.workers < 1 or self.block_size < 1:
            raise ConfigError("workers and block_size must be positive")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigError(f"master_seed must be a nonnegative integer, got {self.master_seed!r}")
        t = self.truncation
        if set(t) == {"r"}:
            truncation_schedule(1, t["r"])
        elif set(t) == {"m"}:
            if int(t["m"]) != t["m"] or t["m"] < 0:
                raise ConfigError(f"fixed truncation m must be a nonnegative integer, got {t['m']}")
        else:
            raise ConfigError(f"truncation must be {{'r': rate}} or {{'m': level}}, got {t}")
        kind = self.target.get("kind")
        if kind == "coefficient":
            k = self.target.get("k")
            if not isinstance(k, int) or k < 0:
                raise ConfigError(f"coefficient target needs an integer k >= 0, got {k!r}")
        elif kind == "functional":
            if "phi_coefficients" not in self.target:
                raise ConfigError("functional target needs phi_coefficients")
        else:
            raise ConfigError(f"target kind must be 'coefficient' or 'functional', got {kind!r}")
        if not ({"coefficients"} == set(self.truth) or {"power_decay"} == set(self.truth)):
            raise ConfigError("truth must be {'coefficients': [...]} or {'power_decay': {...}}")

    def m_for(self, n):
        t = self.truncation
        return int(t["m"]) if "m" in t else truncation_schedule(n, t["r"])


def build_operator(spec):
    spec = dict(spec)
    name = spec.pop("name", None)
    if spec:
        raise ConfigError(f"operator {name!r} takes no parameters, got {sorted(spec)}")
    return get_operator(name)


def build_truth(spec):
    if "coefficients" in spec:
        return InputFunction(spec["coefficients"])
    pd = dict(spec["power_decay"])
    unknown = set(pd) - {"s", "amplitude", "K_max"}
    if unknown or "s" not in pd:
        raise ConfigError(f"power_decay needs 's' and optional 'amplitude', 'K_max'; got {sorted(spec['power_decay'])}")
    return make_input_power_decay(pd["s"], pd.get("amplitude", 1.0), pd.get("K_max", DEFAULT_K_MAX))


def build_target(spec, K_max=DEFAULT_K_MAX):
    """``(phi, k_eval)``: the functional's coordinates and the highest coefficient used."""
    if spec["kind"] == "coefficient":
        return FunctionalSpec.coordinate(spec["k"]), spec["k"]
    coeffs = spec["phi_coefficients"]
    phi = FunctionalSpec.unit(coeffs) if spec.get("normalize", True) else FunctionalSpec(coeffs, normalized=False)
    return phi, max(int(spec.get("K_max", K_max)), phi.k_max)


@dataclass
class Models:
    op: object
    em: object
    truth: InputFunction
    phi: FunctionalSpec
    k_eval: int
    representer: object

    @property
    def weights(self):
        return self.phi.padded(self.k_eval)

    @property
    def true_value(self):
        return self.phi.value(self.truth)


def build_models(cfg):
    op = build_operator(cfg.operator)
    em = get_error_model(cfg.error_model)
    truth = build_truth(cfg.truth)
    phi, k_eval = build_target(cfg.target, cfg.K_max)
    rep = gamma_representer(op, phi, k_eval, assume_convergent=bool(cfg.target.get("assume_summable", False)))
    if not rep.convergent:
        raise SummabilityRefusal(
            "functional refused: the summability condition sum_k |<phi, phi_k>| / rho_k < inf "
            f"fails for this target (partial sum {rep.partial_sums[-1]:.4g} at K_max={k_eval})"
        )
    return Models(op, em, truth, phi, k_eval, rep)


@lru_cache(maxsize=8)
def _models_from_json(cfg_json):
    return build_models(ExperimentConfig.from_dict(json.loads(cfg_json)))


def replication_seed(master_seed, n, rep):
    ss = np.random.SeedSequence(master_seed, spawn_key=(int(n), int(rep)))
    return int(ss.generate_state(1, np.uint64)[0])


def run_replications(models, n, m, master_seed, start, stop):
    """Naive and one-step estimates for replications ``start .. stop-1`` at size ``n``."""
    w = models.weights
    naive = np.empty(stop - start)
    one_step = np.empty(stop - start)
    for j, rep in enumerate(range(start, stop)):
        ds = generate_dataset(models.op, models.truth, models.em, n, replication_seed(master_seed, n, rep))
        a, b, _ = one_step_path(ds, models.op, models.em, m, models.k_eval)
        naive[j] = np.sum(a * w)
        one_step[j] = np.sum(b * w)
    return naive, one_step


def _block_task(args):
    cfg_json, n, m, master_seed, start, stop = args
    return run_replications(_models_from_json(cfg_json), n, m, master_seed, start, stop)


def _nan_to_none(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _loo_variances(z):
    """Leave-one-out unbiased sample variances of ``z``."""
    R = z.size
    d2 = (z - z.mean()) ** 2
    s2 = d2.sum() / (R - 1)
    return ((R - 1) * s2 - R / (R - 1) * d2) / (R - 2)


def _jackknife_se(loo):
    R = loo.size
    return float(np.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2)))


def jackknife_variance_se(z):
    """Jackknife standard error of the unbiased sample variance of ``z``."""
    z = np.asarray(z, dtype=float)
    if z.size < 3:
        return float("nan")
    return _jackknife_se(_loo_variances(z))


def jackknife_variance_difference_se(a, b):
    """Jackknife standard error of ``var(a) - var(b)`` for paired samples."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size < 3:
        return float("nan")
    return _jackknife_se(_loo_variances(a) - _loo_variances(b))


def normality_diagnostic(replicates):
    """Standardized skewness and excess kurtosis with their normal-theory standard errors."""
    z = np.asarray(replicates, dtype=float)
    R = z.size
    if R < MIN_NORMALITY_REPLICATES:
        raise ConfigError(f"normality diagnostic needs at least {MIN_NORMALITY_REPLICATES} replicates, got {R}")
    d = z - z.mean()
    m2 = np.mean(d**2)
    out = {"replicates": R, "se_skewness": math.sqrt(6.0 / R), "se_excess_kurtosis": math.sqrt(24.0 / R)}
    if m2 <= 1e-300 or m2 <= (1e-14 * max(1.0, abs(z.mean()))) ** 2:
        out.update(skewness=None, excess_kurtosis=None, degenerate=True)
        return out
    out.update(
        skewness=float(np.mean(d**3) / m2**1.5),
        excess_kurtosis=float(np.mean(d**4) / m2**2 - 3.0),
        degenerate=False,
    )
    return out


@dataclass
class ExperimentResult:
    config: dict
    true_value: float
    optimal_bound: float
    plugin_variance: float
    noise_floor: float
    truncation: dict
    rows: list
    comparisons: list
    bounds: dict = None
    wall_time_s: float = None
    replicates: dict = None

    def row(self, n, estimator):
        for r in self.rows:
            if r["n"] == n and r["estimator"] == estimator:
                return r
        raise KeyError((n, estimator))

    def comparison(self, n):
        return next(c for c in self.comparisons if c["n"] == n)

    def to_json(self, include_timing=False):
        meta = {
            "master_seed": self.config["master_seed"],
            "replications": self.config["replications"],
            "truncation_levels": self.truncation,
        }
        if include_timing:
            meta["wall_time_s"] = self.wall_time_s
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "true_value": self.true_value,
            "optimal_bound": self.optimal_bound,
            "plugin_variance": self.plugin_variance,
            "noise_floor": self.noise_floor,
            "rows": self.rows,
            "comparisons": self.comparisons,
            "bounds": self.bounds,
            "metadata": meta,
        }

    def dumps(self, include_timing=False):
        return json.dumps(self.to_json(include_timing), indent=2, sort_keys=True) + "\n"

    CSV_FIELDS = (
        "n", "estimator", "m", "replications", "mean_estimate", "bias", "variance",
        "variance_se", "ratio_to_optimal", "ratio_to_plugin", "skewness", "excess_kurtosis",
    )

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_FIELDS)
        for r in self.rows:
            norm = r.get("normality") or {}
            flat = {**r, "skewness": norm.get("skewness"), "excess_kurtosis": norm.get("excess_kurtosis")}
            w.writerow(["" if flat[k] is None else (repr(flat[k]) if isinstance(flat[k], float) else flat[k]) for k in self.CSV_FIELDS])
        return buf.getvalue()

    def replicates_csv(self):
        if self.replicates is None:
            raise ValueError("result was produced without keep_replicates=True")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "replicate", "naive", "one_step"])
        for n in sorted(self.replicates):
            a, b = self.replicates[n]
            for i, (x, y) in enumerate(zip(a, b)):
                w.writerow([n, i, repr(float(x)), repr(float(y))])
        return buf.getvalue()


def _summarize(est, truth, n, m, optimal, plugin):
    R = est.size
    z = math.sqrt(n) * (est - truth)
    var = float(np.var(z, ddof=1))
    se = jackknife_variance_se(z)
    return {
        "n": n,
        "m": m,
        "replications": R,
        "mean_estimate": float(np.mean(est)),
        "bias": float(np.mean(est) - truth),
        "variance": var,
        "variance_se": _nan_to_none(se),
        "ratio_to_optimal": var / optimal,
        "ratio_to_optimal_se": _nan_to_none(se / optimal),
        "ratio_to_plugin": var / plugin,
        "normality": normality_diagnostic(est) if R >= MIN_NORMALITY_REPLICATES else None,
    }


def _check_rate_conditions(cfg):
    if "power_decay" in cfg.truth and "r" in cfg.truncation:
        s, r = cfg.truth["power_decay"]["s"], cfg.truncation["r"]
        if not decay_condition_holds(s, r):
            msg = (f"power-decay exponent s={s} with truncation rate r={r} violates "
                   f"s > (1 + 2r) / (4r) = {(1 + 2 * r) / (4 * r):.4g}; tail terms may not be negligible")
            warnings.warn(msg, RuntimeWarning, stacklevel=3)
            log.warning(msg)


def run_monte_carlo(cfg, workers=None, keep_replicates=False):
    """Run ``cfg.replications`` datasets per sample size and summarize both estimators."""
    t0 = time.perf_counter()
    workers = cfg.workers if workers is None else int(workers)
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    _check_rate_conditions(cfg)
    models = build_models(cfg)
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)
    R = int(cfg.replications)

    tasks = []
    for n in cfg.n_grid:
        m = cfg.m_for(n)
        for start in range(0, R, cfg.block_size):
            tasks.append((cfg_json, n, m, cfg.master_seed, start, min(R, start + cfg.block_size)))

    if workers == 1:
        blocks = [run_replications(models, *t[1:]) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_block_task, tasks))

    gathered = {}
    for t, (a, b) in zip(tasks, blocks):
        gathered.setdefault(t[1], ([], []))
        gathered[t[1]][0].append(a)
        gathered[t[1]][1].append(b)
    per_n = {n: (np.concatenate(a), np.concatenate(b)) for n, (a, b) in gathered.items()}

    op, em, truth = models.op, models.em, models.truth
    gamma = models.representer.gamma_coefficients
    optimal = models.representer.norm_sq / em.fisher_info
    plugin = _plugin_variance(op, em, truth, gamma, 256)
    floor = em.variance * models.representer.norm_sq
    true_value = models.true_value

    rows, comparisons = [], []
    for n in cfg.n_grid:
        naive, one_step = per_n[n]
        m = cfg.m_for(n)
        rows.append({"estimator": "naive", **_summarize(naive, true_value, n, m, optimal, plugin)})
        rows.append({"estimator": "one_step", **_summarize(one_step, true_value, n, m, optimal, plugin)})
        zn = math.sqrt(n) * (naive - true_value)
        zo = math.sqrt(n) * (one_step - true_value)
        diff = float(np.var(zn, ddof=1) - np.var(zo, ddof=1))
        comparisons.append({
            "n": n,
            "variance_difference": diff,
            "variance_difference_se": _nan_to_none(jackknife_variance_difference_se(zn, zo)),
        })

    res = ExperimentResult(
        config=cfg.to_dict(),
        true_value=true_value,
        optimal_bound=optimal,
        plugin_variance=plugin,
        noise_floor=floor,
        truncation={str(n): cfg.m_for(n) for n in cfg.n_grid},
        rows=rows,
        comparisons=comparisons,
        replicates=per_n if keep_replicates else None,
    )
    res.bounds = compare_to_bound(res, op, em, truth).to_json()
    res.wall_time_s = time.perf_counter() - t0
    log.info("monte carlo finished in %.2fs", res.wall_time_s)
    return res


@dataclass
class BoundReport:
    """Per-n comparison of empirical variances with the chain plug-in >= noise floor >= optimal."""

    plugin_variance: float
    noise_floor: float
    optimal_bound: float
    theory_ordering: bool
    first_strict: bool
    middle_strict: bool
    rows: list

    @property
    def passed(self):
        return self.theory_ordering and all(r["pass"] is not False for r in self.rows)

    def to_json(self):
        return {**asdict(self), "pass": self.passed}


def compare_to_bound(res, op, em, truth, n_sigmas=4.0, rel_tol=1e-9):
    """Tabulate the variance chain and check its ordering within jackknife error bars."""
    cfg = ExperimentConfig.from_dict(res.config)
    phi, k_eval = build_target(cfg.target, cfg.K_max)
    rep = gamma_representer(op, phi, k_eval, assume_convergent=True)
    optimal = rep.norm_sq / em.fisher_info
    floor = em.variance * rep.norm_sq
    plugin = _plugin_variance(op, em, truth, rep.gamma_coefficients, 256)

    theory = plugin >= floor * (1 - rel_tol) and floor >= optimal * (1 - rel_tol)
    rows = []
    for c in res.comparisons:
        n = c["n"]
        nv, os_ = res.row(n, "naive"), res.row(n, "one_step")
        se_o, se_d = os_["variance_se"], c["variance_difference_se"]
        if se_o is None or se_d is None:
            above_bound = naive_not_below = None
        else:
            above_bound = os_["variance"] >= optimal - n_sigmas * se_o
            naive_not_below = c["variance_difference"] >= -n_sigmas * se_d
        flags = [f for f in (above_bound, naive_not_below) if f is not None]
        rows.append({
            "n": n,
            "naive_variance": nv["variance"],
            "one_step_variance": os_["variance"],
            "naive_variance_se": nv["variance_se"],
            "one_step_variance_se": se_o,
            "one_step_not_below_optimal": above_bound,
            "naive_not_below_one_step": naive_not_below,
            "pass": all(flags) if flags else None,
        })
    return BoundReport(
        plugin_variance=plugin,
        noise_floor=floor,
        optimal_bound=optimal,
        theory_ordering=bool(theory),
        first_strict=bool(plugin > floor * (1 + rel_tol)),
        middle_strict=bool(floor > optimal * (1 + rel_tol)),
        rows=rows,
    )
