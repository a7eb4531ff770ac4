"""Known error densities, their location scores and Fisher information.

The score is ``Lambda = -psi'/psi``.  Built-in models carry closed forms for
``Lambda``, ``Lambda'`` and ``Lambda''``; quadrature is only used to validate
them (:func:`validate_error_model`).
"""

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import ConfigError
from .quadrature import integrate_line


@dataclass(frozen=True)
class ErrorModel:
    name: str
    density_fn: Callable
    score_fn: Callable
    score_deriv_fn: Callable
    score_second_fn: Callable
    fisher_info: float
    variance: float
    sampler: Callable  # (np.random.Generator, n) -> ndarray
    support_halfwidth: float = 40.0
    params: dict = field(default_factory=dict)

    def sample(self, rng, n):
        return np.asarray(self.sampler(rng, int(n)), dtype=float)


def gaussian_error(sigma=1.0):
    sigma = float(sigma)
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    s2 = sigma * sigma
    norm = 1.0 / (sigma * np.sqrt(2.0 * np.pi))
    return ErrorModel(
        name="gaussian",
        density_fn=lambda y: norm * np.exp(-0.5 * np.square(y) / s2),
        score_fn=lambda y: np.asarray(y, dtype=float) / s2,
        score_deriv_fn=lambda y: np.full(np.shape(y), 1.0 / s2),
        score_second_fn=lambda y: np.zeros(np.shape(y)),
        fisher_info=1.0 / s2,
        variance=s2,
        sampler=lambda rng, n: sigma * rng.standard_normal(n),
        # density below 1e-22 at the cut
        support_halfwidth=max(40.0, 10.0 * sigma),
        params={"sigma": sigma},
    )


def _logistic_density(y):
    e = np.exp(-np.abs(np.asarray(y, dtype=float)))
    return e / (1.0 + e) ** 2


def _sech2_half(y):
    return 1.0 / np.cosh(0.5 * np.asarray(y, dtype=float)) ** 2


def _logistic_sample(rng, n):
    # u strictly inside (0, 1) so the quantile is finite
    u = (np.floor(rng.random(n) * 2.0**53) + 0.5) / 2.0**53
    return np.log(u) - np.log1p(-u)


def logistic_error():
    """Standard logistic density ``e^-x / (1 + e^-x)^2``; score ``tanh(x/2)``."""
    return ErrorModel(
        name="logistic",
        density_fn=_logistic_density,
        score_fn=lambda y: np.tanh(0.5 * np.asarray(y, dtype=float)),
        score_deriv_fn=lambda y: 0.5 * _sech2_half(y),
        score_second_fn=lambda y: -0.5 * _sech2_half(y) * np.tanh(0.5 * np.asarray(y, dtype=float)),
        fisher_info=1.0 / 3.0,
        variance=np.pi**2 / 3.0,
        sampler=_logistic_sample,
        support_halfwidth=40.0,
    )


ERROR_MODELS = {"gaussian": gaussian_error, "logistic": logistic_error}


def get_error_model(spec):
    """Build a model from ``"logistic"`` or ``{"name": "gaussian", "sigma": 2}``."""
    if isinstance(spec, str):
        spec = {"name": spec}
    spec = dict(spec)
    name = spec.pop("name", None)
    if name == "gaussian":
        return gaussian_error(spec.pop("sigma", 1.0))
    if name == "logistic":
        if spec:
            raise ConfigError(f"logistic model takes no parameters, got {sorted(spec)}")
        return logistic_error()
    raise ConfigError(f"unknown error model {name!r}; choose from {sorted(ERROR_MODELS)}")


def sample_errors(em, seed, n):
    """``n`` draws from ``em``; deterministic in ``seed``."""
    if n < 1:
        raise ConfigError(f"n must be at least 1, got {n}")
    return em.sample(np.random.default_rng(seed), n)


@dataclass
class CheckRecord:
    name: str
    measured: float
    expected: float
    tolerance: float
    passed: bool

    def to_json(self):
        def clean(v):
            v = float(v)
            return v if np.isfinite(v) else None

        return {
            "name": self.name,
            "measured": clean(self.measured),
            "expected": clean(self.expected),
            "tolerance": self.tolerance,
            "pass": bool(self.passed),
        }


@dataclass
class ValidationReport:
    model: str
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self):
        return {
            "schema_version": 1,
            "model": self.model,
            "pass": self.passed,
            "checks": [c.to_json() for c in self.checks],
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2)


def _close(name, measured, expected, tol):
    ok = bool(np.isfinite(measured) and abs(measured - expected) <= tol)
    return CheckRecord(name, measured, expected, tol, ok)


def validate_error_model(em, tol=1e-6, panels=160, per_panel=16, fd_step=1e-4):
    """Check the density/score identities of ``em`` by quadrature.

    Every integral is computed twice, at ``panels`` and ``2 * panels``; a
    disagreement above ``tol`` is reported as a failed convergence check rather
    than raised.
    """
    if not tol > 0:
        raise ConfigError(f"tol must be positive, got {tol}")
    T = em.support_halfwidth
    psi, lam = em.density_fn, em.score_fn

    integrands = {
        "normalization": lambda y: psi(y),
        "mean": lambda y: y * psi(y),
        "variance": lambda y: y * y * psi(y),
        # psi' = -Lambda psi
        "y_dpsi": lambda y: -y * lam(y) * psi(y),
        "score_mean": lambda y: lam(y) * psi(y),
        "fisher_score_sq": lambda y: lam(y) ** 2 * psi(y),
        "fisher_score_deriv": lambda y: em.score_deriv_fn(y) * psi(y),
    }
    values = {}
    drift = 0.0
    with np.errstate(all="ignore"):
        for key, fn in integrands.items():
            coarse = integrate_line(fn, T, panels, per_panel)
            fine = integrate_line(fn, T, 2 * panels, per_panel)
            values[key] = fine
            d = abs(fine - coarse) if np.isfinite(fine) and np.isfinite(coarse) else np.inf
            drift = max(drift, d)

    I, s2 = em.fisher_info, em.variance
    checks = [
        CheckRecord("quadrature_convergence", drift, 0.0, tol, bool(drift <= tol)),
        _close("normalization", values["normalization"], 1.0, tol),
        _close("mean_zero", values["mean"], 0.0, tol),
        _close("variance", values["variance"], s2, tol * max(1.0, s2)),
        _close("integral_y_dpsi", values["y_dpsi"], -1.0, tol),
        _close("score_mean_zero", values["score_mean"], 0.0, tol),
        _close("fisher_score_squared", values["fisher_score_sq"], I, tol * max(1.0, I)),
        _close("fisher_score_derivative", values["fisher_score_deriv"], I, tol * max(1.0, I)),
    ]

    # Cramer-Rao: 1 = (int y psi')^2 <= sigma^2 I
    cr = s2 * I
    checks.append(CheckRecord("cramer_rao", cr, 1.0, tol, bool(cr >= 1.0 - tol)))

    grid = np.linspace(-min(T, 20.0), min(T, 20.0), 4001)
    with np.errstate(all="ignore"):
        d1 = np.max(np.abs(em.score_deriv_fn(grid)))
        d2 = np.max(np.abs(em.score_second_fn(grid)))
    checks.append(CheckRecord("score_deriv_bounded", d1, np.nan, np.inf, bool(np.isfinite(d1))))
    checks.append(CheckRecord("score_second_bounded", d2, np.nan, np.inf, bool(np.isfinite(d2))))

    # central differences; O(h^2) error with bounded third derivatives
    y = np.linspace(-8.0, 8.0, 161)
    h = fd_step
    fd_tol = max(tol, 1e-5)
    with np.errstate(all="ignore"):
        fd_score = -(np.log(psi(y + h)) - np.log(psi(y - h))) / (2 * h)
        fd_deriv = (lam(y + h) - lam(y - h)) / (2 * h)
        fd_second = (em.score_deriv_fn(y + h) - em.score_deriv_fn(y - h)) / (2 * h)
        e0 = np.max(np.abs(fd_score - lam(y)))
        e1 = np.max(np.abs(fd_deriv - em.score_deriv_fn(y)))
        e2 = np.max(np.abs(fd_second - em.score_second_fn(y)))
    checks.append(_close("score_finite_difference", e0, 0.0, fd_tol))
    checks.append(_close("score_deriv_finite_difference", e1, 0.0, fd_tol))
    checks.append(_close("score_second_finite_difference", e2, 0.0, fd_tol))
    return ValidationReport(em.name, checks)
