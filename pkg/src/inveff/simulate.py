"""Synthetic samples from ``Y = (K f)(X) + eps`` with uniform random design.

Seeding rule: a dataset seed ``s`` is expanded with
``np.random.SeedSequence(s).spawn(2)`` into a design stream and a noise
stream, each driving its own PCG64 generator.  Passing ``design_seed`` replaces
the design stream with the first child of ``SeedSequence(design_seed)``, so one
design can be shared across noise replications.
"""

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError
from .operators import InputFunction, _check_basis, forward_apply

SCHEMA_VERSION = 1


def split_seed(seed):
    """``(design_rng, noise_rng)`` derived from one integer seed."""
    design, noise = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(design), np.random.default_rng(noise)


@dataclass(frozen=True, eq=False)
class Dataset:
    xs: np.ndarray
    ys: np.ndarray
    seed: int = None
    operator_name: str = None
    error_name: str = None
    truth: InputFunction = None

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float).ravel()
        ys = np.array(self.ys, dtype=float).ravel()
        if xs.size < 1 or xs.size != ys.size:
            raise ConfigError(f"need equal, nonzero numbers of x and y values (got {xs.size}, {ys.size})")
        if np.any(xs < 0) or np.any(xs > 1):
            raise ConfigError("design points must lie in [0, 1]")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self):
        return self.xs.size

    def provenance(self):
        return {
            "seed": self.seed,
            "operator": self.operator_name,
            "error_model": self.error_name,
            "n": self.n,
            "truth": None if self.truth is None else self.truth.to_json(),
        }

    def to_json(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "provenance": self.provenance(),
            "x": [float(v) for v in self.xs],
            "y": [float(v) for v in self.ys],
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in zip(self.xs, self.ys):
            w.writerow([repr(float(x)), repr(float(y))])
        return buf.getvalue()

    @classmethod
    def from_json(cls, data):
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported dataset schema_version {data.get('schema_version')!r}")
        prov = data.get("provenance") or {}
        truth = prov.get("truth")
        return cls(
            xs=data["x"],
            ys=data["y"],
            seed=prov.get("seed"),
            operator_name=prov.get("operator"),
            error_name=prov.get("error_model"),
            truth=None if truth is None else InputFunction.from_json(truth),
        )

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [h.strip() for h in rows[0]] != ["x", "y"]:
            raise ConfigError("dataset CSV must start with the header 'x,y'")
        body = [r for r in rows[1:] if r]
        try:
            xs = [float(r[0]) for r in body]
            ys = [float(r[1]) for r in body]
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"malformed dataset CSV: {exc}") from None
        return cls(xs, ys)


def load_dataset(path):
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith(".json"):
        try:
            return Dataset.from_json(json.loads(text))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"malformed dataset JSON {path}: {exc}") from None
    return Dataset.from_csv(text)


def generate_dataset(op, f, em, n, seed, design_seed=None):
    """Draw ``n`` pairs with ``X ~ U(0, 1)`` independent of ``eps ~ em``."""
    if n < 1:
        raise ConfigError(f"n must be at least 1, got {n}")
    _check_basis(op, f)
    design_rng, noise_rng = split_seed(seed)
    if design_seed is not None:
        design_rng, _ = split_seed(design_seed)
    xs = design_rng.random(n)
    eps = em.sample(noise_rng, n)
    ys = forward_apply(op, f, xs) + eps
    return Dataset(xs, ys, seed=int(seed), operator_name=op.name, error_name=em.name, truth=f)
