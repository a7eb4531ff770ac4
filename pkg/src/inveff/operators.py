"""Forward operators represented by their spectral data.

An operator ``K = V R`` is stored as the eigenvalues ``rho_k`` of ``R`` and two
orthonormal families on [0, 1]: the input basis ``phi_k`` (eigenfunctions of
``R``) and the output basis ``phi_V_k = V phi_k``.  Then ``K phi_k = rho_k
phi_V_k`` and the image of a finitely supported input is an exact finite sum.

Basis callables take ``(k, x)`` and must broadcast over numpy arrays.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import ConfigError
from .quadrature import gauss_legendre

SQRT2 = np.sqrt(2.0)
DEFAULT_K_MAX = 64
DEFAULT_NODES = 256


def sine_basis(k, x):
    """Dirichlet sine basis ``sqrt(2) sin((k+1) pi x)`` on [0, 1]."""
    return SQRT2 * np.sin((np.asarray(k) + 1) * np.pi * np.asarray(x, dtype=float))


def sine_matrix(x, k_max):
    """Rows ``sqrt(2) sin((k+1) pi x)`` for ``k = 0..k_max`` by the Chebyshev recurrence.

    ``sin((k+2) t) = 2 cos(t) sin((k+1) t) - sin(k t)``; drift is a few ulps per
    row, far below anything the estimators resolve.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((k_max + 1, x.size))
    t = np.pi * x
    out[0] = np.sin(t)
    if k_max >= 1:
        c2 = 2.0 * np.cos(t)
        out[1] = c2 * out[0]
        for k in range(2, k_max + 1):
            np.multiply(c2, out[k - 1], out=out[k])
            out[k] -= out[k - 2]
    out *= SQRT2
    return out


@dataclass(frozen=True)
class SpectralOperator:
    name: str
    eigenvalue_fn: Callable
    input_basis_fn: Callable
    output_basis_fn: Callable
    sup_eigenvalue_bound: float
    basis_sup_bound: float
    basis_name: str = "sine"
    # optional fast path (x, k_max) -> rows, used for both bases
    matrix_fn: Callable = None

    def eigenvalues(self, k_max):
        """``rho_0 .. rho_{k_max}`` as a float array."""
        return np.asarray(self.eigenvalue_fn(np.arange(k_max + 1)), dtype=float) * np.ones(k_max + 1)

    def output_matrix(self, x, k_max):
        """Rows ``phi_V_k(x)`` for ``k = 0..k_max``; shape ``(k_max + 1, len(x))``.

        Rows are C-contiguous so per-coefficient reductions along axis 1 do not
        depend on how many rows were requested.
        """
        if self.matrix_fn is not None:
            return self.matrix_fn(np.asarray(x, dtype=float).ravel(), k_max)
        k = np.arange(k_max + 1)[:, None]
        x = np.asarray(x, dtype=float)[None, :]
        return np.ascontiguousarray(self.output_basis_fn(k, x) * np.ones_like(x))

    def input_matrix(self, z, k_max):
        if self.matrix_fn is not None:
            return self.matrix_fn(np.asarray(z, dtype=float).ravel(), k_max)
        k = np.arange(k_max + 1)[:, None]
        z = np.asarray(z, dtype=float)[None, :]
        return np.ascontiguousarray(self.input_basis_fn(k, z) * np.ones_like(z))


@dataclass(frozen=True, eq=False)
class InputFunction:
    """Finite coefficient vector ``(f_0, ..., f_K)`` in an operator's input basis."""

    coefficients: np.ndarray
    basis_name: str = "sine"

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float).ravel()
        if c.size == 0:
            raise ConfigError("an input function needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise ConfigError("input coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def k_max(self):
        return self.coefficients.size - 1

    def coefficient(self, k):
        return float(self.coefficients[k]) if k <= self.k_max else 0.0

    def padded(self, k_max):
        out = np.zeros(k_max + 1)
        n = min(k_max + 1, self.coefficients.size)
        out[:n] = self.coefficients[:n]
        return out

    def __call__(self, op, z):
        """Evaluate ``f(z) = sum_k f_k phi_k(z)`` in ``op``'s input basis."""
        _check_basis(op, self)
        B = op.input_matrix(np.atleast_1d(z), self.k_max)
        return np.sum(self.coefficients[:, None] * B, axis=0)

    def __add__(self, other):
        k = max(self.k_max, other.k_max)
        if self.basis_name != other.basis_name:
            raise ConfigError(f"cannot add functions in bases {self.basis_name!r} and {other.basis_name!r}")
        return InputFunction(self.padded(k) + other.padded(k), self.basis_name)

    def __mul__(self, a):
        return InputFunction(a * self.coefficients, self.basis_name)

    __rmul__ = __mul__

    def to_json(self):
        return [float(v) for v in self.coefficients]

    @classmethod
    def from_json(cls, data, basis_name="sine"):
        return cls(np.asarray(data, dtype=float), basis_name)


def _check_basis(op, f):
    if op.basis_name != f.basis_name:
        raise ConfigError(
            f"input function is expressed in basis {f.basis_name!r} but operator "
            f"{op.name!r} uses {op.basis_name!r}"
        )


def brownian_bridge_operator():
    """Green's operator of ``-g'' = f, g(0) = g(1) = 0``.

    The kernel ``min(x, t) - x t`` is Hermitian, so both bases are the sine
    basis and ``rho_k = 1 / (pi (k+1))^2``.
    """
    return SpectralOperator(
        name="brownian_bridge",
        eigenvalue_fn=lambda k: 1.0 / (np.pi * (np.asarray(k, dtype=float) + 1.0)) ** 2,
        input_basis_fn=sine_basis,
        output_basis_fn=sine_basis,
        sup_eigenvalue_bound=1.0 / np.pi**2,
        basis_sup_bound=SQRT2,
        matrix_fn=sine_matrix,
    )


def identity_operator():
    """Direct regression, ``K = I``, with the sine basis on both sides."""
    return SpectralOperator(
        name="identity",
        eigenvalue_fn=lambda k: np.ones_like(np.asarray(k, dtype=float)),
        input_basis_fn=sine_basis,
        output_basis_fn=sine_basis,
        sup_eigenvalue_bound=1.0,
        basis_sup_bound=SQRT2,
        matrix_fn=sine_matrix,
    )


OPERATORS = {
    "brownian_bridge": brownian_bridge_operator,
    "identity": identity_operator,
}


def get_operator(name):
    try:
        return OPERATORS[name]()
    except KeyError:
        raise ConfigError(f"unknown operator {name!r}; choose from {sorted(OPERATORS)}") from None


def _check_points(x):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise ConfigError("design points must lie in [0, 1]")
    return x


def forward_apply(op, f, x):
    """``(K f)(x) = sum_k f_k rho_k phi_V_k(x)``; scalar in, scalar out."""
    _check_basis(op, f)
    x = _check_points(x)
    scalar = x.ndim == 0
    xs = np.atleast_1d(x)
    B = op.output_matrix(xs, f.k_max)
    weights = f.coefficients * op.eigenvalues(f.k_max)
    out = np.sum(weights[:, None] * B, axis=0)
    return float(out[0]) if scalar else out


def brownian_bridge_kernel(x, t):
    return np.minimum(x, t) - x * t


def greens_quadrature_oracle(f, x, n_nodes=DEFAULT_NODES):
    """``int_0^1 (min(x,t) - x t) f(t) dt`` by Gauss-Legendre quadrature.

    The kernel has a kink at ``t = x``, so [0, x] and [x, 1] get separate
    ``n_nodes``-point rules. ``f`` is evaluated in the sine basis.
    """
    if n_nodes < 32:
        raise ConfigError(f"n_nodes must be at least 32, got {n_nodes}")
    if f.basis_name != "sine":
        raise ConfigError("the Green's kernel oracle is defined for the sine basis only")
    x = float(_check_points(x))
    total = 0.0
    for a, b in ((0.0, x), (x, 1.0)):
        if b <= a:
            continue
        t, w = gauss_legendre(a, b, n_nodes)
        ft = np.sum(f.coefficients[:, None] * sine_basis(np.arange(f.k_max + 1)[:, None], t[None, :]), axis=0)
        total += float(np.sum(w * brownian_bridge_kernel(x, t) * ft))
    return total


def make_input_power_decay(s, amplitude=1.0, K_max=DEFAULT_K_MAX, basis_name="sine"):
    """Coefficients ``amplitude * (k+1)^(-s)`` for ``k = 0..K_max``."""
    if not s > 0.5:
        raise ConfigError(f"decay exponent s must exceed 1/2 for square summability, got {s}")
    if K_max < 1:
        raise ConfigError(f"K_max must be at least 1, got {K_max}")
    k = np.arange(K_max + 1, dtype=float)
    return InputFunction(amplitude * (k + 1.0) ** (-float(s)), basis_name)


def unit_mass(k, basis_name="sine"):
    c = np.zeros(k + 1)
    c[k] = 1.0
    return InputFunction(c, basis_name)


def gram_matrix(basis_fn, k_max, n_nodes=512):
    """Quadrature Gram matrix ``int_0^1 b_k b_l`` for ``k, l <= k_max``."""
    t, w = gauss_legendre(0.0, 1.0, n_nodes)
    B = basis_fn(np.arange(k_max + 1)[:, None], t[None, :])
    return (B * w) @ B.T
