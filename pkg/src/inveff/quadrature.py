"""Gauss-Legendre rules on finite intervals and truncated real lines."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _legendre(n):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(a, b, n):
    """Nodes and weights of the ``n``-point Gauss-Legendre rule on ``[a, b]``."""
    if n < 1:
        raise ValueError(f"need at least one node, got {n}")
    t, w = _legendre(int(n))
    half = 0.5 * (b - a)
    return half * t + 0.5 * (a + b), half * w


def integrate(fn, a, b, n):
    x, w = gauss_legendre(a, b, n)
    return float(np.sum(w * fn(x)))


def composite_nodes(a, b, panels, per_panel):
    """Composite Gauss-Legendre rule with ``panels`` equal panels on ``[a, b]``."""
    t, w = _legendre(int(per_panel))
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return x, wt


def integrate_line(fn, halfwidth, panels=160, per_panel=16):
    """Integral of ``fn`` over ``[-halfwidth, halfwidth]``.

    Used for integrals over the real line of functions with light tails; the
    caller picks ``halfwidth`` so the integrand is negligible outside.
    """
    x, w = composite_nodes(-halfwidth, halfwidth, panels, per_panel)
    return float(np.sum(w * fn(x)))
