"""Representer diagnostics for a few functionals on the Brownian-bridge operator.

Shows why the total-mass functional is refused while smoothed versions are not.
"""

import numpy as np

from inveff.estimators import FunctionalSpec, gamma_representer, project_onto_basis
from inveff.operators import brownian_bridge_operator


def main():
    op = brownian_bridge_operator()
    k_max = 200
    cases = {
        "phi = 1": FunctionalSpec(project_onto_basis(np.ones_like, op, k_max), normalized=False),
    }
    k = np.arange(k_max + 1, dtype=float)
    for p in (1, 2, 3, 4):
        cases[f"(k+1)^-{p}"] = FunctionalSpec((k + 1.0) ** -p, normalized=False)
    for label, phi in cases.items():
        rep = gamma_representer(op, phi, k_max)
        d = rep.diagnostic()
        print(f"{label:>10}: {d['verdict']:>10} via {d['method']:<14} partial sum {d['partial_sum']:.4g}")


if __name__ == "__main__":
    main()
