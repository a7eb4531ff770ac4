import numpy as np
import pytest

from inveff.noise import ErrorModel


def zero_noise_model():
    """Degenerate noise with a symmetric score; only for exercising the estimators."""
    return ErrorModel(
        name="zero",
        density_fn=lambda y: np.where(np.asarray(y) == 0, np.inf, 0.0),
        score_fn=lambda y: np.asarray(y, dtype=float),
        score_deriv_fn=lambda y: np.ones(np.shape(y)),
        score_second_fn=lambda y: np.zeros(np.shape(y)),
        fisher_info=1.0,
        variance=0.0,
        sampler=lambda rng, n: np.zeros(n),
    )


@pytest.fixture
def zero_noise():
    return zero_noise_model()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
