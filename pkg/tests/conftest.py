import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def solved():
    """Memoized ``(relaxation, result)`` per (example id, order, mode)."""
    from tracepop.examples import get_example
    from tracepop.relaxation import RelaxationOptions, build_relaxation, solve_relaxation

    cache = {}

    def get(name, d, mode="per-k"):
        key = (name, d, mode)
        if key not in cache:
            spec = get_example(name).build()
            relax = build_relaxation(spec, d, RelaxationOptions(boundedness=mode))
            cache[key] = solve_relaxation(relax)
        return cache[key]

    return get


def random_symmetric(rng, k, scale=1.0):
    A = rng.standard_normal((k, k))
    return scale * (A + A.T) / 2


def random_projection(rng, k):
    r = rng.integers(0, k + 1)
    Q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    V = Q[:, :r]
    return V @ V.T


def random_involution(rng, k):
    Q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    s = rng.choice([-1.0, 1.0], size=k)
    return (Q * s) @ Q.T


def random_contraction(rng, k):
    A = random_symmetric(rng, k)
    return A / max(1.0, np.abs(np.linalg.eigvalsh(A)).max())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
