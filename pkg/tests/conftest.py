from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from hetkrr.plkrr import PLDataset  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def make_data(n_per_group, p=1, seed=0, domain=(-1.0, 1.0), betas=None, noise=0.3):
    """Small synthetic dataset; one entry of ``n_per_group`` per group."""
    rng = np.random.default_rng(seed)
    ys, xs, zs, gs = [], [], [], []
    for j, n in enumerate(n_per_group, start=1):
        z = rng.uniform(domain[0], domain[1], n)
        x = rng.standard_normal((n, p)) + 0.3 * z[:, None]
        b = np.full(p, float(j)) if betas is None else np.asarray(betas[j - 1], dtype=float)
        y = x @ b + np.sin(np.pi * z) + noise * rng.standard_normal(n)
        ys.append(y), xs.append(x), zs.append(z), gs.append(np.full(n, j))
    return PLDataset(np.concatenate(ys), np.vstack(xs), np.concatenate(zs), np.concatenate(gs))


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
