from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from omitq.model import SystemParams  # noqa: E402

import criteria  # noqa: E402


@pytest.fixture
def fig2_params():
    """Red-detuned control, g0/kappa = 4."""
    return SystemParams(kappa=1 / 40, gamma_m=1e-3, g0=0.1, eps_c=1e-2, delta_c=-1.0, n_th=0.0)


@pytest.fixture
def fig4_params():
    """Resonant control, g0 * eps_c = 1.25e-3, at g0/kappa = 1/2."""
    kappa = 1 / 8
    g0 = kappa / 2
    return SystemParams(kappa=kappa, gamma_m=1e-3, g0=g0, eps_c=1.25e-3 / g0, delta_c=0.0, n_th=0.0)


def pytest_terminal_summary(terminalreporter):
    if not criteria.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in criteria.RESULTS:
        terminalreporter.write_line(line)
