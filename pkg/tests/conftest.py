"""Shared fixtures: small LICD level systems built from the standard initial data."""
from functools import lru_cache

import numpy as np
import pytest

from fracnls.licd_stepper import ModelParams, SolverConfig, assemble_level, bootstrap_first_level, initial_state
from fracnls.operators import GridSpec, build_toeplitz, complex_to_block


@lru_cache(maxsize=None)
def level_system(alpha: float, M: int, case: str = "dnls", field: str = "u", tau: float = 0.01):
    """Level-2 block system on [-20, 20] with the default model parameters (GE bootstrap)."""
    grid = GridSpec(-20.0, 20.0, M, tau, 1.0, alpha)
    params = ModelParams(alpha, coupled=case == "cnls")
    state, _ = bootstrap_first_level(initial_state(case, grid), params, SolverConfig(method="ge"))
    T = build_toeplitz(grid)
    d, b = assemble_level(state, params, T)[field]
    return grid, complex_to_block(d, T, b), d, b


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


#: criterion number -> (passed, detail); filled by the acceptance suite.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
