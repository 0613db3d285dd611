"""Linearly implicit conservative time stepping for fractional NLS systems.

Model (``rho <= 0``, repulsive)::

    i u_t - gamma (-Laplace)^{alpha/2} u + rho (|u|^2 + beta |v|^2) u = 0
    i v_t - gamma (-Laplace)^{alpha/2} v + rho (|v|^2 + beta |u|^2) v = 0

on ``[a, b]`` with homogeneous Dirichlet data. The decoupled case (DNLS) has
only ``u`` and no ``beta`` term. With ``T`` the scaled fractional Laplacian
(``mu c_|j-k|``) each level solves, per field,

    (i I + D - T) u^{n+1} = i u^{n-1} + T u^{n-1} - D u^{n-1},
    D = rho tau diag(|u^n|^2 + beta |v^n|^2).

The first level comes from a Crank-Nicolson step whose averaged modulus is
resolved by Picard iteration.

Conserved quantities of the scheme (``<x, y> = sum conj(x) y``)::

    Q^n = h/2 (||u^n||^2 + ||u^{n+1}||^2)                  per field
    E^n = h [ 1/(2 tau) sum_w (<T w^{n+1}, w^{n+1}> + <T w^n, w^n>)
              - rho/2 sum_w |w^n|^2 |w^{n+1}|^2
              - rho beta/2 sum (|u^{n+1}|^2 |v^n|^2 + |u^n|^2 |v^{n+1}|^2) ]

where ``w`` runs over the fields. Both are exact invariants of the linear
systems; deviations measure the linear-solver error.
"""
from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .frac_kernel import check_alpha
from .krylov import SolveReport, gmres
from .operators import (
    BlockSystem,
    CirculantOperator,
    CirculantScheme,
    GridSpec,
    ToeplitzOperator,
    block_to_complex,
    build_toeplitz,
    circulant_approx,
    complex_to_block,
)
from .preconditioners import build_cpmhss, build_dncb

__all__ = [
    "Case",
    "ModelParams",
    "SolverConfig",
    "FieldState",
    "StepReport",
    "RunResult",
    "ConvergenceError",
    "GE_LIMIT",
    "initial_state",
    "bootstrap_first_level",
    "assemble_level",
    "solve_level_system",
    "step",
    "run",
    "discrete_mass",
    "discrete_energy",
    "toeplitz_for",
    "circulant_for",
    "make_preconditioner",
]

log = logging.getLogger(__name__)

#: Largest ``M`` for the dense Gaussian-elimination reference path.
GE_LIMIT = 8192


class Case(str, enum.Enum):
    DNLS = "dnls"
    CNLS = "cnls"


class ConvergenceError(RuntimeError):
    """A linear or nonlinear solve did not converge."""

    def __init__(self, message, level=None, field=None, report=None, trace=None):
        super().__init__(message)
        self.level = level
        self.field = field
        self.report = report
        self.trace = trace


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters. ``rho = 0`` (linear equation) is accepted; ``rho > 0`` is not."""

    alpha: float
    gamma: float = 1.0
    rho: float = -2.0
    beta: float = 1.0
    coupled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.rho > 0:
            raise ValueError(f"only the repulsive case rho <= 0 is supported, got rho={self.rho}")
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")

    @property
    def case(self) -> Case:
        return Case.CNLS if self.coupled else Case.DNLS


@dataclass(frozen=True)
class SolverConfig:
    """How each level's linear system is solved.

    :param method: ``"gmres"`` or ``"ge"`` (dense LU on the complex system).
    :param preconditioner: ``"dncb"``, ``"cpmhss"`` or ``"none"``.
    :param omega: preconditioner parameter for the ``u`` system; ``None``
        picks a default (0.1 for DNCB, ``||D||_inf + 0.1`` for CPMHSS).
    :param omega_v: parameter for the ``v`` system, defaults to ``omega``.
    :param strict: raise :class:`ConvergenceError` when GMRES does not converge.
    """

    method: str = "gmres"
    preconditioner: str = "dncb"
    scheme: CirculantScheme = CirculantScheme.STRANG
    omega: float | None = None
    omega_v: float | None = None
    tol: float = 1e-6
    maxit: int = 1000
    concurrent: bool = False
    strict: bool = True
    bootstrap_tol: float = 1e-12
    bootstrap_maxit: int = 50

    def __post_init__(self):
        if self.method not in ("gmres", "ge"):
            raise ValueError(f"method must be 'gmres' or 'ge', got {self.method!r}")
        if self.preconditioner not in ("dncb", "cpmhss", "none"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        object.__setattr__(self, "scheme", CirculantScheme.parse(self.scheme))


@dataclass
class FieldState:
    """Fields at two consecutive levels ``n - 1`` (``*_prev``) and ``n`` (``*_curr``).

    Vectors hold the inner grid points only; the boundary values are zero.
    At level 0 the ``*_prev`` entries are ``None``.
    """

    level: int
    grid: GridSpec
    u_curr: np.ndarray
    u_prev: np.ndarray | None = None
    v_curr: np.ndarray | None = None
    v_prev: np.ndarray | None = None

    @property
    def coupled(self) -> bool:
        return self.v_curr is not None

    @property
    def time(self) -> float:
        return self.level * self.grid.tau

    def fields(self) -> dict[str, tuple[np.ndarray | None, np.ndarray]]:
        out = {"u": (self.u_prev, self.u_curr)}
        if self.coupled:
            out["v"] = (self.v_prev, self.v_curr)
        return out


@dataclass
class StepReport:
    level: int
    reports: dict
    discrete_mass: float
    discrete_energy: float

    @property
    def iterations(self) -> int:
        return sum(r.iterations for r in self.reports.values() if r is not None)


@dataclass
class RunResult:
    state: FieldState
    reports: list
    snapshots: list = field(default_factory=list)
    bootstrap_sweeps: int = 0


# ---------------------------------------------------------------------------
# Cached operators


@lru_cache(maxsize=32)
def toeplitz_for(grid: GridSpec) -> ToeplitzOperator:
    return build_toeplitz(grid)


@lru_cache(maxsize=64)
def _scaled_toeplitz(grid: GridSpec, scale: float) -> ToeplitzOperator:
    return ToeplitzOperator(scale * toeplitz_for(grid).first_column)


@lru_cache(maxsize=64)
def circulant_for(T: ToeplitzOperator, scheme: CirculantScheme) -> CirculantOperator:
    return circulant_approx(T, scheme)


@lru_cache(maxsize=8)
def _dense_toeplitz(T: ToeplitzOperator) -> np.ndarray:
    return T.to_dense()


# ---------------------------------------------------------------------------
# Initial data


def _sech(x):
    return 1.0 / np.cosh(x)


def initial_state(case, grid: GridSpec, samplers: Sequence[Callable] | None = None) -> FieldState:
    """Level-0 state.

    Built-in cases: ``dnls`` with ``u0 = sech(x) exp(2ix)``; ``cnls`` with
    ``u0 = sech(x + 1) exp(2ix)`` and ``v0 = sech(x - 1) exp(-2ix)``.
    ``samplers`` (one or two callables of ``x``) override the built-in data.
    """
    case = Case(case)
    x = grid.x
    if samplers is not None:
        fields = [np.asarray(s(x), dtype=complex) for s in samplers]
        if len(fields) != (2 if case is Case.CNLS else 1):
            raise ValueError(f"{case.value} needs {2 if case is Case.CNLS else 1} sampler(s)")
    elif case is Case.DNLS:
        fields = [_sech(x) * np.exp(2j * x)]
    else:
        fields = [_sech(x + 1.0) * np.exp(2j * x), _sech(x - 1.0) * np.exp(-2j * x)]
    return FieldState(0, grid, fields[0], None, fields[1] if len(fields) > 1 else None, None)


# ---------------------------------------------------------------------------
# Linear solves


def _default_omega(preconditioner: str, d: np.ndarray) -> float:
    if preconditioner == "cpmhss":
        return float(np.max(np.abs(d), initial=0.0)) + 0.1
    return 0.1


def make_preconditioner(name: str, d: np.ndarray, C: CirculantOperator, omega: float | None):
    """Build ``dncb``/``cpmhss`` for diagonal ``d``; ``none`` gives ``None``."""
    if name == "none":
        return None
    if omega is None:
        omega = _default_omega(name, d)
    if name == "dncb":
        return build_dncb(d, C, omega)
    if name == "cpmhss":
        return build_cpmhss(d, C, omega)
    raise ValueError(f"unknown preconditioner {name!r}")


def _ge_solve(T: ToeplitzOperator, d: np.ndarray, b: np.ndarray) -> np.ndarray:
    if T.M > GE_LIMIT:
        raise ValueError(f"dense GE path is limited to M <= {GE_LIMIT}, got M={T.M}")
    A = np.diag(1j + d.astype(complex)) - _dense_toeplitz(T)
    return sla.solve(A, b, check_finite=False)


def solve_level_system(T: ToeplitzOperator, d: np.ndarray, b: np.ndarray, config: SolverConfig,
                       omega: float | None = None, x0: np.ndarray | None = None, tol: float | None = None
                       ) -> tuple[np.ndarray, SolveReport | None]:
    """Solve ``(iI + D - T) x = b``.

    GMRES runs on the real block form; GE solves the complex system directly
    and returns ``None`` as the report.
    """
    if config.method == "ge":
        return _ge_solve(T, d, b), None
    sys = complex_to_block(d, T, b)
    P = make_preconditioner(config.preconditioner, d, circulant_for(T, config.scheme),
                            config.omega if omega is None else omega)
    xb0 = None if x0 is None else np.concatenate([x0.imag, x0.real])
    rep = gmres(sys, sys.rhs, P, tol=config.tol if tol is None else tol, maxit=config.maxit, x0=xb0)
    return block_to_complex(rep.solution), rep


# ---------------------------------------------------------------------------
# Bootstrap


def bootstrap_first_level(state: FieldState, params: ModelParams, config: SolverConfig | None = None
                          ) -> tuple[FieldState, int]:
    """Advance level 0 to level 1 with a conservative Crank-Nicolson step.

    Each field solves ``(iI - T/2 + D'/2) w1 = i w0 + T w0/2 - D' w0/2`` with
    ``D' = rho tau N`` and ``N`` the level average of ``|u|^2 + beta |v|^2``
    (own field unweighted). ``N`` depends on the unknown, so the step iterates
    Picard sweeps until the update is below ``config.bootstrap_tol`` (relative
    to ``max|w|``); each sweep's linear systems are solved to that tolerance.

    :returns: the level-1 state and the number of sweeps.
    :raises ConvergenceError: if ``config.bootstrap_maxit`` sweeps do not suffice.
    """
    if state.level != 0:
        raise ValueError(f"bootstrap starts at level 0, got level {state.level}")
    config = config or SolverConfig()
    grid = state.grid
    Th = _scaled_toeplitz(grid, 0.5)
    inner = replace(config, tol=min(config.tol, config.bootstrap_tol), strict=True,
                    preconditioner="dncb" if config.method == "gmres" else config.preconditioner)
    rho_tau = params.rho * grid.tau
    beta = params.beta
    old = {name: w for name, (_, w) in state.fields().items()}
    new = dict(old)
    scale = max(max(np.max(np.abs(w), initial=0.0) for w in old.values()), 1.0)

    def modulus(name, cur):
        own = (np.abs(cur[name]) ** 2 + np.abs(old[name]) ** 2) / 2.0
        if len(old) == 1:
            return own
        other = "v" if name == "u" else "u"
        return own + beta * (np.abs(cur[other]) ** 2 + np.abs(old[other]) ** 2) / 2.0

    linear = params.rho == 0.0
    trace = []
    sweeps = 0
    for sweeps in range(1, config.bootstrap_maxit + 1):
        dnew = {name: 0.5 * rho_tau * modulus(name, new) for name in old}
        cand = {}
        for name, w0 in old.items():
            d = dnew[name]
            b = 1j * w0 + Th.matvec(w0) - d * w0
            x, rep = solve_level_system(Th, d, b, inner, omega=None, x0=new[name])
            if rep is not None and not rep.converged:
                raise ConvergenceError("bootstrap linear solve did not converge", 1, name, rep)
            cand[name] = x
        change = max(np.max(np.abs(cand[n] - new[n])) for n in old) / scale
        trace.append(change)
        new = cand
        if linear or change <= config.bootstrap_tol:
            break
    else:
        raise ConvergenceError(
            f"Picard iteration did not converge in {config.bootstrap_maxit} sweeps", 1, trace=trace)
    out = FieldState(1, grid, new["u"], old["u"], new.get("v"), old.get("v"))
    return out, sweeps


# ---------------------------------------------------------------------------
# LICD levels


def assemble_level(state: FieldState, params: ModelParams, T: ToeplitzOperator | None = None
                   ) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Diagonal ``d`` and right-hand side ``b`` for each field's level-``n+1`` system.

    ``d_u = rho tau (|u^n|^2 + beta |v^n|^2)`` and
    ``b_u = i u^{n-1} + T u^{n-1} - d_u u^{n-1}``; symmetrically for ``v``.
    """
    if state.level < 1 or state.u_prev is None:
        raise ValueError("assembly needs two populated levels (n >= 1)")
    T = toeplitz_for(state.grid) if T is None else T
    rho_tau = params.rho * state.grid.tau
    mods = {name: np.abs(cur) ** 2 for name, (_, cur) in state.fields().items()}
    out = {}
    for name, (prev, _) in state.fields().items():
        m = mods[name].copy()
        if state.coupled:
            m += params.beta * mods["v" if name == "u" else "u"]
        d = rho_tau * m
        out[name] = (d, 1j * prev + T.matvec(prev) - d * prev)
    return out


def step(state: FieldState, params: ModelParams, config: SolverConfig | None = None
         ) -> tuple[FieldState, StepReport]:
    """Advance from level ``n >= 1`` to ``n + 1``.

    The ``u`` and ``v`` systems only read levels ``n`` and ``n - 1``, so they
    may be solved concurrently (``config.concurrent``) with identical results.

    :raises ConvergenceError: when GMRES fails and ``config.strict`` is set.
    """
    config = config or SolverConfig()
    T = toeplitz_for(state.grid)
    systems = assemble_level(state, params, T)
    omegas = {"u": config.omega, "v": config.omega if config.omega_v is None else config.omega_v}

    def solve(name):
        d, b = systems[name]
        return solve_level_system(T, d, b, config, omega=omegas[name])

    names = list(systems)
    if config.concurrent and len(names) > 1:
        with ThreadPoolExecutor(len(names)) as pool:
            results = dict(zip(names, pool.map(solve, names)))
    else:
        results = {name: solve(name) for name in names}
    for name, (_, rep) in results.items():
        if rep is not None and not rep.converged and config.strict:
            raise ConvergenceError(
                f"GMRES did not converge at level {state.level + 1} for field {name} "
                f"(residual {rep.final_residual:.3e} after {rep.iterations} iterations)",
                state.level + 1, name, rep)
    new = FieldState(
        state.level + 1, state.grid,
        results["u"][0], state.u_curr,
        results["v"][0] if "v" in results else None, state.v_curr,
    )
    report = StepReport(new.level, {n: r for n, (_, r) in results.items()},
                        discrete_mass(new), discrete_energy(new, params))
    return new, report


def run(case, grid: GridSpec, params: ModelParams, n_levels: int | None = None,
        config: SolverConfig | None = None, t_end: float | None = None,
        snapshot_every: int | None = None, state: FieldState | None = None) -> RunResult:
    """Bootstrap and step to level ``N``.

    :param n_levels: final level ``N``; alternatively ``t_end`` gives ``N = round(t_end / tau)``.
    :param snapshot_every: record ``(level, time, u, v)`` every this many levels (and at level 0).
    :param state: initial level-0 state, built from ``case`` when omitted.
    """
    config = config or SolverConfig()
    if n_levels is None:
        if t_end is None:
            raise ValueError("give n_levels or t_end")
        n_levels = int(round(t_end / grid.tau))
    if n_levels < 1:
        raise ValueError(f"need at least one level, got {n_levels}")
    state = initial_state(case, grid) if state is None else state
    snaps = []

    def snap(s):
        if snapshot_every and s.level % snapshot_every == 0:
            snaps.append((s.level, s.time, s.u_curr.copy(), None if s.v_curr is None else s.v_curr.copy()))

    snap(state)
    state, sweeps = bootstrap_first_level(state, params, config)
    snap(state)
    reports = []
    for _ in range(n_levels - 1):
        state, rep = step(state, params, config)
        reports.append(rep)
        snap(state)
    return RunResult(state, reports, snaps, sweeps)


# ---------------------------------------------------------------------------
# Invariants


def discrete_mass(state: FieldState, per_field: bool = False):
    """``Q = h/2 (||w^{n-1}||^2 + ||w^n||^2)`` summed over fields (or per field).

    Uses the two levels held by ``state``; at level 0 the current level is
    counted twice.
    """
    h = state.grid.h
    out = {}
    for name, (prev, cur) in state.fields().items():
        prev = cur if prev is None else prev
        out[name] = 0.5 * h * (np.vdot(prev, prev).real + np.vdot(cur, cur).real)
    return out if per_field else float(sum(out.values()))


def discrete_energy(state: FieldState, params: ModelParams) -> float:
    """LICD energy of the two levels held by ``state`` (see module docstring)."""
    h, tau = state.grid.h, state.grid.tau
    T = toeplitz_for(state.grid)
    fields = {n: (cur if prev is None else prev, cur) for n, (prev, cur) in state.fields().items()}
    kinetic = 0.0
    quartic = 0.0
    for old, new in fields.values():
        kinetic += np.vdot(new, T.matvec(new)).real + np.vdot(old, T.matvec(old)).real
        quartic += np.sum(np.abs(old) ** 2 * np.abs(new) ** 2)
    energy = kinetic / (2.0 * tau) - 0.5 * params.rho * quartic
    if "v" in fields:
        (u0, u1), (v0, v1) = fields["u"], fields["v"]
        energy -= 0.5 * params.rho * params.beta * np.sum(
            np.abs(u1) ** 2 * np.abs(v0) ** 2 + np.abs(u0) ** 2 * np.abs(v1) ** 2)
    return float(h * energy)
