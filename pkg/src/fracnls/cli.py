"""Experiment harness: level-2 iteration counts, omega sweeps, reference tables,
spectral dumps and solution snapshots.

Subcommands (``fracnls <cmd> --help`` for flags)::

    run      solve the level-2 systems for every (alpha, M) cell, one CSV row per cell
    sweep    like ``run`` but sweep omega and also write the per-omega counts
    tables   compare observed iteration counts and omega ranges with the published ones
    spectra  dense eigenvalues of R and the preconditioned matrices
    dump     full time run with solution snapshots (and error surfaces vs GE)

Exit codes: 0 success, 1 configuration error, 2 solver failure in some cell.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .krylov import gmres, omega_sweep
from .licd_stepper import (
    GE_LIMIT,
    Case,
    _ge_solve,
    ConvergenceError,
    ModelParams,
    RunResult,
    SolverConfig,
    assemble_level,
    bootstrap_first_level,
    circulant_for,
    initial_state,
    make_preconditioner,
    run,
    step,
    toeplitz_for,
)
from .operators import BlockSystem, CirculantScheme, GridSpec, complex_to_block
from .spectra import (
    MATRIX_LABELS,
    SPECTRA_LIMIT,
    bound_audit,
    preconditioned_spectrum,
    write_eigenvalues_csv,
)
from .splitting_theory import SpectralIntervals, eigenvalue_bounds, optimal_omega

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "CellResult",
    "load_config",
    "level_systems",
    "run_cell",
    "run_experiment",
    "dump_solution",
    "reproduce_tables",
    "reference_data",
    "main",
    "CSV_COLUMNS",
]

log = logging.getLogger("fracnls")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2

#: Default omega grid: (0, 3] in steps of 0.01.
DEFAULT_SWEEP = (0.01, 3.0, 0.01)

CSV_COLUMNS = [
    "case", "alpha", "M", "preconditioner", "scheme", "omega_used", "iterations",
    "cpu_seconds", "final_relative_residual", "converged",
    "omega_used_v", "iterations_u", "iterations_v", "omega_range_u", "omega_range_v", "error",
]


class ConfigError(ValueError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class ExperimentConfig:
    """One experiment: a matrix of (alpha, M) cells sharing all other settings.

    ``omega`` is a number, ``"optimal"`` (minimizer of the analytic
    convergence bound) or ``None`` (preconditioner default). ``omega_sweep``
    ``(start, stop, step)`` overrides it with an empirical search.
    """

    case: str = "cnls"
    alpha: tuple = (1.5,)
    M: tuple = (3200,)
    tau: float = 0.01
    t_end: float = 2.0
    a: float = -20.0
    b: float = 20.0
    gamma: float = 1.0
    rho: float = -2.0
    beta: float = 1.0
    solver: str = "gmres"
    preconditioner: str = "dncb"
    circulant: str = "strang"
    omega: object = None
    omega_sweep: tuple | None = None
    tol: float = 1e-6
    maxit: int = 1000
    out: str = "results"
    level: int = 2
    snapshot_every: int = 10
    reference: bool = False
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        try:
            Case(self.case)
        except ValueError:
            raise ConfigError(f"unknown case {self.case!r} (dnls or cnls)", "case") from None
        if self.solver not in ("gmres", "ge"):
            raise ConfigError(f"unknown solver {self.solver!r} (gmres or ge)", "solver")
        if self.preconditioner not in ("none", "dncb", "cpmhss"):
            raise ConfigError(f"unknown preconditioner {self.preconditioner!r}", "precond")
        try:
            CirculantScheme.parse(self.circulant)
        except ValueError as exc:
            raise ConfigError(str(exc), "circulant") from None
        for a in self.alpha:
            if not 1.0 < a <= 2.0:
                raise ConfigError(f"alpha must lie in (1, 2], got {a}", "alpha")
        for m in self.M:
            if m < 8:
                raise ConfigError(f"M must be at least 8, got {m}", "m")
        for key in ("tau", "t_end", "gamma", "tol"):
            if not getattr(self, key) > 0:
                raise ConfigError("must be positive", key)
        if self.rho > 0:
            raise ConfigError("only rho <= 0 is supported", "rho")
        if self.beta < 0:
            raise ConfigError("must be non-negative", "beta")
        if not self.b > self.a:
            raise ConfigError("need b > a", "b")
        if self.maxit < 1:
            raise ConfigError("must be at least 1", "maxit")
        if self.level < 2:
            raise ConfigError("the first LICD level is 2", "level")
        if isinstance(self.omega, str) and self.omega != "optimal":
            raise ConfigError(f"expected a number or 'optimal', got {self.omega!r}", "omega")
        if isinstance(self.omega, (int, float)) and not self.omega > 0:
            raise ConfigError("must be positive", "omega")
        if self.omega_sweep is not None:
            start, stop, stp = self.omega_sweep
            if not (0 < start <= stop and stp > 0):
                raise ConfigError("need 0 < start <= stop and step > 0", "omega_sweep")
        return self

    def params(self, alpha: float) -> ModelParams:
        return ModelParams(alpha, self.gamma, self.rho, self.beta, coupled=self.case == "cnls")

    def grid(self, alpha: float, M: int) -> GridSpec:
        return GridSpec(self.a, self.b, M, self.tau, self.gamma, alpha)

    def omega_grid(self) -> np.ndarray:
        start, stop, stp = self.omega_sweep or DEFAULT_SWEEP
        n = int(math.floor((stop - start) / stp + 1e-9)) + 1
        return np.round(start + stp * np.arange(n), 12)


def _parse_list(text, conv, key):
    try:
        return tuple(conv(v) for v in str(text).replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"cannot parse {text!r}", key) from None


def _parse_omega(text):
    if text is None:
        return None
    t = str(text).strip().lower()
    if t in ("", "default", "none", "auto"):
        return None
    if t == "optimal":
        return "optimal"
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"expected a number or 'optimal', got {text!r}", "omega") from None


def _parse_sweep(text):
    if text is None:
        return None
    parts = str(text).replace(",", ":").split(":")
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"expected start:stop:step, got {text!r}", "omega_sweep") from None
    if len(vals) == 1 and vals[0] == 0:
        return None
    if len(vals) != 3:
        raise ConfigError(f"expected start:stop:step, got {text!r}", "omega_sweep")
    return vals


def _parse_bool(text, key):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}", key)


_KEY_ALIASES = {"m": "M", "precond": "preconditioner", "scheme": "circulant", "omega-sweep": "omega_sweep",
                "t-end": "t_end", "snapshot-every": "snapshot_every"}


def _coerce(key: str, value):
    """Convert a raw config string to the typed field value."""
    if key == "alpha":
        return _parse_list(value, float, "alpha")
    if key == "M":
        return _parse_list(value, int, "m")
    if key == "omega":
        return _parse_omega(value)
    if key == "omega_sweep":
        return _parse_sweep(value)
    if key == "reference":
        return value if isinstance(value, bool) else _parse_bool(value, key)
    if key in ("maxit", "level", "snapshot_every", "workers"):
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"expected an integer, got {value!r}", key) from None
    if key in ("tau", "t_end", "a", "b", "gamma", "rho", "beta", "tol"):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"expected a number, got {value!r}", key) from None
    return str(value).strip().lower() if key != "out" else str(value).strip()


def load_config(path) -> dict:
    """Read a flat ``key = value`` file (UTF-8, ``#`` comments) into typed overrides."""
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from None
    names = {f.name for f in fields(ExperimentConfig)}
    out = {}
    for raw_key, value in parser["experiment"].items():
        key = _KEY_ALIASES.get(raw_key.strip().lower(), raw_key.strip().lower().replace("-", "_"))
        if key not in names:
            raise ConfigError("unknown configuration key", raw_key)
        out[key] = _coerce(key, value)
    return out


def build_config(file_values: dict | None = None, **flags) -> ExperimentConfig:
    """Merge file values and flag overrides (flags win) into a validated config."""
    values = dict(file_values or {})
    values.update({k: v for k, v in flags.items() if v is not None})
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


# ---------------------------------------------------------------------------
# Cells


@dataclass
class CellResult:
    case: str
    alpha: float
    M: int
    preconditioner: str
    scheme: str
    omega_used: float | None = None
    iterations: int | None = None
    cpu_seconds: float = 0.0
    final_relative_residual: float = math.nan
    converged: bool = False
    omega_used_v: float | None = None
    iterations_u: int | None = None
    iterations_v: int | None = None
    omega_range_u: tuple | None = None
    omega_range_v: tuple | None = None
    error: str = ""
    sweeps: dict = field(default_factory=dict, repr=False)

    def row(self) -> dict:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, tuple):
                return "" if any(map(math.isnan, v)) else f"[{v[0]:.2f},{v[1]:.2f}]"
            if isinstance(v, float):
                return repr(v)
            return v
        d = {k: getattr(self, k) for k in CSV_COLUMNS}
        return {k: fmt(v) for k, v in d.items()}


@dataclass
class LevelSystems:
    grid: GridSpec
    params: ModelParams
    systems: dict          # field name -> BlockSystem
    bootstrap_sweeps: int
    complex_systems: dict = field(default_factory=dict)  # field name -> (d, b)


def level_systems(case: str, alpha: float, M: int, cfg: ExperimentConfig | None = None) -> LevelSystems:
    """Block systems of the first LICD level (level 2) from the standard initial data.

    The level-1 state is computed by the Crank-Nicolson bootstrap with
    DNCB-GMRES at tolerance 1e-12.
    """
    cfg = cfg or ExperimentConfig(case=case)
    cfg = replace(cfg, case=case)
    grid, params = cfg.grid(alpha, M), cfg.params(alpha)
    state = initial_state(case, grid)
    state, sweeps = bootstrap_first_level(state, params, SolverConfig(method="gmres", preconditioner="dncb"))
    for _ in range(cfg.level - 2):
        state, _ = step(state, params, SolverConfig(tol=1e-12))
    T = toeplitz_for(grid)
    levels = assemble_level(state, params, T)
    systems = {name: complex_to_block(d, T, b) for name, (d, b) in levels.items()}
    return LevelSystems(grid, params, systems, sweeps, levels)


def analytic_omega(sys: BlockSystem, grid: GridSpec) -> float:
    """Minimizer of the analytic bound, with ``T``'s spectrum bounded by the eigenvalue bounds.

    When those bounds are vacuous (``alpha = 2``) the extreme eigenvalues are
    computed by Lanczos instead.
    """
    eb = eigenvalue_bounds(grid, "T")
    lo, hi = eb.lower, eb.upper
    if eb.degenerate or lo <= 0:
        op = LinearOperator((sys.M, sys.M), matvec=sys.T.matvec, dtype=float)
        lo = float(eigsh(op, k=1, which="SA", return_eigenvectors=False, tol=1e-8)[0])
        hi = float(eigsh(op, k=1, which="LA", return_eigenvectors=False, tol=1e-8)[0])
    d = sys.d
    iv = SpectralIntervals(float(d.min()), float(min(d.max(), 0.0)), lo, hi)
    return optimal_omega(iv).omega_opt


def _family(cfg, sys, scheme):
    C = circulant_for(sys.T, scheme)
    return lambda w: make_preconditioner(cfg.preconditioner, sys.d, C, w)


def _solve_field(cfg: ExperimentConfig, sys: BlockSystem, grid: GridSpec, sweep: bool, b=None):
    """Returns (iterations, converged, residual, omega_used, omega_range, sweep_result)."""
    scheme = CirculantScheme.parse(cfg.circulant)
    if cfg.solver == "ge":
        x = _ge_solve(sys.T, sys.d, b)
        A_x = 1j * x + sys.d * x - sys.T.matvec(x)
        res = float(np.linalg.norm(A_x - b) / max(np.linalg.norm(b), 1e-300))
        return 0, True, res, None, None, None
    if cfg.preconditioner == "none":
        rep = gmres(sys, sys.rhs, None, tol=cfg.tol, maxit=cfg.maxit)
        return rep.iterations, rep.converged, rep.final_residual, None, None, None
    if sweep:
        res = omega_sweep(sys, _family(cfg, sys, scheme), cfg.omega_grid(), cfg.tol, cfg.maxit)
        w = res.omega_best if not math.isnan(res.omega_range[0]) else None
        if w is None:
            return cfg.maxit + 1, False, math.nan, None, res.omega_range, res
        rep = gmres(sys, sys.rhs, _family(cfg, sys, scheme)(w), tol=cfg.tol, maxit=cfg.maxit)
        return rep.iterations, rep.converged, rep.final_residual, w, res.omega_range, res
    w = cfg.omega
    if w == "optimal":
        w = analytic_omega(sys, grid)
        if cfg.preconditioner == "cpmhss":
            # the analytic bound concerns DNTB; keep CPMHSS admissible
            w = max(w, 1.01 * float(np.max(np.abs(sys.d))) + 1e-12)
    P = _family(cfg, sys, scheme)(w)
    rep = gmres(sys, sys.rhs, P, tol=cfg.tol, maxit=cfg.maxit)
    return rep.iterations, rep.converged, rep.final_residual, P.omega, None, None


def run_cell(cfg: ExperimentConfig, alpha: float, M: int, sweep: bool | None = None,
             systems: LevelSystems | None = None) -> CellResult:
    """Solve every field's level system of one (alpha, M) cell."""
    sweep = cfg.omega_sweep is not None if sweep is None else sweep
    pname = "ge" if cfg.solver == "ge" else cfg.preconditioner
    cell = CellResult(cfg.case, alpha, M, pname, CirculantScheme.parse(cfg.circulant).value)
    try:
        if cfg.solver == "ge" and M > GE_LIMIT:
            raise ValueError(f"GE limited to M <= {GE_LIMIT} (out of memory at this size)")
        ls = systems or level_systems(cfg.case, alpha, M, cfg)
        t0 = time.perf_counter()
        results = {}
        for name, sys in ls.systems.items():
            results[name] = _solve_field(cfg, sys, ls.grid, sweep, ls.complex_systems[name][1])
        cell.cpu_seconds = time.perf_counter() - t0
    except (ValueError, ArithmeticError, ConvergenceError) as exc:
        cell.error = f"{type(exc).__name__}: {exc}"
        log.error("cell alpha=%s M=%s failed: %s", alpha, M, cell.error)
        return cell
    its = [r[0] for r in results.values()]
    cell.iterations = int(sum(its))
    cell.converged = all(r[1] for r in results.values())
    cell.final_relative_residual = float(max(r[2] for r in results.values()))
    u = results["u"]
    cell.iterations_u, cell.omega_used, cell.omega_range_u = u[0], u[3], u[4]
    if "v" in results:
        v = results["v"]
        cell.iterations_v, cell.omega_used_v, cell.omega_range_v = v[0], v[3], v[4]
    cell.sweeps = {name: r[5] for name, r in results.items() if r[5] is not None}
    if not cell.converged:
        cell.error = "not converged"
    return cell


def _write_csv(path: Path, rows, columns):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    return path


def run_experiment(cfg: ExperimentConfig, sweep: bool | None = None, filename: str = "cells.csv"):
    """Run all (alpha, M) cells and write one CSV row per cell.

    Cells run in a thread pool of ``cfg.workers``; rows are written in cell
    order by a single writer once each cell finishes.

    :returns: ``(exit_code, cells)``; the exit code is 2 if any cell failed.
    """
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cells = [(a, m) for a in cfg.alpha for m in cfg.M]
    path = out / filename
    lock = threading.Lock()
    results: list = [None] * len(cells)

    def work(i):
        res = run_cell(cfg, *cells[i], sweep=sweep)
        with lock:
            results[i] = res
            log.info("cell alpha=%s M=%s: IT=%s converged=%s", res.alpha, res.M, res.iterations, res.converged)
        return res

    if cfg.workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            list(pool.map(work, range(len(cells))))
    else:
        for i in range(len(cells)):
            work(i)
    _write_csv(path, [r.row() for r in results], CSV_COLUMNS)
    if sweep or (sweep is None and cfg.omega_sweep is not None):
        pts = []
        for r in results:
            for name, sw in r.sweeps.items():
                for w, it in zip(sw.omegas, sw.iterations):
                    pts.append({"case": r.case, "alpha": r.alpha, "M": r.M, "preconditioner": r.preconditioner,
                                "scheme": r.scheme, "field": name, "omega": f"{w:.2f}", "iterations": int(it)})
        _write_csv(out / "sweep_points.csv", pts,
                   ["case", "alpha", "M", "preconditioner", "scheme", "field", "omega", "iterations"])
    failed = any((not r.converged) or r.error for r in results)
    return (EXIT_SOLVER if failed else EXIT_OK), results


# ---------------------------------------------------------------------------
# Snapshots


def dump_solution(result: RunResult, path, reference: RunResult | None = None, grid: GridSpec | None = None):
    """Write one CSV per snapshot with columns ``x, t, abs_u, re_u, im_u`` (and ``v`` columns).

    Boundary points are included with zero values. When ``reference`` holds a
    run with matching snapshots, ``error_XXXXX.csv`` files with
    ``|w - w_ref|`` and an ``error_summary.csv`` are written too.

    :returns: list of written paths (empty, with a warning, if there are no snapshots).
    """
    path = Path(path)
    if not result.snapshots:
        log.warning("run has no snapshots; nothing written")
        return []
    path.mkdir(parents=True, exist_ok=True)
    grid = grid or result.state.grid
    x = np.concatenate([[grid.a], grid.x, [grid.b]])
    pad = lambda w: np.concatenate([[0.0], w, [0.0]])
    files = []
    ref = {s[0]: s for s in reference.snapshots} if reference is not None else {}
    summary = []
    for level, t, u, v in result.snapshots:
        cols = {"x": x, "t": np.full(len(x), t)}
        for name, w in (("u", u), ("v", v)):
            if w is None:
                continue
            w = pad(w)
            cols[f"abs_{name}"], cols[f"re_{name}"], cols[f"im_{name}"] = np.abs(w), w.real, w.imag
        p = path / f"snapshot_{level:05d}.csv"
        _write_columns(p, cols)
        files.append(p)
        if level in ref:
            _, _, ur, vr = ref[level]
            ecols = {"x": x, "t": cols["t"], "err_u": np.abs(pad(u) - pad(ur))}
            if v is not None and vr is not None:
                ecols["err_v"] = np.abs(pad(v) - pad(vr))
            p = path / f"error_{level:05d}.csv"
            _write_columns(p, ecols)
            files.append(p)
            summary.append({"level": level, "t": f"{t:.4f}",
                            "max_err_u": repr(float(ecols["err_u"].max())),
                            "max_err_v": repr(float(ecols["err_v"].max())) if "err_v" in ecols else ""})
    if summary:
        files.append(_write_csv(path / "error_summary.csv", summary, ["level", "t", "max_err_u", "max_err_v"]))
    return files


def _write_columns(path: Path, cols: dict):
    names = list(cols)
    data = np.column_stack([cols[n] for n in names])
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        w.writerows([[repr(float(v)) for v in row] for row in data])


def run_with_snapshots(cfg: ExperimentConfig, alpha: float, M: int) -> tuple[RunResult, RunResult | None]:
    """Full run to ``t_end`` with the configured solver, plus a GE reference when requested."""
    grid, params = cfg.grid(alpha, M), cfg.params(alpha)
    scfg = SolverConfig(method=cfg.solver, preconditioner=cfg.preconditioner, scheme=cfg.circulant,
                        omega=cfg.omega if isinstance(cfg.omega, float) else None, tol=cfg.tol, maxit=cfg.maxit)
    res = run(cfg.case, grid, params, t_end=cfg.t_end, config=scfg, snapshot_every=cfg.snapshot_every)
    ref = None
    if cfg.reference:
        ref = run(cfg.case, grid, params, t_end=cfg.t_end, config=SolverConfig(method="ge"),
                  snapshot_every=cfg.snapshot_every)
    return res, ref


# ---------------------------------------------------------------------------
# Reference tables


def reference_data() -> dict:
    """Published reference iteration counts and omega ranges shipped with the package."""
    text = resources.files("fracnls").joinpath("data/reference_iterations.json").read_text(encoding="utf-8")
    return json.loads(text)


def _overlap(a, b) -> bool:
    if a is None or b is None or any(map(math.isnan, a)):
        return False
    return max(a[0], b[0]) <= min(a[1], b[1]) + 1e-9


def _fmt_range(r):
    return "" if r is None or any(map(math.isnan, r)) else f"[{r[0]:.2f},{r[1]:.2f}]"


def reproduce_scheme_table(cfg: ExperimentConfig, tolerance: int = 1):
    """Iteration counts per circulant scheme on the DNLS alpha=1.5, M=6400 level-2 system."""
    ref = reference_data()["circulant_schemes"]
    st = ref["setting"]
    base = replace(cfg, case=st["case"], preconditioner="dncb")
    ls = level_systems(st["case"], st["alpha"], st["M"], base)
    rows = []
    for r in ref["rows"]:
        c = run_cell(replace(base, circulant=r["scheme"]), st["alpha"], st["M"], sweep=True, systems=ls)
        obs = c.iterations if c.converged else None
        rows.append({"scheme": r["scheme"], "expected_iterations": r["iterations"],
                     "observed_iterations": "" if obs is None else obs,
                     "match": obs is not None and abs(obs - r["iterations"]) <= tolerance,
                     "expected_omega_range": _fmt_range(r["omega_range"]),
                     "observed_omega_range": _fmt_range(c.omega_range_u),
                     "omega_overlap": _overlap(c.omega_range_u, r["omega_range"])})
    return rows


def reproduce_cnls_tables(cfg: ExperimentConfig, desk: bool = True, tolerance: int = 2,
                          alphas=None, Ms=None, methods=("none", "dncb", "cpmhss")):
    """Combined level-2 iteration counts and per-field omega ranges for the CNLS cells.

    :returns: ``(iteration_rows, omega_rows)``.
    """
    ref = reference_data()
    expected = {(e["alpha"], e["M"], e["preconditioner"]): e["iterations"] for e in ref["cnls_iterations"]}
    eranges = {(e["alpha"], e["M"], e["preconditioner"], e["field"]): e["omega_range"]
               for e in ref["cnls_omega_ranges"]}
    alphas = alphas or sorted({k[0] for k in expected})
    Ms = Ms or sorted({k[1] for k in expected if not desk or k[1] <= 6400})
    it_rows, om_rows = [], []
    base = replace(cfg, case="cnls")
    for a in alphas:
        for M in Ms:
            ls = level_systems("cnls", a, M, base)
            for meth in methods:
                c = run_cell(replace(base, preconditioner=meth), a, M, sweep=meth != "none", systems=ls)
                exp = expected.get((a, M, meth))
                obs = c.iterations if c.converged else None
                it_rows.append({
                    "alpha": a, "M": M, "method": meth, "expected_iterations": "--" if exp is None else exp,
                    "observed_iterations": "--" if obs is None else obs,
                    "delta": "" if exp is None or obs is None else obs - exp,
                    "match": (exp is None and obs is None) or (exp is not None and obs is not None
                                                               and abs(obs - exp) <= tolerance),
                    "iterations_u": c.iterations_u, "iterations_v": c.iterations_v,
                })
                if meth == "none":
                    continue
                for name, rng in (("u", c.omega_range_u), ("v", c.omega_range_v)):
                    er = eranges.get((a, M, meth, name))
                    om_rows.append({"alpha": a, "M": M, "method": meth, "field": name,
                                    "expected_omega_range": _fmt_range(er), "observed_omega_range": _fmt_range(rng),
                                    "overlap": _overlap(rng, er)})
    return it_rows, om_rows


def reproduce_tables(subset: str, cfg: ExperimentConfig, desk: bool = True) -> list[Path]:
    """Write expected-vs-observed CSVs for ``table1``, ``tables2-6``, ``omega-tables`` or ``all``."""
    out = Path(cfg.out)
    files = []
    header = "# reference values: published level-2 iteration counts (GMRES tol 1e-6, tau 0.01)"
    if subset in ("table1", "all"):
        rows = reproduce_scheme_table(cfg)
        files.append(_write_csv(out / "circulant_schemes.csv", rows, list(rows[0])))
    if subset in ("tables2-6", "omega-tables", "all"):
        methods = ("none", "dncb", "cpmhss") if subset != "omega-tables" else ("dncb", "cpmhss")
        it_rows, om_rows = reproduce_cnls_tables(cfg, desk=desk, methods=methods)
        if subset != "omega-tables":
            files.append(_write_csv(out / "cnls_iterations.csv", it_rows, list(it_rows[0])))
        files.append(_write_csv(out / "cnls_omega_ranges.csv", om_rows, list(om_rows[0])))
    for f in files:
        f.write_text(header + "\n" + f.read_text(encoding="utf-8"), encoding="utf-8")
    return files


# ---------------------------------------------------------------------------
# Spectra


def dump_spectra(cfg: ExperimentConfig, alpha: float, M: int, omega: float) -> list[Path]:
    """Eigenvalues of ``R`` and the four preconditioned matrices for the level-2 ``u`` system."""
    if M > SPECTRA_LIMIT:
        raise ConfigError(f"dense spectra are limited to M <= {SPECTRA_LIMIT}", "m")
    ls = level_systems(cfg.case, alpha, M, cfg)
    sys = ls.systems["u"]
    reports = []
    for label in MATRIX_LABELS:
        w = omega
        if label in ("PMHSS", "CPMHSS"):
            w = max(omega, float(np.max(np.abs(sys.d))) * 1.01 + 1e-12)
        reports.append(preconditioned_spectrum(label, sys, None if label == "R" else w,
                                               scheme=CirculantScheme.parse(cfg.circulant)))
    out = Path(cfg.out)
    files = [write_eigenvalues_csv(reports, out / f"eigenvalues_a{alpha}_M{M}.csv")]
    summary = [{"label": r.matrix_label, "min_re": r.min_real, "max_re": r.max_real,
                "max_abs_im": r.max_abs_imag, "disk_radius": "" if r.disk_radius is None else r.disk_radius,
                "fraction_in_disk": "" if r.fraction_in_disk is None else r.fraction_in_disk} for r in reports]
    files.append(_write_csv(out / f"spectra_summary_a{alpha}_M{M}.csv", summary, list(summary[0])))
    audit = bound_audit(ls.grid)
    arow = [{"check": k, "passed": v} for k, v in audit.checks.items()] or [{"check": "degenerate", "passed": ""}]
    files.append(_write_csv(out / f"bound_audit_a{alpha}_M{M}.csv", arow, ["check", "passed"]))
    return files


# ---------------------------------------------------------------------------
# Command line


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value configuration file (flags override it)")
    p.add_argument("--case", choices=["dnls", "cnls"])
    p.add_argument("--alpha", help="fractional order(s), comma separated")
    p.add_argument("--m", dest="M", help="number(s) of inner grid points, comma separated")
    p.add_argument("--tau", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--solver", choices=["gmres", "ge"])
    p.add_argument("--precond", dest="preconditioner", choices=["none", "dncb", "cpmhss"])
    p.add_argument("--circulant", help="strang, tchan, rchan, modified_dirichlet, von_hann, hamming, superoptimal")
    p.add_argument("--omega", help="number or 'optimal'")
    p.add_argument("--omega-sweep", dest="omega_sweep", help="start:stop:step, e.g. 0.01:3:0.01")
    p.add_argument("--tol", type=float)
    p.add_argument("--maxit", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracnls", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("run", help="level-2 solves, one CSV row per (alpha, M) cell")
    _common(p)
    p = sub.add_parser("sweep", help="omega sweep per cell")
    _common(p)
    p = sub.add_parser("tables", help="reproduce the reference iteration tables")
    _common(p)
    p.add_argument("--table", default="all", choices=["table1", "tables2-6", "omega-tables", "all"])
    p.add_argument("--desk", action="store_true", help="limit to M <= 6400")
    p = sub.add_parser("spectra", help="dense eigenvalue dumps")
    _common(p)
    p = sub.add_parser("dump", help="full run with solution snapshots")
    _common(p)
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    p.add_argument("--reference", action="store_true", default=None, help="also run GE and write error surfaces")
    return parser


_FLAG_KEYS = [f.name for f in fields(ExperimentConfig)]


def config_from_args(args) -> ExperimentConfig:
    file_values = load_config(args.config) if getattr(args, "config", None) else {}
    flags = {}
    for key in _FLAG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            flags[key] = _coerce(key, val) if isinstance(val, str) else val
    if args.command == "sweep" and "omega_sweep" not in flags and "omega_sweep" not in file_values:
        flags["omega_sweep"] = DEFAULT_SWEEP
    return build_config(file_values, **flags)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command in ("run", "sweep"):
            code, cells = run_experiment(cfg, sweep=args.command == "sweep" or None)
            for c in cells:
                print(f"{c.case} alpha={c.alpha} M={c.M} {c.preconditioner}: IT={c.iterations} "
                      f"converged={c.converged} {c.error}".rstrip())
            return code
        if args.command == "tables":
            files = reproduce_tables(args.table, cfg, desk=args.desk)
            for f in files:
                print(f)
            return EXIT_OK
        if args.command == "spectra":
            omega = cfg.omega if isinstance(cfg.omega, float) else 0.3
            for a in cfg.alpha:
                for m in cfg.M:
                    for f in dump_spectra(cfg, a, m, omega):
                        print(f)
            return EXIT_OK
        if args.command == "dump":
            code = EXIT_OK
            for a in cfg.alpha:
                for m in cfg.M:
                    try:
                        res, ref = run_with_snapshots(cfg, a, m)
                    except ConvergenceError as exc:
                        print(f"alpha={a} M={m}: {exc}", file=sys.stderr)
                        code = EXIT_SOLVER
                        continue
                    files = dump_solution(res, Path(cfg.out) / f"{cfg.case}_a{a}_M{m}", ref)
                    print(f"alpha={a} M={m}: {len(files)} files")
            return code
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
