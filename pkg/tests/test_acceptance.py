"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the ``acceptance criteria`` section of the pytest
terminal summary. Reference iteration counts come from the shipped
``reference_iterations.json``; everything else is checked against independent
dense or brute-force oracles.
"""
import math

import numpy as np
import pytest
from scipy.special import gamma

from conftest import ACCEPTANCE, level_system
from fracnls.cli import ExperimentConfig, level_systems, reference_data, reproduce_cnls_tables, run_cell
from fracnls.frac_kernel import compute_coefficients, tail_bounds
from fracnls.licd_stepper import ModelParams, SolverConfig, run
from fracnls.operators import GridSpec, build_toeplitz, circulant_approx, circulant_solve, CirculantScheme
from fracnls.preconditioners import build_cpmhss, build_dncb
from fracnls.spectra import admissible_epsilon, bound_audit, decomposition_check, preconditioned_spectrum
from fracnls.splitting_theory import SpectralIntervals, optimal_omega, sigma_bound

pytestmark = pytest.mark.slow


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


# ---------------------------------------------------------------------------
# Quantitative reproduction


def test_criterion_01_circulant_schemes():
    ref = reference_data()["circulant_schemes"]
    st = ref["setting"]
    cfg = ExperimentConfig(case="dnls", preconditioner="dncb", omega_sweep=(0.01, 3.0, 0.01))
    ls = level_systems("dnls", st["alpha"], st["M"], cfg)
    parts, ok = [], True
    for row in ref["rows"]:
        cell = run_cell(ExperimentConfig(**{**cfg.__dict__, "circulant": row["scheme"]}),
                        st["alpha"], st["M"], sweep=True, systems=ls)
        good = cell.converged and abs(cell.iterations - row["iterations"]) <= 1
        ok &= good
        parts.append(f"{row['scheme']}={cell.iterations}/{row['iterations']}{'' if good else '!'}")
    record(1, ok, "observed/expected IT: " + " ".join(parts))


@pytest.fixture(scope="module")
def cnls_desk():
    cfg = ExperimentConfig(case="cnls", omega_sweep=(0.01, 3.0, 0.01))
    rows, _ = reproduce_cnls_tables(cfg, desk=True, alphas=[1.1, 1.3, 1.5, 1.7, 1.9], Ms=[3200, 6400])
    return rows


def test_criterion_02_cnls_iteration_counts(cnls_desk):
    bad = [f"a={r['alpha']},M={r['M']},{r['method']}:{r['observed_iterations']}/{r['expected_iterations']}"
           for r in cnls_desk if not r["match"]]
    detail = f"{len(cnls_desk) - len(bad)}/{len(cnls_desk)} cells within +-2"
    record(2, not bad, detail + ("; off: " + " ".join(bad) if bad else ""))


def test_criterion_03_iteration_ordering(cnls_desk):
    by = {}
    for r in cnls_desk:
        by.setdefault((r["alpha"], r["M"]), {})[r["method"]] = r["observed_iterations"]
    bad = [f"a={a},M={m}:{v}" for (a, m), v in by.items()
           if not (isinstance(v["none"], int) and v["dncb"] < v["cpmhss"] < v["none"])]
    record(3, not bad, f"DNCB < CPMHSS < GMRES in {len(by) - len(bad)}/{len(by)} cells" + (f"; {bad}" if bad else ""))


def test_criterion_04_mesh_dependence():
    Ms = [800, 1600, 3200, 6400, 12800]
    its = {}
    for a in (1.1, 1.5, 1.9):
        cfg = ExperimentConfig(case="cnls", omega_sweep=(0.01, 3.0, 0.01))
        its[a] = [run_cell(cfg, a, M).iterations for M in Ms]
    monotone = all(all(y >= x - 1 for x, y in zip(v, v[1:])) for v in its.values())
    slope = {a: v[-1] - v[0] for a, v in its.items()}
    increasing = slope[1.1] <= slope[1.5] <= slope[1.9]
    flat = max(its[1.1]) - min(its[1.1]) <= 1
    record(4, monotone and increasing and flat,
           f"IT over M={Ms}: " + "; ".join(f"a={a}: {v}" for a, v in its.items())
           + f" (monotone={monotone}, slope increasing={increasing}, flat at 1.1={flat})")


def test_criterion_05_error_surface():
    errs = {}
    for a in (1.1, 1.5, 1.9):
        g = GridSpec(-20.0, 20.0, 800, 0.01, 1.0, a)
        p = ModelParams(a)
        it = run("dnls", g, p, t_end=2.0, config=SolverConfig(tol=1e-6), snapshot_every=20)
        ge = run("dnls", g, p, t_end=2.0, config=SolverConfig(method="ge"), snapshot_every=20)
        errs[a] = max(np.abs(s[2] - r[2]).max() for s, r in zip(it.snapshots, ge.snapshots))
    record(5, max(errs.values()) <= 5e-4, "max |u_DNCB - u_GE|: " + ", ".join(f"a={a}: {e:.2e}" for a, e in errs.items()))


# ---------------------------------------------------------------------------
# Theory verification


def dntb_iteration_matrix(sys, omega):
    M = sys.M
    eye = np.eye(M)
    Td = sys.T.to_dense()
    H = np.block([[Td, -eye], [eye, Td]])
    b = -np.concatenate([sys.d, sys.d])
    I2 = np.eye(2 * M)
    return np.linalg.solve(omega * I2 + H, ((omega - b) / (omega + b))[:, None] * (omega * I2 - H))


def sigma_hat_grid(iv, omegas):
    """[DERIVED] interval bound evaluated with both mu endpoints, vectorized."""
    lam = np.array([iv.lambda_min, iv.lambda_max])[:, None]
    mu = np.array([iv.mu_min, iv.mu_max])[:, None]
    s1 = np.abs((omegas + lam) / (omegas - lam)).max(axis=0)
    s2 = np.sqrt(((omegas - mu) ** 2 + 1) / ((omegas + mu) ** 2 + 1)).max(axis=0)
    return s1 * s2


def test_criterion_06_dntb_contraction():
    worst, count = 0.0, 0
    ok = True
    for M in (16, 32, 64):
        for a in (1.3, 1.7):
            _, sys, d, _ = level_system(a, M)
            t = np.linalg.eigvalsh(sys.T.to_dense())
            iv = SpectralIntervals.from_spectra(d, t)
            for w in np.geomspace(1e-3, 10.0, 20):
                rho = np.abs(np.linalg.eigvals(dntb_iteration_matrix(sys, w))).max()
                sig = sigma_bound(w, d, t)
                shat = float(sigma_hat_grid(iv, np.array([w]))[0])
                ok &= rho < 1 and rho <= sig * (1 + 1e-12) and sig <= shat * (1 + 1e-12)
                worst = max(worst, rho / sig)
                count += 1
    record(6, ok, f"{count} cases; max rho/sigma = {worst:.6f}")


def test_criterion_07_optimal_parameter():
    r = np.random.default_rng(7)
    worst = -np.inf
    ok = True
    for _ in range(50):
        lmin = -r.uniform(0, 1)
        lmax = lmin * r.uniform(0, 1)
        mmin = r.uniform(1e-3, 3)
        mmax = mmin * r.uniform(1, 20)
        iv = SpectralIntervals(lmin, lmax, mmin, mmax)
        res = optimal_omega(iv)
        hi = 2 * max(math.sqrt(mmin ** 2 + 1), math.sqrt(abs(mmin * mmax - 1)), math.sqrt(lmin * lmax)) + 1
        vals = sigma_hat_grid(iv, np.arange(1e-5, hi, 1e-5))
        rel = (res.sigma_hat_at_opt - vals.min()) / vals.min()
        ok &= rel <= 1e-8
        worst = max(worst, rel)
    record(7, ok, f"50 instances; max (opt - grid)/grid = {worst:.2e}")


def test_criterion_08_preconditioned_disk():
    fracs = []
    for M in (16, 32, 64):
        for a in (1.3, 1.7):
            _, sys, _, _ = level_system(a, M)
            for w in (0.01, 0.1, 1.0, 3.0):
                fracs.append(preconditioned_spectrum("DNTB", sys, w).fraction_in_disk)
    record(8, min(fracs) == 1.0, f"{len(fracs)} cases; min fraction in sigma-disk = {min(fracs)}")


def test_criterion_09_eigenvalue_bounds():
    fails, n = [], 0
    for a in np.round(np.arange(1.1, 1.91, 0.1), 1):
        for M in (8, 16, 32, 64, 128, 256):
            rep = bound_audit(GridSpec(-20.0, 20.0, M, 0.01, 1.0, float(a)))
            n += 1
            if not rep.checks or not rep.passed:
                fails.append((a, M, {k: v for k, v in rep.checks.items() if not v}))
    record(9, not fails, f"{n - len(fails)}/{n} (alpha, M) pairs inside all bounds" + (f"; {fails}" if fails else ""))


def test_criterion_10_decomposition():
    worst, ok, n = 0.0, True, 0
    for M in (16, 32, 64):
        grid, sys, _, _ = level_system(1.5, M)
        lo, hi = admissible_epsilon(grid)
        for eps in (hi, math.sqrt(lo * hi), 1.01 * lo):
            rep = decomposition_check(sys, grid, 0.1, eps)
            ok &= rep.identity_error <= 1e-10 and rep.rank_ok and rep.norms_ok
            worst = max(worst, rep.identity_error)
            n += 1
    record(10, ok, f"{n} cases; max identity error {worst:.1e}; rank and norm bounds hold={ok}")


def test_criterion_11_operator_equivalence():
    r = np.random.default_rng(11)
    worst = {"toeplitz": 0.0, "circulant": 0.0, "dncb": 0.0, "cpmhss": 0.0}
    for _ in range(100):
        M = int(r.integers(8, 513))
        a = float(r.uniform(1.05, 2.0))
        T = build_toeplitz(GridSpec(-20.0, 20.0, M, 0.01, 1.0, a))
        A = T.to_dense()
        x = r.standard_normal(M)
        worst["toeplitz"] = max(worst["toeplitz"], np.linalg.norm(T.matvec(x) - A @ x) / np.linalg.norm(A @ x))
        C = circulant_approx(T, list(CirculantScheme)[int(r.integers(len(CirculantScheme)))])
        Cd = C.to_dense()
        s = float(r.uniform(0.05, 2))
        y = circulant_solve(C, s, x)
        worst["circulant"] = max(worst["circulant"], np.linalg.norm((s * np.eye(M) + Cd) @ y - x) / np.linalg.norm(x))
        d = -r.uniform(0, 0.05, M)
        rb = r.standard_normal(2 * M)
        eye, Z = np.eye(M), np.zeros((M, M))
        W = s * eye + Cd
        Fd = np.diag(np.tile(s - d, 2)) @ np.block([[W, -eye], [eye, W]])
        z = build_dncb(d, C, s).apply(rb)
        worst["dncb"] = max(worst["dncb"], np.linalg.norm(Fd @ z - rb) / np.linalg.norm(rb))
        wc = s + 0.05
        Wc = wc * eye + Cd
        dh = (wc + 1 + d) / (wc + d)
        Fc = 0.5 * np.block([[eye, -eye], [eye, eye]]) @ np.block([[Wc, Z], [Z, Wc]]) @ np.diag(np.tile(dh, 2))
        z = build_cpmhss(d, C, wc).apply(rb)
        worst["cpmhss"] = max(worst["cpmhss"], np.linalg.norm(Fc @ z - rb) / np.linalg.norm(rb))
    record(11, max(worst.values()) <= 1e-10, "100 trials each; max relative mismatch " +
           ", ".join(f"{k}={v:.1e}" for k, v in worst.items()))


def test_criterion_12_coefficient_identities():
    ok = True
    notes = []
    for a in (1.1, 1.3, 1.5, 1.7, 1.9):
        c = compute_coefficients(a, 2 ** 10).coeffs
        resid = c[0] - 2 * np.abs(c[1:]).sum()
        ok &= c[0] >= 0 and np.all(c[1:] <= 0) and 0 < resid < 2 * tail_bounds(a, 2 ** 10 - 1)[1]
    c2 = compute_coefficients(2.0, 16).coeffs
    ok &= np.allclose(c2, np.r_[2.0, -1.0, np.zeros(14)], atol=1e-15)
    N = 10 ** 6
    for a in (1.2, 1.5, 1.8):
        ca = np.abs(compute_coefficients(a, N + 1).coeffs)
        rem = gamma(a + 1) * math.sin(math.pi * a / 2) / math.pi * N ** (-a) / a
        for k0 in (3, 10, 100, 1000):
            s = ca[k0 + 1:].sum()
            lo, hi = tail_bounds(a, k0)
            good = lo < s + rem and s < hi
            ok &= good
            if not good:
                notes.append((a, k0, lo, s, hi))
    record(12, ok, "signs, sum, alpha=2 stencil and tail sandwich (10^6 terms)" + (f"; {notes}" if notes else ""))


def test_criterion_13_conservation():
    g = GridSpec(-20.0, 20.0, 400, 0.01, 1.0, 1.5)
    p = ModelParams(1.5, coupled=True)

    def drift(cfg):
        res = run("cnls", g, p, n_levels=11, config=cfg)
        m = np.array([r.discrete_mass for r in res.reports])
        return np.abs(m - m[0]).max() / m[0]

    ge = drift(SolverConfig(method="ge"))
    d6 = drift(SolverConfig(tol=1e-6))
    d8 = drift(SolverConfig(tol=1e-8))
    record(13, ge < 1e-9 and d8 <= d6 / 10,
           f"GE drift {ge:.1e}; GMRES drift tol 1e-6: {d6:.1e}, tol 1e-8: {d8:.1e} (ratio {d6 / max(d8, 1e-300):.0f})")
