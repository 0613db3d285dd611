import csv
import logging

import numpy as np
import pytest

from fracnls import cli
from fracnls.cli import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    build_config,
    dump_solution,
    load_config,
    main,
    reference_data,
    run_cell,
    run_experiment,
)
from fracnls.licd_stepper import RunResult, initial_state
from fracnls.operators import GridSpec


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_config_file_parsed_and_flags_override(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("# demo\ncase = dnls\nalpha = 1.1, 1.5\nm = 400 800\nomega = optimal\n"
                 "omega-sweep = 0.1:1:0.1\nprecond = cpmhss\ntol = 1e-8  # tight\n", encoding="utf-8")
    vals = load_config(p)
    assert vals["alpha"] == (1.1, 1.5) and vals["M"] == (400, 800)
    assert vals["omega"] == "optimal" and vals["omega_sweep"] == (0.1, 1.0, 0.1)
    cfg = build_config(vals, tol=1e-5, M=(100,))
    assert cfg.tol == 1e-5 and cfg.M == (100,) and cfg.preconditioner == "cpmhss"
    assert len(cfg.omega_grid()) == 10


@pytest.mark.parametrize("text,key", [("colour = red\n", "colour"), ("alpha = x\n", "alpha"),
                                      ("maxit = 1.5\n", "maxit"), ("omega = fast\n", "omega")])
def test_config_errors_name_the_key(tmp_path, text, key):
    p = tmp_path / "bad.cfg"
    p.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert exc.value.key == key


@pytest.mark.parametrize("kw", [dict(case="gpe"), dict(alpha=(2.5,)), dict(M=(4,)), dict(tau=0.0),
                                dict(rho=1.0), dict(preconditioner="ilu"), dict(circulant="fancy"),
                                dict(omega=-1.0), dict(omega_sweep=(1.0, 0.5, 0.1)), dict(b=-30.0)])
def test_invalid_configs_rejected(kw):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw).validate()


def test_run_cell_and_determinism():
    cfg = ExperimentConfig(case="cnls", M=(200,), omega=0.15)
    a, b = run_cell(cfg, 1.5, 200), run_cell(cfg, 1.5, 200)
    assert a.converged and a.iterations == b.iterations == a.iterations_u + a.iterations_v
    assert a.omega_used == 0.15 == a.omega_used_v


def test_run_experiment_csv_schema(tmp_path):
    cfg = ExperimentConfig(case="dnls", alpha=(1.3, 1.7), M=(100, 200), out=str(tmp_path), workers=2)
    code, cells = run_experiment(cfg)
    assert code == 0
    rows = read_rows(tmp_path / "cells.csv")
    assert list(rows[0]) == CSV_COLUMNS
    assert [(r["alpha"], r["M"]) for r in rows] == [("1.3", "100"), ("1.3", "200"), ("1.7", "100"), ("1.7", "200")]
    assert all(r["converged"] == "True" and int(r["iterations"]) > 0 for r in rows)


def test_empty_matrix_writes_header_only(tmp_path):
    code, cells = run_experiment(ExperimentConfig(alpha=(), out=str(tmp_path)))
    assert code == 0 and cells == []
    assert (tmp_path / "cells.csv").read_text().strip() == ",".join(CSV_COLUMNS)


def test_sweep_writes_points(tmp_path):
    cfg = ExperimentConfig(case="dnls", M=(128,), omega_sweep=(0.05, 0.5, 0.05), out=str(tmp_path))
    code, cells = run_experiment(cfg)
    assert code == 0
    pts = read_rows(tmp_path / "sweep_points.csv")
    assert len(pts) == 10 and {p["field"] for p in pts} == {"u"}
    lo, hi = cells[0].omega_range_u
    assert 0.05 <= lo <= cells[0].omega_used <= hi <= 0.5


def test_ge_and_optimal_omega_cells():
    ge = run_cell(ExperimentConfig(case="cnls", solver="ge"), 1.5, 100)
    assert ge.converged and ge.iterations == 0 and ge.final_relative_residual < 1e-12
    opt = run_cell(ExperimentConfig(case="dnls", omega="optimal"), 2.0, 100)
    assert opt.converged and opt.omega_used > 0
    cp = run_cell(ExperimentConfig(case="dnls", omega="optimal", preconditioner="cpmhss"), 1.5, 100)
    assert cp.converged


def test_failed_cell_gives_exit_code_two(tmp_path):
    cfg = ExperimentConfig(case="dnls", M=(200,), preconditioner="none", maxit=2, tol=1e-12, out=str(tmp_path))
    code, cells = run_experiment(cfg)
    assert code == 2 and not cells[0].converged
    assert read_rows(tmp_path / "cells.csv")[0]["error"] == "not converged"


def test_main_exit_codes(tmp_path, capsys):
    assert main(["run", "--case", "dnls", "--alpha", "1.5", "--m", "100", "--out", str(tmp_path)]) == 0
    assert main(["run", "--alpha", "3"]) == 1
    assert main(["run", "--nonsense"]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["run", "--case", "dnls", "--m", "100", "--precond", "none", "--maxit", "1", "--tol", "1e-12",
                 "--out", str(tmp_path)]) == 2
    assert main(["spectra", "--m", "4096"]) == 1


def test_main_spectra_and_dump(tmp_path):
    assert main(["spectra", "--case", "dnls", "--alpha", "1.5", "--m", "16", "--omega", "0.3",
                 "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "spectra_summary_a1.5_M16.csv")
    assert [r["label"] for r in rows] == ["R", "DNTB", "DNCB", "PMHSS", "CPMHSS"]
    assert rows[1]["fraction_in_disk"] == "1.0"
    assert main(["dump", "--case", "cnls", "--alpha", "1.5", "--m", "64", "--t-end", "0.1",
                 "--snapshot-every", "5", "--reference", "--out", str(tmp_path)]) == 0
    d = tmp_path / "cnls_a1.5_M64"
    snap = read_rows(d / "snapshot_00005.csv")
    assert list(snap[0]) == ["x", "t", "abs_u", "re_u", "im_u", "abs_v", "re_v", "im_v"]
    assert len(snap) == 66 and float(snap[0]["abs_u"]) == 0.0 and float(snap[-1]["x"]) == 20.0
    summary = read_rows(d / "error_summary.csv")
    assert all(float(r["max_err_u"]) < 1e-5 for r in summary)


def test_dump_without_snapshots_warns(tmp_path, caplog):
    g = GridSpec(-20, 20, 32, 0.01, 1.0, 1.5)
    res = RunResult(initial_state("dnls", g), [], [])
    with caplog.at_level(logging.WARNING, logger="fracnls"):
        assert dump_solution(res, tmp_path) == []
    assert "no snapshots" in caplog.text


def test_reference_data_shipped():
    ref = reference_data()
    rows = {r["scheme"]: r["iterations"] for r in ref["circulant_schemes"]["rows"]}
    assert rows["strang"] == 9 and rows["superoptimal"] == 32
    entries = {(e["alpha"], e["M"], e["preconditioner"]): e["iterations"] for e in ref["cnls_iterations"]}
    assert entries[(1.1, 3200, "dncb")] == 19 and entries[(1.5, 6400, "cpmhss")] == 32
    assert entries[(1.1, 3200, "none")] == 37


def test_reproduce_cnls_tables_small(monkeypatch):
    it_rows, om_rows = cli.reproduce_cnls_tables(ExperimentConfig(omega_sweep=(0.05, 0.5, 0.05)),
                                                 alphas=[1.1], Ms=[3200], methods=("dncb",))
    assert len(it_rows) == 1 and it_rows[0]["expected_iterations"] == 19
    assert len(om_rows) == 2 and {r["field"] for r in om_rows} == {"u", "v"}
