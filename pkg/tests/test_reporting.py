import csv
import json

import numpy as np
import numpy.testing as npt
import pytest

from gpefem.mesh import build_interval_mesh, build_rect_mesh
from gpefem.observables import ErrorTriple, ObservableSample
from gpefem.reporting import (
    CSV_COLUMNS,
    RunReport,
    energy_drift,
    mass_drift,
    plot_blowup_times,
    plot_convergence,
    plot_density,
    plot_error_history,
    plot_observables,
    write_config_echo,
    write_observables_csv,
    write_summary_csv,
)
from gpefem.steppers import run_evolution


def make_report(with_errors=True):
    samples = [
        ObservableSample(t=0.0, mass=4.0, energy=-1.0 / 3.0,
                         pseudo_energy=-1.0 / 3.0,
                         errors=ErrorTriple(0.0, 0.0, 0.0) if with_errors else None,
                         wall_s=0.0),
        ObservableSample(t=0.5, mass=4.0 + 1e-12, energy=-1.0 / 3.0 + 2e-9,
                         pseudo_energy=None,
                         errors=ErrorTriple(1e-3, 5e-3, 2e-3) if with_errors else None,
                         wall_s=0.8),
    ]
    return RunReport(problem="single_soliton", scheme="re", h=0.05, tau=0.5,
                     n_steps=1, samples=samples, completed_steps=1, wall_s=0.8,
                     final_errors=samples[-1].errors)


def test_csv_columns_fixed():
    assert CSV_COLUMNS == (
        "t", "mass", "energy", "pseudo_energy",
        "err_l2", "err_h1", "err_l1rho", "wall_s",
    )


def test_observables_csv_roundtrip(tmp_path):
    report = make_report()
    path = write_observables_csv(report, tmp_path / "obs.csv")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0].keys()) == list(CSV_COLUMNS)
    assert len(rows) == 2
    assert float(rows[0]["t"]) == 0.0
    assert float(rows[1]["mass"]) == pytest.approx(4.0, rel=1e-12)
    assert float(rows[1]["err_h1"]) == pytest.approx(5e-3)
    assert rows[0]["pseudo_energy"] != ""
    assert rows[1]["pseudo_energy"] == ""


def test_observables_csv_blank_error_fields(tmp_path):
    report = make_report(with_errors=False)
    path = write_observables_csv(report, tmp_path / "obs.csv")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert all(r["err_l2"] == "" and r["err_l1rho"] == "" for r in rows)


def test_summary_csv(tmp_path):
    good = make_report()
    blown = make_report(with_errors=False)
    blown.blowup_time = 0.25
    blown.final_errors = None
    path = write_summary_csv([good, blown], tmp_path / "summary.csv")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert rows[0]["problem"] == "single_soliton"
    assert rows[0]["blowup_time"] == ""
    assert float(rows[1]["blowup_time"]) == 0.25
    assert rows[1]["err_l2"] == ""
    assert float(rows[0]["mass_drift"]) == pytest.approx(2.5e-13, rel=1e-2)


def test_drift_helpers():
    report = make_report()
    npt.assert_allclose(mass_drift(report), 1e-12 / 4.0, rtol=1e-3)
    npt.assert_allclose(energy_drift(report), 2e-9 / (1.0 / 3.0), rtol=1e-3)
    empty = RunReport(problem="p", scheme="re", h=0.1, tau=0.1, n_steps=0)
    assert mass_drift(empty) == 0.0
    assert energy_drift(empty) == 0.0


def test_config_echo(tmp_path):
    cfg = {"problem": "single_soliton", "tau": 0.25, "nested": {"a": 1}}
    path = write_config_echo(cfg, tmp_path / "echo.json")
    loaded = json.loads(path.read_text())
    assert loaded == cfg


def _assert_png(path):
    assert path.exists()
    assert path.stat().st_size > 500
    assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_figures_render_to_files(tmp_path):
    report = run_evolution("single_soliton", "re", 128, tau=0.125, n_steps=8)
    _assert_png(plot_observables(report, tmp_path / "obs.png"))
    _assert_png(plot_error_history(report, tmp_path / "err.png"))
    taus = {"re": [0.25, 0.125, 0.0625]}
    errs = {"re": [4e-2, 1e-2, 2.5e-3]}
    _assert_png(plot_convergence(taus, errs, tmp_path / "conv.png"))
    _assert_png(plot_blowup_times({"lcn": [0.25, 0.125]},
                                  {"lcn": [0.6, None]}, 2.0,
                                  tmp_path / "blow.png"))


def test_density_figures_1d_and_2d(tmp_path):
    mesh1 = build_interval_mesh(0.0, 1.0, 32)
    u1 = np.sin(np.pi * mesh1.nodes[:, 0]).astype(complex)
    _assert_png(plot_density(mesh1, u1, tmp_path / "d1.png"))
    mesh2 = build_rect_mesh((0.0, 1.0), (0.0, 1.0), 8, 8)
    x, y = mesh2.nodes[:, 0], mesh2.nodes[:, 1]
    u2 = (np.sin(np.pi * x) * np.sin(np.pi * y)).astype(complex)
    _assert_png(plot_density(mesh2, u2, tmp_path / "d2.png"))
