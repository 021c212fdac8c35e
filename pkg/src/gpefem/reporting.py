"""Run reports, delimited observable traces, and figure rendering.

A RunReport is the single artifact produced by an evolution run: the
sampled observables, final errors, timing, and any blow-up event.  The
writers in this module turn reports into CSV files and matplotlib figures
rendered to disk; nothing here opens an interactive window.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .observables import ErrorTriple, ObservableSample

CSV_COLUMNS = ("t", "mass", "energy", "pseudo_energy", "err_l2", "err_h1", "err_l1rho", "wall_s")


@dataclass
class RunReport:
    problem: str
    scheme: str
    h: float
    tau: float
    n_steps: int
    samples: list[ObservableSample] = field(default_factory=list)
    final_errors: ErrorTriple | None = None
    wall_s: float = 0.0
    completed_steps: int = 0
    blowup_time: float | None = None
    newton_iterations: int = 0
    newton_max: int = 0
    mesh_fingerprint: str = ""
    final_state: np.ndarray | None = None
    config: dict = field(default_factory=dict)

    @property
    def blew_up(self) -> bool:
        return self.blowup_time is not None

    def observable_rows(self):
        rows = []
        for s in self.samples:
            err = s.errors
            rows.append(
                {
                    "t": s.t,
                    "mass": s.mass,
                    "energy": s.energy,
                    "pseudo_energy": "" if s.pseudo_energy is None else s.pseudo_energy,
                    "err_l2": "" if err is None else err.l2,
                    "err_h1": "" if err is None else err.h1,
                    "err_l1rho": "" if err is None else err.l1_density,
                    "wall_s": s.wall_s,
                }
            )
        return rows


def write_observables_csv(report: RunReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(CSV_COLUMNS))
        writer.writeheader()
        writer.writerows(report.observable_rows())
    return path


def write_summary_csv(reports: list[RunReport], path) -> Path:
    """One row per run: identifiers, final errors, drifts, timing."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = (
        "problem",
        "scheme",
        "h",
        "tau",
        "n_steps",
        "completed_steps",
        "mass_drift",
        "energy_drift",
        "err_l2",
        "err_h1",
        "err_l1rho",
        "blowup_time",
        "wall_s",
    )
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(cols))
        writer.writeheader()
        for r in reports:
            err = r.final_errors
            writer.writerow(
                {
                    "problem": r.problem,
                    "scheme": r.scheme,
                    "h": r.h,
                    "tau": r.tau,
                    "n_steps": r.n_steps,
                    "completed_steps": r.completed_steps,
                    "mass_drift": mass_drift(r),
                    "energy_drift": energy_drift(r),
                    "err_l2": "" if err is None else err.l2,
                    "err_h1": "" if err is None else err.h1,
                    "err_l1rho": "" if err is None else err.l1_density,
                    "blowup_time": "" if r.blowup_time is None else r.blowup_time,
                    "wall_s": r.wall_s,
                }
            )
    return path


def write_config_echo(config: dict, path) -> Path:
    """Persist the fully resolved run configuration next to the outputs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


def mass_drift(report: RunReport) -> float:
    vals = [s.mass for s in report.samples if np.isfinite(s.mass)]
    if len(vals) < 2 or vals[0] == 0.0:
        return 0.0
    return float(max(abs(v - vals[0]) for v in vals) / abs(vals[0]))


def energy_drift(report: RunReport) -> float:
    vals = [s.energy for s in report.samples if np.isfinite(s.energy)]
    if len(vals) < 2 or vals[0] == 0.0:
        return 0.0
    return float(max(abs(v - vals[0]) for v in vals) / abs(vals[0]))


# ----------------------------------------------------------------- figures

def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def plot_observables(report: RunReport, path) -> Path:
    """Mass and energy drift traces over time, one panel each."""
    plt = _pyplot()
    t = np.array([s.t for s in report.samples])
    m = np.array([s.mass for s in report.samples])
    e = np.array([s.energy for s in report.samples])
    fig, axes = plt.subplots(2, 1, figsize=(6.0, 6.0), sharex=True)
    axes[0].plot(t, m - m[0], lw=1.0)
    axes[0].set_ylabel("mass drift")
    axes[1].plot(t, e - e[0], lw=1.0, label="energy")
    pe = [s.pseudo_energy for s in report.samples]
    if all(v is not None for v in pe):
        pe = np.array(pe, dtype=float)
        axes[1].plot(t, pe - pe[0], lw=1.0, ls="--", label="pseudo energy")
        axes[1].legend(frameon=False)
    axes[1].set_ylabel("energy drift")
    axes[1].set_xlabel("t")
    axes[0].set_title(f"{report.problem} / {report.scheme}")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_error_history(report: RunReport, path) -> Path:
    plt = _pyplot()
    rows = [(s.t, s.errors) for s in report.samples if s.errors is not None]
    if not rows:
        raise ValueError("report carries no error samples")
    t = np.array([r[0] for r in rows])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, idx in (("L2", 0), ("H1", 1), ("L1 density", 2)):
        ax.semilogy(t, np.maximum([r[1][idx] for r in rows], 1e-300), lw=1.0, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("error")
    ax.set_title(f"{report.problem} / {report.scheme}")
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_convergence(taus_by_scheme: dict, errors_by_scheme: dict, path, norm_label="error") -> Path:
    """Log-log error vs time step with a second-order guide line."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    guide_anchor = None
    for scheme, taus in taus_by_scheme.items():
        taus = np.asarray(taus, dtype=float)
        errs = np.asarray(errors_by_scheme[scheme], dtype=float)
        ok = np.isfinite(errs) & (errs > 0)
        ax.loglog(taus[ok], errs[ok], "o-", lw=1.0, ms=4, label=scheme)
        if guide_anchor is None and np.any(ok):
            guide_anchor = (taus[ok][0], errs[ok][0])
    if guide_anchor is not None:
        t0, e0 = guide_anchor
        ts = np.array([t0, t0 / 16.0])
        ax.loglog(ts, e0 * (ts / t0) ** 2, "k--", lw=0.8, label="order 2")
    ax.set_xlabel("tau")
    ax.set_ylabel(norm_label)
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_blowup_times(taus_by_scheme: dict, times_by_scheme: dict, t_final: float, path) -> Path:
    """First time the energy ceiling was crossed, per scheme and time step."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for scheme, taus in taus_by_scheme.items():
        times = [t_final if t is None else t for t in times_by_scheme[scheme]]
        ax.semilogx(taus, times, "o-", lw=1.0, ms=4, label=scheme)
    ax.axhline(t_final, color="k", lw=0.8, ls=":")
    ax.set_xlabel("tau")
    ax.set_ylabel("blow-up time")
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_density(mesh, u: np.ndarray, path, title="") -> Path:
    """Final density: line plot in 1D, heat map on a structured 2D grid."""
    plt = _pyplot()
    dens = np.abs(u) ** 2
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    if mesh.dim == 1:
        ax.plot(mesh.nodes[:, 0], dens, lw=1.0)
        ax.set_xlabel("x")
        ax.set_ylabel("density")
    else:
        nx, ny = mesh.grid_shape
        grid = dens.reshape(ny + 1, nx + 1)
        x = mesh.nodes[: nx + 1, 0]
        y = mesh.nodes[:: nx + 1, 1]
        im = ax.pcolormesh(x, y, grid, shading="auto", cmap="inferno")
        fig.colorbar(im, ax=ax, label="density")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
