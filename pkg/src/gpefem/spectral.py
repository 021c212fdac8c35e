"""Strang-splitting Fourier method on a uniform periodic interval.

Used as a cross-comparison reference for the finite element schemes on
problems whose solution decays fast enough that the interval can be
treated as periodic.  One step is kinetic half-step (exact in frequency
space), full potential+nonlinear phase rotation (exact pointwise), and a
second kinetic half-step.
"""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass

import numpy as np

from .observables import ErrorTriple, ObservableSample
from .problems import ProblemSpec, problem_catalog
from .reporting import RunReport


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid on [a, b) with a power-of-two point count."""

    a: float
    b: float
    n: int

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("interval must have positive length")
        if self.n < 4 or (self.n & (self.n - 1)) != 0:
            raise ValueError("point count must be a power of two, at least 4")

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def x(self) -> np.ndarray:
        return self.a + self.dx * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def fingerprint(self) -> str:
        payload = f"{self.a!r}:{self.b!r}:{self.n}".encode()
        return hashlib.sha256(payload).hexdigest()


def sp2_step(grid: PeriodicGrid, u: np.ndarray, tau: float, beta: float,
             v: np.ndarray | None = None, kinetic_coeff: float = 1.0) -> np.ndarray:
    """One Strang splitting step of i u_t = -kappa u_xx + V u + beta |u|^2 u."""
    half_kinetic = np.exp(-1j * kinetic_coeff * grid.k**2 * (0.5 * tau))
    u = np.fft.ifft(half_kinetic * np.fft.fft(u))
    phase = beta * np.abs(u) ** 2
    if v is not None:
        phase = phase + v
    u = u * np.exp(-1j * tau * phase)
    return np.fft.ifft(half_kinetic * np.fft.fft(u))


def sp2_mass(grid: PeriodicGrid, u: np.ndarray) -> float:
    return float(grid.dx * np.sum(np.abs(u) ** 2))


def sp2_energy(grid: PeriodicGrid, u: np.ndarray, beta: float,
               v: np.ndarray | None = None, kinetic_coeff: float = 1.0) -> float:
    """Kinetic term via wavenumber multipliers, rest by the rectangle rule."""
    uh = np.fft.fft(u)
    kin = kinetic_coeff * grid.dx / grid.n * np.sum(grid.k**2 * np.abs(uh) ** 2)
    dens = np.abs(u) ** 2
    pot = 0.0 if v is None else grid.dx * np.sum(v * dens)
    quart = 0.5 * beta * grid.dx * np.sum(dens**2)
    return float(kin + pot + quart)


def sp2_error_norms(grid: PeriodicGrid, u: np.ndarray, reference, t: float | None = None) -> ErrorTriple:
    """L2, H1 (spectral derivative) and L1-density errors on the grid."""
    if hasattr(reference, "value"):
        if t is None:
            raise ValueError("closed-form reference needs the evaluation time")
        ref = reference.value(grid.x, t)
    else:
        ref = np.asarray(reference)
        if ref.shape != u.shape:
            raise ValueError("reference grid size mismatch")
    e = u - ref
    l2_sq = grid.dx * np.sum(np.abs(e) ** 2)
    eh = np.fft.fft(e)
    h1_sq = l2_sq + grid.dx / grid.n * np.sum(grid.k**2 * np.abs(eh) ** 2)
    l1 = grid.dx * np.sum(np.abs(np.abs(u) ** 2 - np.abs(ref) ** 2))
    return ErrorTriple(float(np.sqrt(l2_sq)), float(np.sqrt(h1_sq)), float(l1))


def run_spectral(
    problem,
    n_points: int,
    *,
    tau: float,
    n_steps: int,
    u0: np.ndarray | None = None,
    observe_every: int = 1,
    compute_errors: bool = True,
    stop_when_energy_above: float | None = None,
    keep_final_state: bool = False,
) -> RunReport:
    """Advance the splitting method and sample mass/energy/errors.

    ``stop_when_energy_above`` records a blow-up event the first time the
    sampled energy exceeds the given threshold (the reference marker for
    long runs is energy crossing zero from below) and stops the run.
    """
    if isinstance(problem, str):
        problem = problem_catalog()[problem]
    if not isinstance(problem, ProblemSpec):
        raise TypeError("problem must be a catalog name or ProblemSpec")
    if problem.dim != 1:
        raise ValueError("the splitting reference is one dimensional")
    grid = PeriodicGrid(problem.x_range[0], problem.x_range[1], n_points)
    v = None
    if problem.potential is not None:
        v = np.asarray(problem.potential(grid.x), dtype=float)
    if u0 is None:
        if problem.exact is None:
            raise ValueError("problem has no closed form; pass u0 explicitly")
        u0 = problem.exact.value(grid.x, 0.0).astype(np.complex128)
    u = np.asarray(u0, dtype=np.complex128).copy()
    exact = problem.exact if compute_errors else None
    beta = problem.beta
    kappa = problem.kinetic_coeff

    report = RunReport(
        problem=problem.name, scheme="sp2", h=grid.dx, tau=tau, n_steps=n_steps,
        mesh_fingerprint=grid.fingerprint(),
    )
    start = time.perf_counter()

    def observe(t):
        errs = None
        if exact is not None:
            errs = sp2_error_norms(grid, u, exact, t)
        return ObservableSample(
            t=t, mass=sp2_mass(grid, u), energy=sp2_energy(grid, u, beta, v, kappa),
            errors=errs, wall_s=time.perf_counter() - start,
        )

    report.samples.append(observe(0.0))
    for n in range(1, n_steps + 1):
        u = sp2_step(grid, u, tau, beta, v, kappa)
        report.completed_steps = n
        t = n * tau
        due = n % observe_every == 0 or n == n_steps
        blown = not np.all(np.isfinite(u))
        if blown:
            report.blowup_time = t
            break
        if due:
            sample = observe(t)
            report.samples.append(sample)
            if not np.isfinite(sample.energy) or (
                stop_when_energy_above is not None
                and sample.energy > stop_when_energy_above
            ):
                report.blowup_time = t
                break

    report.wall_s = time.perf_counter() - start
    if report.samples and report.samples[-1].errors is not None:
        report.final_errors = report.samples[-1].errors
    if keep_final_state:
        report.final_state = u.copy()
    return report
