"""Conserved quantities and error norms of discrete states.

Mass, energy and the relaxation pseudo-energy are evaluated with the
same quadrature the schemes are assembled with, so the discrete
conservation identities carry over exactly (up to solver tolerances).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from gpefem.assembly import (
    element_geometry,
    evaluate_at_qp,
    gradient_at_qp,
    sample_density,
)


class ErrorTriple(NamedTuple):
    l2: float
    h1: float
    l1_density: float


@dataclass
class ObservableSample:
    """One monitoring row of a time evolution."""

    t: float
    mass: float
    energy: float
    pseudo_energy: float | None = None
    errors: ErrorTriple | None = None
    wall_s: float = 0.0


@dataclass(frozen=True)
class ExactField:
    """Closed-form reference solution of a 1D problem.

    value(x, t) and dx(x, t) are vectorized in x; dx is the spatial
    derivative needed for H1 error norms.
    """

    value: Callable
    dx: Callable


def mass(mass_matrix, u: np.ndarray) -> float:
    """Squared L2 norm of the P1 function with coefficients u."""
    return float(np.real(np.conj(u) @ (mass_matrix @ u)))


def energy(
    stiffness,
    potential_mass,
    mesh,
    u: np.ndarray,
    beta: float,
    kinetic_coeff: float = 1.0,
) -> float:
    """E[u] = int kappa |grad u|^2 + V |u|^2 + (beta/2) |u|^4."""
    val = kinetic_coeff * np.real(np.conj(u) @ (stiffness @ u))
    if potential_mass is not None:
        val += np.real(np.conj(u) @ (potential_mass @ u))
    if beta != 0.0:
        geom = element_geometry(mesh)
        rho = sample_density(mesh, u)
        val += 0.5 * beta * float(np.sum(geom.weights * rho * rho))
    return float(val)


def re_pseudo_energy(
    stiffness,
    potential_mass,
    mesh,
    u: np.ndarray,
    rho_next: np.ndarray,
    rho_prev: np.ndarray,
    beta: float,
    kinetic_coeff: float = 1.0,
) -> float:
    """Relaxation invariant: kinetic + potential + (beta/2) int rho_next rho_prev.

    rho_next and rho_prev are the staggered auxiliary densities at the
    half levels around u; the scheme keeps this quantity constant to
    linear-solver precision even where the true energy drifts.
    """
    val = kinetic_coeff * np.real(np.conj(u) @ (stiffness @ u))
    if potential_mass is not None:
        val += np.real(np.conj(u) @ (potential_mass @ u))
    if beta != 0.0:
        geom = element_geometry(mesh)
        val += 0.5 * beta * float(np.sum(geom.weights * rho_next * rho_prev))
    return float(val)


def energy_from_ops(ops, u: np.ndarray, beta: float) -> float:
    return energy(ops.stiffness, ops.potential_mass, ops.mesh, u, beta, ops.kinetic_coeff)


def error_norms(mesh, u_num: np.ndarray, reference, t: float | None = None) -> ErrorTriple:
    """L2, H1 and L1-density errors by quadrature.

    ``reference`` is either a discrete coefficient vector on the same
    mesh or an ExactField evaluated at quadrature points at time ``t``
    (the exact function itself, not its interpolant).
    """
    geom = element_geometry(mesh)
    num_vals = evaluate_at_qp(mesh, u_num)
    num_grad = gradient_at_qp(mesh, u_num)

    if isinstance(reference, np.ndarray):
        if reference.shape != u_num.shape:
            raise ValueError("reference vector must live on the same mesh")
        ref_vals = evaluate_at_qp(mesh, reference)
        ref_grad = gradient_at_qp(mesh, reference)
        grad_err_sq = np.sum(np.abs(num_grad - ref_grad) ** 2, axis=-1)
    else:
        if t is None:
            raise ValueError("exact reference requires the evaluation time")
        if mesh.dim != 1:
            raise ValueError("closed-form references are 1D")
        x = geom.points[:, :, 0]
        ref_vals = reference.value(x, t)
        grad_err_sq = np.abs(num_grad[:, :, 0] - reference.dx(x, t)) ** 2

    err_sq = np.abs(num_vals - ref_vals) ** 2
    l2 = float(np.sqrt(np.sum(geom.weights * err_sq)))
    h1 = float(np.sqrt(np.sum(geom.weights * (err_sq + grad_err_sq))))
    dens_err = np.abs(np.abs(num_vals) ** 2 - np.abs(ref_vals) ** 2)
    l1 = float(np.sum(geom.weights * dens_err))
    return ErrorTriple(l2=l2, h1=h1, l1_density=l1)


def eoc(errors: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """Pairwise experimental orders log(e_k/e_{k+1}) / log(tau_k/tau_{k+1})."""
    errors = np.asarray(errors, dtype=float)
    taus = np.asarray(taus, dtype=float)
    if errors.shape != taus.shape or errors.ndim != 1 or len(errors) < 2:
        raise ValueError("need two aligned 1D arrays")
    if np.any(errors <= 0) or np.any(taus <= 0):
        raise ValueError("orders require positive errors and steps")
    return np.log(errors[:-1] / errors[1:]) / np.log(taus[:-1] / taus[1:])


def eoc_slope(errors, taus) -> float:
    """Least-squares slope of log(error) vs log(tau) over a sweep."""
    errors = np.asarray(errors, dtype=float)
    taus = np.asarray(taus, dtype=float)
    slope, _ = np.polyfit(np.log(taus), np.log(errors), 1)
    return float(slope)
