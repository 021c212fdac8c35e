"""Benchmark problem definitions: exact solutions, potentials, ground states.

The catalog collects six configurations spanning smooth 1D solitons,
a rough 1D optical lattice, and three 2D condensate setups.  Problems
whose initial state is a ground state obtain it from a semi-implicit
discrete normalized gradient flow, optionally in a rotating frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from gpefem import linalg
from gpefem.assembly import (
    apply_dirichlet,
    assemble_angular_momentum,
    assemble_mass,
    assemble_stiffness,
    assemble_weighted_mass,
    element_geometry,
    interpolate_nodal,
    sample_density,
    sample_field,
    zero_rows_cols,
)
from gpefem.mesh import Mesh, build_interval_mesh, build_rect_mesh
from gpefem.observables import ExactField


# ------------------------------------------------------------ exact solutions

def _sech(x):
    return 1.0 / np.cosh(x)


def _single_soliton_value(x, t):
    return np.sqrt(2.0) * np.exp(1j * (x / 2.0 + 3.0 * t / 4.0)) * _sech(x - t)


def _single_soliton_dx(x, t):
    return _single_soliton_value(x, t) * (0.5j - np.tanh(x - t))


SINGLE_SOLITON = ExactField(value=_single_soliton_value, dx=_single_soliton_dx)


def _two_soliton_parts(x, t):
    num = 8.0 * np.exp(4j * t) * (9.0 * np.exp(-4.0 * x) + 16.0 * np.exp(4.0 * x)) - \
        32.0 * np.exp(16j * t) * (4.0 * np.exp(-2.0 * x) + 9.0 * np.exp(2.0 * x))
    den = -128.0 * np.cos(12.0 * t) + 4.0 * np.exp(-6.0 * x) + \
        16.0 * np.exp(6.0 * x) + 81.0 * np.exp(-2.0 * x) + 64.0 * np.exp(2.0 * x)
    return num, den


def _two_soliton_value(x, t):
    num, den = _two_soliton_parts(x, t)
    return num / den


def _two_soliton_dx(x, t):
    num, den = _two_soliton_parts(x, t)
    num_x = 8.0 * np.exp(4j * t) * (-36.0 * np.exp(-4.0 * x) + 64.0 * np.exp(4.0 * x)) - \
        32.0 * np.exp(16j * t) * (-8.0 * np.exp(-2.0 * x) + 18.0 * np.exp(2.0 * x))
    den_x = -24.0 * np.exp(-6.0 * x) + 96.0 * np.exp(6.0 * x) - \
        162.0 * np.exp(-2.0 * x) + 128.0 * np.exp(2.0 * x)
    return (num_x * den - num * den_x) / den**2


TWO_SOLITON = ExactField(value=_two_soliton_value, dx=_two_soliton_dx)


# ----------------------------------------------------------------- potentials

def harmonic_1d(gamma: float = 1.0, coeff: float = 0.5):
    return lambda x: coeff * (gamma * x) ** 2


def harmonic_2d(gamma_x: float = 1.0, gamma_y: float = 1.0, coeff: float = 0.5):
    return lambda x, y: coeff * ((gamma_x * x) ** 2 + (gamma_y * y) ** 2)


def lattice_1d(gamma: float):
    """Harmonic trap plus 1D optical lattice with wells 4 apart."""
    return lambda x: (gamma * x) ** 2 + 500.0 * np.sin(np.pi * x / 4.0) ** 2


def confining_frame():
    """Discontinuous quintic wall activated outside |x_i| = 4.5."""

    def v(x, y):
        wx = np.where(np.abs(x) >= 4.5, (np.abs(x) - 4.5) ** 5, 0.0)
        wy = np.where(np.abs(y) >= 4.5, (np.abs(y) - 4.5) ** 5, 0.0)
        return 1000.0 * (wx + wy)

    return v


def lattice_2d_frame(gamma_x: float, gamma_y: float):
    """2D optical lattice + harmonic trap + confining frame."""
    frame = confining_frame()

    def v(x, y):
        lattice = 787.0 * (np.sin(np.pi * x / 2.0) ** 2 + np.sin(np.pi * y / 2.0) ** 2)
        trap = 0.5 * ((gamma_x * x) ** 2 + (gamma_y * y) ** 2)
        return lattice + trap + frame(x, y)

    return v


def anisotropic_trap():
    return lambda x, y: 0.45 * x**2 + 0.55 * y**2


def mott_harmonic():
    return lambda x, y: 2.0 * (x**2 + y**2)


def mott_lattice():
    harm = mott_harmonic()
    return lambda x, y: harm(x, y) + 2000.0 * (
        np.sin(2.0 * np.pi * x) ** 2 + np.sin(2.0 * np.pi * y) ** 2
    )


_POTENTIALS: dict[str, Callable] = {
    "harmonic_1d": harmonic_1d,
    "harmonic_2d": harmonic_2d,
    "lattice_1d": lattice_1d,
    "lattice_2d_frame": lattice_2d_frame,
    "confining_frame": confining_frame,
    "anisotropic_trap": anisotropic_trap,
    "mott_harmonic": mott_harmonic,
    "mott_lattice": mott_lattice,
}


def potential_catalog(name: str, **params) -> Callable:
    """Closed-form potential factory by name."""
    try:
        factory = _POTENTIALS[name]
    except KeyError:
        raise KeyError(
            f"unknown potential {name!r}; available: {sorted(_POTENTIALS)}"
        ) from None
    return factory(**params)


# ------------------------------------------------------------------- problems

@dataclass(frozen=True)
class GroundStateInit:
    """Initial state defined as a gradient-flow ground state."""

    potential: Callable
    omega: float = 0.0


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    x_range: tuple[float, float]
    beta: float
    kinetic_coeff: float
    t_final: float
    y_range: tuple[float, float] | None = None
    potential: Callable | None = None      # potential during the dynamics
    exact: ExactField | None = None
    ground_init: GroundStateInit | None = None
    h_ref: float | None = None             # full-scale benchmark spatial resolution
    tau_ref: float | None = None           # full-scale benchmark time-step size
    n_desk: int = 256                      # default elements per axis, desk scale


def problem_catalog() -> dict[str, ProblemSpec]:
    return {
        "single_soliton": ProblemSpec(
            name="single_soliton",
            dim=1,
            x_range=(-30.0, 70.0),
            beta=-1.0,
            kinetic_coeff=1.0,
            t_final=10.0,
            exact=SINGLE_SOLITON,
            n_desk=4096,
        ),
        "two_soliton": ProblemSpec(
            name="two_soliton",
            dim=1,
            x_range=(-20.0, 20.0),
            beta=-2.0,
            kinetic_coeff=1.0,
            t_final=2.0,
            exact=TWO_SOLITON,
            h_ref=40.0 / 51200.0,
            n_desk=4096,
        ),
        "lattice1d": ProblemSpec(
            name="lattice1d",
            dim=1,
            x_range=(-12.0, 12.0),
            beta=1000.0,
            kinetic_coeff=0.5,
            t_final=5.0,
            potential=lattice_1d(gamma=0.5),
            ground_init=GroundStateInit(potential=lattice_1d(gamma=1.0)),
            h_ref=24.0 / 51200.0,
            tau_ref=2.0**-12,
            n_desk=800,
        ),
        "lattice2d": ProblemSpec(
            name="lattice2d",
            dim=2,
            x_range=(-6.0, 6.0),
            y_range=(-6.0, 6.0),
            beta=2300.0,
            kinetic_coeff=0.5,
            t_final=1.0,
            potential=lattice_2d_frame(gamma_x=4.0, gamma_y=8.0),
            ground_init=GroundStateInit(
                potential=lattice_2d_frame(gamma_x=1.0, gamma_y=1.0)
            ),
            h_ref=0.06,
            tau_ref=2.0**-8,
            n_desk=200,
        ),
        "rotating": ProblemSpec(
            name="rotating",
            dim=2,
            x_range=(-6.0, 6.0),
            y_range=(-6.0, 6.0),
            beta=100.0,
            kinetic_coeff=0.5,
            t_final=10.0,
            potential=anisotropic_trap(),
            ground_init=GroundStateInit(
                potential=harmonic_2d(1.0, 1.0), omega=0.8
            ),
            h_ref=12.0 * 2.0**-6,
            tau_ref=2.0e-4,
            n_desk=64,
        ),
        "mott": ProblemSpec(
            name="mott",
            dim=2,
            x_range=(-20.0, 20.0),
            y_range=(-20.0, 20.0),
            beta=1000.0,
            kinetic_coeff=0.5,
            t_final=0.515,
            potential=mott_harmonic(),
            ground_init=GroundStateInit(potential=mott_lattice()),
            h_ref=0.01,
            tau_ref=0.515 / 2.0**11,
            n_desk=400,
        ),
    }


def desk_variant(problem: ProblemSpec) -> ProblemSpec:
    """Reduced configuration used by the desk profile.

    The full-scale Mott setup needs ~16e6 unknowns; the desk variant
    shrinks the box to [-10,10]^2 at h = 0.05 where the condensate
    (trapped well inside) is still fully resolved.
    """
    if problem.name == "mott":
        return replace(
            problem,
            x_range=(-10.0, 10.0),
            y_range=(-10.0, 10.0),
            n_desk=400,  # h = 20/400 = 0.05
        )
    return problem


def build_problem_mesh(problem: ProblemSpec, n_elems: int) -> Mesh:
    if problem.dim == 1:
        return build_interval_mesh(*problem.x_range, n_elems)
    return build_rect_mesh(problem.x_range, problem.y_range, n_elems, n_elems)


# --------------------------------------------------------------- ground states

@dataclass
class GradientFlowOptions:
    tau: float = 0.01
    tol: float = 1e-9
    max_iter: int = 20000
    continuation_stages: int = 5   # used once beta reaches 1000
    continuation_tol_factor: float = 100.0
    seed: int = 0
    verbose: bool = False


@dataclass
class GroundStateResult:
    u: np.ndarray
    lam: float            # chemical potential (Rayleigh quotient)
    energy: float
    iterations: int
    residual: float
    converged: bool
    energy_history: np.ndarray


def _default_seed_state(mesh: Mesh, omega: float, rng: np.random.Generator):
    if mesh.dim == 1:
        x = mesh.nodes[:, 0]
        u = np.exp(-(x**2) / 2.0).astype(np.complex128)
    else:
        x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
        u = np.exp(-(x**2 + y**2) / 2.0).astype(np.complex128)
        if omega != 0.0:
            # vortex-seeded ansatz biases the flow off the symmetric branch
            u = (1.0 - omega) * u + omega * (x + 1j * y) * u
    u += 1e-8 * rng.standard_normal(len(u))
    u[mesh.boundary] = 0.0
    return u


def ground_state(
    mesh: Mesh,
    potential: Callable | None,
    beta: float,
    omega: float = 0.0,
    kinetic_coeff: float = 0.5,
    opts: GradientFlowOptions | None = None,
    initial_guess: np.ndarray | None = None,
) -> GroundStateResult:
    """Minimizer of the energy under unit mass via normalized gradient flow.

    Each iteration solves the semi-implicit system

        (M/tau + kappa A + M_V + beta W(|u_k|^2) - omega L) u* = M u_k / tau

    with homogeneous Dirichlet conditions, then renormalizes u* to unit
    mass.  Iterations stop when ||u_{k+1} - u_k||_M / tau <= tol.  For
    beta >= 1000 the interaction is ramped up in stages, each warm-started
    from the previous stage.
    """
    opts = opts or GradientFlowOptions()
    rng = np.random.default_rng(opts.seed)

    mass_mat = assemble_mass(mesh)
    stiff = assemble_stiffness(mesh)
    v_field = sample_field(mesh, potential) if potential is not None else None
    pot_mass = assemble_weighted_mass(mesh, v_field) if v_field is not None else None
    ang = assemble_angular_momentum(mesh) if omega != 0.0 else None

    static = kinetic_coeff * stiff + mass_mat / opts.tau
    if pot_mass is not None:
        static = static + pot_mass
    if ang is not None:
        static = static - omega * ang
    use_complex = ang is not None or (
        initial_guess is not None
        and np.iscomplexobj(initial_guess)
        and np.abs(initial_guess.imag).max() > 0.0
    )
    if use_complex:
        static = static.astype(np.complex128)
    static_bc = apply_dirichlet(static, mesh.boundary)

    geom = element_geometry(mesh)

    def m_norm_sq(v):
        return float(np.real(np.conj(v) @ (mass_mat @ v)))

    def quartic(v):
        rho = sample_density(mesh, v)
        return float(np.sum(geom.weights * rho * rho))

    def rayleigh(v, b):
        val = kinetic_coeff * np.real(np.conj(v) @ (stiff @ v)) + b * quartic(v)
        if pot_mass is not None:
            val += np.real(np.conj(v) @ (pot_mass @ v))
        if ang is not None:
            val -= omega * np.real(np.conj(v) @ (ang @ v))
        return float(val)

    def gf_energy(v, b):
        return rayleigh(v, b) - 0.5 * b * quartic(v)

    u = initial_guess.copy() if initial_guess is not None else _default_seed_state(
        mesh, omega, rng
    )
    if not use_complex and initial_guess is None:
        u = u.real.astype(np.float64)
    u = u / np.sqrt(m_norm_sq(u))

    if abs(beta) >= 1000.0:
        stages = np.linspace(beta / opts.continuation_stages, beta, opts.continuation_stages)
    else:
        stages = np.array([beta])

    total_iters = 0
    history: list[float] = []
    residual = np.inf
    converged = False
    for stage_idx, beta_k in enumerate(stages):
        last_stage = stage_idx == len(stages) - 1
        tol_k = opts.tol if last_stage else opts.tol * opts.continuation_tol_factor
        converged = False
        for _ in range(opts.max_iter):
            if beta_k != 0.0:
                w = assemble_weighted_mass(mesh, sample_density(mesh, u))
                lhs = static_bc + beta_k * zero_rows_cols(w, mesh.boundary)
            else:
                lhs = static_bc
            rhs = (mass_mat @ u) / opts.tau
            rhs[mesh.boundary] = 0.0
            u_next, _ = linalg.solve(lhs.tocsr(), rhs)
            u_next /= np.sqrt(m_norm_sq(u_next))
            diff = u_next - u
            residual = np.sqrt(m_norm_sq(diff)) / opts.tau
            u = u_next
            total_iters += 1
            history.append(gf_energy(u, beta_k))
            if residual <= tol_k:
                converged = True
                break
        if opts.verbose:
            print(
                f"stage beta={beta_k:g}: iters={total_iters} residual={residual:.3e}"
            )

    # deterministic global phase: rotate the largest entry onto the real axis
    k = int(np.argmax(np.abs(u)))
    phase = u[k] / abs(u[k]) if u[k] != 0 else 1.0
    u = (u / phase).astype(np.complex128)

    return GroundStateResult(
        u=u,
        lam=rayleigh(u, beta),
        energy=gf_energy(u, beta),
        iterations=total_iters,
        residual=float(residual),
        converged=bool(converged and residual <= opts.tol),
        energy_history=np.array(history),
    )


def initial_state(
    problem: ProblemSpec,
    mesh: Mesh,
    gf_opts: GradientFlowOptions | None = None,
) -> np.ndarray:
    """Discrete initial value: nodal interpolant or computed ground state."""
    if problem.exact is not None:
        return interpolate_nodal(
            mesh, lambda x: problem.exact.value(x, 0.0), zero_boundary=True
        )
    if problem.ground_init is None:
        raise ValueError(f"problem {problem.name} has no initial state recipe")
    gs = ground_state(
        mesh,
        problem.ground_init.potential,
        problem.beta,
        omega=problem.ground_init.omega,
        kinetic_coeff=problem.kinetic_coeff,
        opts=gf_opts,
    )
    return gs.u


# ----------------------------------------------------------- vortex diagnostics

def count_vortices(mesh: Mesh, u: np.ndarray, density_floor: float = 1e-6) -> int:
    """Count phase windings of +-2pi around grid cells of a structured mesh.

    Cells whose corner density is below ``density_floor`` times the peak
    density are skipped; the phase is meaningless where the state vanishes.
    """
    if mesh.dim != 2 or mesh.grid_shape is None:
        raise ValueError("vortex counting needs a structured 2D mesh")
    nx, ny = mesh.grid_shape
    grid = u.reshape(ny + 1, nx + 1)
    theta = np.angle(grid)
    dens = np.abs(grid) ** 2

    def dphi(a, b):
        return np.angle(np.exp(1j * (b - a)))

    w = (
        dphi(theta[:-1, :-1], theta[:-1, 1:])
        + dphi(theta[:-1, 1:], theta[1:, 1:])
        + dphi(theta[1:, 1:], theta[1:, :-1])
        + dphi(theta[1:, :-1], theta[:-1, :-1])
    )
    corner_min = np.minimum.reduce(
        [dens[:-1, :-1], dens[:-1, 1:], dens[1:, 1:], dens[1:, :-1]]
    )
    active = corner_min > density_floor * dens.max()
    return int(np.sum((np.abs(w) > np.pi) & active))


# ------------------------------------------------------------------ persistence

def save_ground_state(path, problem_name: str, mesh: Mesh, result: GroundStateResult):
    np.savez(
        path,
        u=result.u,
        lam=result.lam,
        energy=result.energy,
        iterations=result.iterations,
        residual=result.residual,
        problem=problem_name,
        fingerprint=mesh.fingerprint(),
        h=mesh.h,
    )


def load_ground_state(path, problem_name: str, mesh: Mesh) -> GroundStateResult:
    """Load a persisted ground state; the mesh fingerprint must match."""
    data = np.load(path, allow_pickle=False)
    if str(data["problem"]) != problem_name:
        raise ValueError(
            f"state file holds {data['problem']}, expected {problem_name}"
        )
    if str(data["fingerprint"]) != mesh.fingerprint():
        raise ValueError("mesh fingerprint mismatch; state belongs to another mesh")
    return GroundStateResult(
        u=data["u"],
        lam=float(data["lam"]),
        energy=float(data["energy"]),
        iterations=int(data["iterations"]),
        residual=float(data["residual"]),
        converged=True,
        energy_history=np.array([]),
    )
