"""Mass-conservative time discretizations of the cubic Schroedinger equation.

Five schemes advance the nodal coefficient vector under homogeneous
Dirichlet conditions:

* ``IM``      implicit midpoint, nonlinearity |u^{n+1/2}|^2 u^{n+1/2} (Newton)
* ``CN``      Crank-Nicolson with averaged densities (Newton)
* ``RE``      relaxation: an auxiliary density leapfrog makes the step linear
* ``LCN``     Adams-Bashforth linearized Crank-Nicolson
* ``TWOSTEP`` leapfrog over 2*tau with the density frozen at the middle level

All five conserve the discrete mass exactly in exact arithmetic; CN
additionally conserves the discrete energy and RE a pseudo-energy built
from the staggered densities.  The linear schemes share one factorized
solve per step; the nonlinear ones run a Newton iteration on the real
splitting of the residual (the squared modulus is not holomorphic).
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, replace

import numpy as np

from .assembly import (
    Operators,
    apply_dirichlet,
    assemble_newton_jacobian,
    assemble_nonlinear_residual,
    assemble_weighted_mass,
    sample_density,
    zero_rows_cols,
)
from .linalg import SolverError, solve
from .observables import ObservableSample, energy, error_norms, mass, re_pseudo_energy
from .problems import ProblemSpec, build_problem_mesh, initial_state, problem_catalog
from .reporting import RunReport


class Scheme(enum.Enum):
    IM = "im"
    CN = "cn"
    RE = "re"
    LCN = "lcn"
    TWOSTEP = "twostep"


class InitMode(enum.Enum):
    SIMPLE = "simple"
    HALFSTEP = "halfstep"


def parse_scheme(name) -> Scheme:
    if isinstance(name, Scheme):
        return name
    key = str(name).lower().replace("-", "").replace("_", "")
    for s in Scheme:
        if s.value == key:
            return s
    raise ValueError(f"unknown scheme {name!r}; expected one of "
                     f"{[s.value for s in Scheme]}")


@dataclass
class NewtonOptions:
    rel_tol: float = 1e-11
    abs_tol: float = 0.0
    max_iter: int = 30
    damping: bool = False

    def __post_init__(self):
        if self.rel_tol <= 0.0 and self.abs_tol <= 0.0:
            raise ValueError("at least one Newton tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class StepperState:
    """State advanced by the step functions.

    ``rho_prev`` holds the staggered quadrature-point density rho^{n-1/2}
    (relaxation scheme only); ``u_prev`` holds u^{n-1} (LCN and two-step).
    ``newton_iters`` records the iterations spent producing this state.
    """

    u: np.ndarray
    n: int = 0
    t: float = 0.0
    rho_prev: np.ndarray | None = None
    u_prev: np.ndarray | None = None
    newton_iters: int = 0


def make_state(u0: np.ndarray) -> StepperState:
    u = np.asarray(u0, dtype=np.complex128).copy()
    return StepperState(u=u)


# ------------------------------------------------------------------ Newton

def newton_solve(residual_fn, jacobian_fn, initial_guess, opts: NewtonOptions | None = None,
                 scale: float | None = None):
    """Root of a complex residual via Newton on the real splitting.

    Convergence is declared when ||F|| <= rel_tol*scale + abs_tol, with
    ``scale`` defaulting to the initial residual norm.  An initial guess
    that already satisfies the tolerance is accepted with 0 iterations.
    """
    opts = opts if opts is not None else NewtonOptions()
    u = np.asarray(initial_guess, dtype=np.complex128).copy()
    m = u.size
    f = residual_fn(u)
    fnorm = float(np.linalg.norm(f))
    if not np.isfinite(fnorm):
        raise SolverError("non-finite Newton residual at the initial guess",
                          residual=fnorm)
    if scale is None or scale <= 0.0:
        scale = max(fnorm, 1e-300)
    target = opts.rel_tol * scale + opts.abs_tol
    iters = 0
    while fnorm > target:
        if iters >= opts.max_iter:
            raise SolverError(
                f"Newton did not converge in {opts.max_iter} iterations "
                f"(residual {fnorm:.3e}, target {target:.3e})",
                residual=fnorm,
            )
        jac = jacobian_fn(u)
        rhs = np.concatenate([-f.real, -f.imag])
        d, _ = solve(jac, rhs)
        du = d[:m] + 1j * d[m:]
        if opts.damping:
            alpha = 1.0
            while alpha > 1.0 / 64.0:
                trial = residual_fn(u + alpha * du)
                if np.linalg.norm(trial) < fnorm:
                    break
                alpha *= 0.5
            u = u + alpha * du
        else:
            u = u + du
        f = residual_fn(u)
        fnorm = float(np.linalg.norm(f))
        if not np.isfinite(fnorm):
            raise SolverError("Newton residual became non-finite", residual=fnorm)
        iters += 1
    return u, iters


def _newton_step(state: StepperState, tau: float, beta: float, operators: Operators,
                 form: str, newton_opts: NewtonOptions | None) -> StepperState:
    mesh = operators.mesh
    u_old = state.u

    def residual(w):
        return assemble_nonlinear_residual(mesh, form, u_old, w, beta, tau,
                                           operators=operators)

    def jacobian(w):
        return assemble_newton_jacobian(mesh, form, u_old, w, beta, tau,
                                        operators=operators)

    # residual scale of the leading i M u / tau term
    scale = float(np.linalg.norm(operators.mass @ u_old)) / tau
    u_new, iters = newton_solve(residual, jacobian, u_old, newton_opts, scale=scale)
    return replace(state, u=u_new, n=state.n + 1, t=state.t + tau,
                   newton_iters=iters)


def step_im(state: StepperState, tau: float, beta: float, operators: Operators,
            newton_opts: NewtonOptions | None = None) -> StepperState:
    """Implicit midpoint step: nonlinearity |u^{n+1/2}|^2 u^{n+1/2}."""
    return _newton_step(state, tau, beta, operators, "im", newton_opts)


def step_cn(state: StepperState, tau: float, beta: float, operators: Operators,
            newton_opts: NewtonOptions | None = None) -> StepperState:
    """Crank-Nicolson step: nonlinearity (|u^{n+1}|^2+|u^n|^2)/2 u^{n+1/2}."""
    return _newton_step(state, tau, beta, operators, "cn", newton_opts)


# ----------------------------------------------------------- linear schemes

class LinearWorkspace:
    """Shared matrices for the one-solve-per-step schemes.

    Every linear scheme solves a system of the form

        (i theta M - (B + beta W)/2) u_new = (i theta M + (B + beta W)/2) u_src

    with B the static Hamiltonian, W a density-weighted mass matrix and
    theta = 1/tau or 1/(2 tau).  The static Dirichlet-reduced parts are
    cached per theta; only W changes between steps.
    """

    def __init__(self, operators: Operators):
        self.ops = operators
        self.boundary = operators.mesh.boundary
        self._static: dict[float, tuple] = {}

    def _static_pair(self, theta: float):
        pair = self._static.get(theta)
        if pair is None:
            im_mass = 1j * theta * self.ops.mass.astype(np.complex128)
            half_b = 0.5 * self.ops.hamiltonian
            lhs = apply_dirichlet(im_mass - half_b, self.boundary).tocsr()
            rhs = (im_mass + half_b).tocsr()
            pair = (lhs, rhs)
            self._static[theta] = pair
        return pair

    def cayley_solve(self, theta: float, beta: float, weight: np.ndarray,
                     u_src: np.ndarray) -> np.ndarray:
        lhs_static, rhs_static = self._static_pair(theta)
        rhs = rhs_static @ u_src
        if beta != 0.0:
            w = assemble_weighted_mass(self.ops.mesh, weight)
            lhs = (lhs_static - 0.5 * beta * zero_rows_cols(w, self.boundary)).tocsr()
            rhs = rhs + 0.5 * beta * (w @ u_src)
        else:
            lhs = lhs_static
        rhs[self.boundary] = 0.0
        x, _ = solve(lhs, rhs)
        return x


def _workspace(operators: Operators, workspace: LinearWorkspace | None) -> LinearWorkspace:
    return workspace if workspace is not None else LinearWorkspace(operators)


def re_initialize(u0: np.ndarray, mode: InitMode | str, tau: float, beta: float,
                  operators: Operators,
                  workspace: LinearWorkspace | None = None) -> StepperState:
    """Initial staggered density rho^{-1/2} for the relaxation scheme.

    SIMPLE takes rho^{-1/2} = |u0|^2 at the quadrature points.  HALFSTEP
    solves i (u0 - w)/tau = (B + beta W(|u0|^2)) (u0 + w) for w and takes
    rho^{-1/2} = |w|^2; for beta = V = 0 this is a unitary phase rotation,
    so the density profile is preserved exactly.
    """
    mode = InitMode(mode) if not isinstance(mode, InitMode) else mode
    state = make_state(u0)
    mesh = operators.mesh
    if mode is InitMode.SIMPLE:
        rho = sample_density(mesh, state.u)
    else:
        dens0 = sample_density(mesh, state.u)
        im_mass = (1j / tau) * operators.mass.astype(np.complex128)
        k_static = operators.hamiltonian
        lhs = apply_dirichlet(im_mass + k_static, mesh.boundary)
        rhs = im_mass @ state.u - k_static @ state.u
        if beta != 0.0:
            w_mat = assemble_weighted_mass(mesh, dens0)
            lhs = lhs + beta * zero_rows_cols(w_mat, mesh.boundary)
            rhs = rhs - beta * (w_mat @ state.u)
        rhs[mesh.boundary] = 0.0
        w, _ = solve(lhs.tocsr(), rhs)
        rho = sample_density(mesh, w)
    return replace(state, rho_prev=rho)


def step_re(state: StepperState, tau: float, beta: float, operators: Operators,
            workspace: LinearWorkspace | None = None) -> StepperState:
    """Relaxation step: density leapfrog, then one linear midpoint solve."""
    if state.rho_prev is None:
        raise ValueError("relaxation state lacks rho_prev; call re_initialize")
    ws = _workspace(operators, workspace)
    rho_next = 2.0 * sample_density(operators.mesh, state.u) - state.rho_prev
    u_new = ws.cayley_solve(1.0 / tau, beta, rho_next, state.u)
    return replace(state, u=u_new, n=state.n + 1, t=state.t + tau,
                   rho_prev=rho_next, newton_iters=0)


def lcn_startup(u0: np.ndarray, tau: float, beta: float, operators: Operators,
                workspace: LinearWorkspace | None = None) -> StepperState:
    """Intermediate implicit half-step, then the first full linearized step."""
    ws = _workspace(operators, workspace)
    state = make_state(u0)
    mesh = operators.mesh
    # (2i/tau M - B - beta W(|u0|^2)) u_hat = (2i/tau) M u0
    im_mass = (2j / tau) * operators.mass.astype(np.complex128)
    lhs = apply_dirichlet(im_mass - operators.hamiltonian, mesh.boundary)
    if beta != 0.0:
        w_mat = assemble_weighted_mass(mesh, sample_density(mesh, state.u))
        lhs = lhs - beta * zero_rows_cols(w_mat, mesh.boundary)
    rhs = im_mass @ state.u
    rhs[mesh.boundary] = 0.0
    u_hat, _ = solve(lhs.tocsr(), rhs)
    u1 = ws.cayley_solve(1.0 / tau, beta, sample_density(mesh, u_hat), state.u)
    return replace(state, u=u1, n=1, t=tau, u_prev=state.u, newton_iters=0)


def step_lcn(state: StepperState, tau: float, beta: float, operators: Operators,
             workspace: LinearWorkspace | None = None) -> StepperState:
    """Linearized Crank-Nicolson step with Adams-Bashforth density."""
    if state.u_prev is None:
        raise ValueError("LCN state lacks u_prev; call lcn_startup")
    ws = _workspace(operators, workspace)
    u_hat = 1.5 * state.u - 0.5 * state.u_prev
    weight = sample_density(operators.mesh, u_hat)
    u_new = ws.cayley_solve(1.0 / tau, beta, weight, state.u)
    return replace(state, u=u_new, n=state.n + 1, t=state.t + tau,
                   u_prev=state.u, newton_iters=0)


def twostep_startup(u0: np.ndarray, tau: float, beta: float, operators: Operators,
                    workspace: LinearWorkspace | None = None) -> StepperState:
    """Half-step with density |u0|^2, then a full step with density |u^{1/2}|^2."""
    ws = _workspace(operators, workspace)
    state = make_state(u0)
    mesh = operators.mesh
    u_half = ws.cayley_solve(2.0 / tau, beta, sample_density(mesh, state.u), state.u)
    u1 = ws.cayley_solve(1.0 / tau, beta, sample_density(mesh, u_half), state.u)
    return replace(state, u=u1, n=1, t=tau, u_prev=state.u, newton_iters=0)


def step_twostep(state: StepperState, tau: float, beta: float, operators: Operators,
                 workspace: LinearWorkspace | None = None) -> StepperState:
    """Leapfrog over 2*tau: unknown average (u^{n+1}+u^{n-1})/2, density |u^n|^2."""
    if state.u_prev is None:
        raise ValueError("two-step state lacks u_prev; call twostep_startup")
    ws = _workspace(operators, workspace)
    weight = sample_density(operators.mesh, state.u)
    u_new = ws.cayley_solve(0.5 / tau, beta, weight, state.u_prev)
    return replace(state, u=u_new, n=state.n + 1, t=state.t + tau,
                   u_prev=state.u, newton_iters=0)


# ------------------------------------------------------------ run driver

_NONLINEAR = {Scheme.IM: "im", Scheme.CN: "cn"}


def run_evolution(
    problem,
    scheme,
    n_elems: int | None = None,
    *,
    tau: float,
    n_steps: int,
    mesh=None,
    u0: np.ndarray | None = None,
    operators: Operators | None = None,
    newton_opts: NewtonOptions | None = None,
    re_init: InitMode | str = InitMode.SIMPLE,
    observe_every: int = 1,
    observer=None,
    compute_errors: bool = True,
    energy_ceiling: float | None = None,
    energy_ceiling_rel: float | None = None,
    stop_when_energy_above: float | None = None,
    keep_final_state: bool = False,
    gf_opts=None,
) -> RunReport:
    """Advance a catalog problem n_steps times and collect observables.

    Observables are sampled at step 0, every ``observe_every`` steps and at
    the final step.  When the problem provides an exact solution and
    ``compute_errors`` is set, each sample carries the error triple.  If
    the energy magnitude exceeds the configured ceiling (absolute, or
    relative to the initial energy), the signed energy rises above
    ``stop_when_energy_above``, or the state turns non-finite, the run
    stops and the report records the crossing time instead of raising.
    """
    if isinstance(problem, str):
        problem = problem_catalog()[problem]
    if not isinstance(problem, ProblemSpec):
        raise TypeError("problem must be a catalog name or ProblemSpec")
    scheme = parse_scheme(scheme)
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")

    if mesh is None:
        mesh = build_problem_mesh(problem, n_elems if n_elems else problem.n_desk)
    if operators is None:
        operators = Operators.build(mesh, problem.potential, problem.kinetic_coeff)
    if u0 is None:
        u0 = initial_state(problem, mesh, gf_opts=gf_opts)

    exact = problem.exact if compute_errors else None
    beta = problem.beta
    start = time.perf_counter()

    def observe(state: StepperState):
        u = state.u
        m_val = mass(operators.mass, u)
        e_val = _energy(operators, u, beta)
        pe_val = None
        if scheme is Scheme.RE and state.rho_prev is not None:
            rho_next = 2.0 * sample_density(mesh, u) - state.rho_prev
            pe_val = re_pseudo_energy(
                operators.stiffness, operators.potential_mass, mesh, u,
                rho_next, state.rho_prev, beta, operators.kinetic_coeff,
            )
        errs = None
        if exact is not None:
            errs = error_norms(mesh, u, exact, t=state.t)
        sample = ObservableSample(
            t=state.t, mass=m_val, energy=e_val, pseudo_energy=pe_val,
            errors=errs, wall_s=time.perf_counter() - start,
        )
        if observer is not None:
            observer(sample, state)
        return sample

    report = RunReport(
        problem=problem.name, scheme=scheme.value, h=mesh.h, tau=tau,
        n_steps=n_steps, mesh_fingerprint=mesh.fingerprint(),
    )

    workspace = LinearWorkspace(operators)

    if scheme is Scheme.RE:
        state = re_initialize(u0, re_init, tau, beta, operators, workspace)
    else:
        state = make_state(u0)

    s0 = observe(state)
    report.samples.append(s0)
    e_ref = abs(s0.energy)
    ceiling = np.inf
    if energy_ceiling is not None:
        ceiling = float(energy_ceiling)
    if energy_ceiling_rel is not None:
        ceiling = min(ceiling, float(energy_ceiling_rel) * max(e_ref, 1e-300))

    total_newton = 0
    max_newton = 0

    def advance(st: StepperState) -> StepperState:
        if scheme in _NONLINEAR:
            return _newton_step(st, tau, beta, operators, _NONLINEAR[scheme],
                                newton_opts)
        if scheme is Scheme.RE:
            return step_re(st, tau, beta, operators, workspace)
        if scheme is Scheme.LCN:
            return step_lcn(st, tau, beta, operators, workspace)
        return step_twostep(st, tau, beta, operators, workspace)

    while state.n < n_steps:
        if state.n == 0 and scheme is Scheme.LCN:
            state = lcn_startup(state.u, tau, beta, operators, workspace)
        elif state.n == 0 and scheme is Scheme.TWOSTEP:
            state = twostep_startup(state.u, tau, beta, operators, workspace)
        else:
            state = advance(state)
        total_newton += state.newton_iters
        max_newton = max(max_newton, state.newton_iters)
        report.completed_steps = state.n

        due = state.n % observe_every == 0 or state.n == n_steps
        blown = not np.all(np.isfinite(state.u))
        if due or blown:
            if blown:
                report.blowup_time = state.t
                break
            sample = observe(state)
            report.samples.append(sample)
            crossed = stop_when_energy_above is not None and (
                sample.energy > stop_when_energy_above
            )
            if not np.isfinite(sample.energy) or abs(sample.energy) > ceiling or crossed:
                report.blowup_time = state.t
                break

    report.wall_s = time.perf_counter() - start
    report.newton_iterations = total_newton
    report.newton_max = max_newton
    if report.samples and report.samples[-1].errors is not None:
        report.final_errors = report.samples[-1].errors
    if keep_final_state:
        report.final_state = state.u.copy()
    return report


def _energy(operators: Operators, u: np.ndarray, beta: float) -> float:
    return energy(operators.stiffness, operators.potential_mass, operators.mesh,
                  u, beta, operators.kinetic_coeff)
