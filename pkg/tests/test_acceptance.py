"""Acceptance suite: one test per benchmark criterion.

Each test exercises the library at the resolution the criterion names,
asserts the stated tolerance, and registers a single pass/fail line that
the terminal-summary hook prints after the run.  The suite is the
slowest part of the test tree (roughly twenty minutes end to end); the
heavy meshes are shared through session fixtures.
"""
import dataclasses

import numpy as np
import pytest

from conftest import record_criterion
from gpefem.assembly import Operators
from gpefem.mesh import build_interval_mesh
from gpefem.observables import energy, eoc_slope, error_norms, mass
from gpefem.problems import (
    GradientFlowOptions,
    build_problem_mesh,
    ground_state,
    harmonic_1d,
    initial_state,
    lattice_1d,
    problem_catalog,
)
from gpefem.reporting import energy_drift, mass_drift
from gpefem.spectral import PeriodicGrid, run_spectral, sp2_step
from gpefem.steppers import InitMode, run_evolution

ALL_SCHEMES = ("im", "cn", "re", "lcn", "twostep")

pytestmark = pytest.mark.slow


def drift(values):
    values = [v for v in values if v is not None and np.isfinite(v)]
    ref = abs(values[0])
    return max(abs(v - values[0]) for v in values) / max(ref, 1e-300)


# ------------------------------------------------------------- fixtures


@pytest.fixture(scope="session")
def soliton_fine():
    """Single soliton at h=100/8192 with a small-step same-mesh reference."""
    prob = problem_catalog()["single_soliton"]
    mesh = build_problem_mesh(prob, 8192)
    ops = Operators.build(mesh, prob.potential, prob.kinetic_coeff)
    u0 = initial_state(prob, mesh)
    ref = run_evolution(prob, "re", mesh=mesh, operators=ops, u0=u0.copy(),
                        tau=2.0**-13, n_steps=2**13, compute_errors=False,
                        re_init=InitMode.HALFSTEP, keep_final_state=True,
                        observe_every=10**9)
    return prob, mesh, ops, u0, ref.final_state


@pytest.fixture(scope="session")
def two_soliton_paper():
    """Stationary two-soliton at the full benchmark resolution h=40/51200."""
    prob = problem_catalog()["two_soliton"]
    mesh = build_problem_mesh(prob, 51200)
    ops = Operators.build(mesh, prob.potential, prob.kinetic_coeff)
    u0 = initial_state(prob, mesh)
    return prob, mesh, ops, u0


@pytest.fixture(scope="session")
def lattice_800():
    """Optical-lattice condensate, h=24/800, quenched trap initial state."""
    prob = problem_catalog()["lattice1d"]
    mesh = build_problem_mesh(prob, 800)
    ops = Operators.build(mesh, prob.potential, prob.kinetic_coeff)
    gs = ground_state(mesh, lattice_1d(gamma=1.0), beta=prob.beta,
                      kinetic_coeff=prob.kinetic_coeff,
                      opts=GradientFlowOptions(seed=0))
    return prob, mesh, ops, gs.u


# ------------------------------------------------------------- criteria


def test_criterion_01_conservation():
    prob = problem_catalog()["single_soliton"]
    mesh = build_problem_mesh(prob, 4096)
    ops = Operators.build(mesh, prob.potential, prob.kinetic_coeff)
    u0 = initial_state(prob, mesh)
    tau, n_steps = 2.0**-6, 640
    mass_worst = 0.0
    details = []
    ok = True
    for scheme in ALL_SCHEMES:
        rep = run_evolution(prob, scheme, mesh=mesh, operators=ops,
                            u0=u0.copy(), tau=tau, n_steps=n_steps,
                            compute_errors=False, observe_every=16)
        m = mass_drift(rep)
        mass_worst = max(mass_worst, m)
        ok &= m <= 1e-9
        if scheme == "cn":
            e = energy_drift(rep)
            ok &= e <= 1e-8
            details.append(f"cn energy {e:.2e}")
        if scheme == "re":
            pe = drift([s.pseudo_energy for s in rep.samples])
            ok &= pe <= 1e-9
            details.append(f"re pseudo-energy {pe:.2e}")
    details.insert(0, f"mass worst {mass_worst:.2e}")
    record_criterion(1, "conservation", ok, ", ".join(details))
    assert ok, details


def test_criterion_02_beta_zero_coincidence():
    base = problem_catalog()["single_soliton"]
    prob = dataclasses.replace(base, beta=0.0, exact=None)
    mesh = build_problem_mesh(prob, 512)
    ops = Operators.build(mesh, prob.potential, prob.kinetic_coeff)
    x = mesh.nodes[:, 0]
    a, b = prob.x_range
    rng = np.random.default_rng(0)
    coeffs = rng.normal(size=8) + 1j * rng.normal(size=8)
    u0 = np.zeros_like(x, dtype=complex)
    for m, c in enumerate(coeffs, start=1):
        u0 += c * np.sin(m * np.pi * (x - a) / (b - a))
    u0[mesh.boundary] = 0.0
    finals = {}
    for scheme in ALL_SCHEMES:
        rep = run_evolution(prob, scheme, mesh=mesh, operators=ops,
                            u0=u0.copy(), tau=1e-6, n_steps=100,
                            compute_errors=False, keep_final_state=True,
                            observe_every=10**9)
        finals[scheme] = rep.final_state
    worst = 0.0
    for i, s1 in enumerate(ALL_SCHEMES):
        for s2 in ALL_SCHEMES[i + 1:]:
            worst = max(worst, error_norms(mesh, finals[s1], finals[s2]).l2)
    ok = worst <= 1e-10
    record_criterion(2, "beta-zero coincidence", ok,
                     f"max pairwise L2 {worst:.2e} (tol 1e-10)")
    assert ok, worst


def test_criterion_03_convergence_order(soliton_fine):
    prob, mesh, ops, u0, u_ref = soliton_fine
    taus = [2.0**-k for k in range(4, 9)]
    slopes = {}
    ok = True
    for scheme in ALL_SCHEMES:
        errs_l2, errs_h1 = [], []
        for tau in taus:
            rep = run_evolution(prob, scheme, mesh=mesh, operators=ops,
                                u0=u0.copy(), tau=tau, n_steps=round(1.0 / tau),
                                compute_errors=False, keep_final_state=True,
                                observe_every=10**9)
            err = error_norms(mesh, rep.final_state, u_ref)
            errs_l2.append(err.l2)
            errs_h1.append(err.h1)
        s2, s1 = eoc_slope(errs_l2, taus), eoc_slope(errs_h1, taus)
        slopes[scheme] = (s2, s1)
        ok &= 1.7 <= s2 <= 2.3 and 1.7 <= s1 <= 2.3
    detail = ", ".join(f"{s} L2 {v[0]:.2f}/H1 {v[1]:.2f}" for s, v in slopes.items())
    record_criterion(3, "convergence order", ok, detail)
    assert ok, slopes


def test_criterion_04_error_table_spot_checks(two_soliton_paper):
    prob, mesh, ops, u0 = two_soliton_paper
    tau = 2.0**-10
    windows = {
        "re": ("l1_density", 0.010, 0.042),
        "cn": ("h1", 0.040, 0.160),
        "twostep": ("l1_density", 0.07, 0.29),
    }
    measured = {}
    ok = True
    for scheme, (norm, lo, hi) in windows.items():
        rep = run_evolution(prob, scheme, mesh=mesh, operators=ops,
                            u0=u0.copy(), tau=tau, n_steps=round(2.0 / tau),
                            compute_errors=False, keep_final_state=True,
                            observe_every=10**9)
        err = getattr(error_norms(mesh, rep.final_state, prob.exact, t=2.0), norm)
        measured[scheme] = err
        ok &= lo <= err <= hi
    detail = ", ".join(
        f"{s} {windows[s][0]}={measured[s]:.4f} in [{windows[s][1]}, {windows[s][2]}]"
        for s in windows
    )
    record_criterion(4, "error table spot checks", ok, detail)
    assert ok, measured


def test_criterion_05_two_soliton_energy(two_soliton_paper):
    prob, mesh, ops, u0 = two_soliton_paper
    e0 = energy(ops.stiffness, ops.potential_mass, mesh, u0, prob.beta,
                prob.kinetic_coeff)
    ok = abs(e0 + 48.0) <= 0.5
    record_criterion(5, "two-soliton energy", ok, f"E0 = {e0:.4f} (target -48 +/- 0.5)")
    assert ok, e0


def test_criterion_06_soliton_observable_trend():
    prob = problem_catalog()["single_soliton"]
    mass_defects, energy_defects = [], []
    for n in (1024, 2048, 4096):
        mesh = build_problem_mesh(prob, n)
        ops = Operators.build(mesh, prob.potential, prob.kinetic_coeff)
        u0 = initial_state(prob, mesh)
        mass_defects.append(abs(mass(ops.mass, u0) - 4.0))
        e0 = energy(ops.stiffness, ops.potential_mass, mesh, u0, prob.beta,
                    prob.kinetic_coeff)
        energy_defects.append(abs(e0 + 1.0 / 3.0))
    ratios = [mass_defects[i] / mass_defects[i + 1] for i in range(2)]
    ratios += [energy_defects[i] / energy_defects[i + 1] for i in range(2)]
    ok = all(3.5 <= r <= 4.6 for r in ratios)
    record_criterion(6, "soliton analytic observables", ok,
                     "defect ratios " + ", ".join(f"{r:.2f}" for r in ratios))
    assert ok, ratios


def test_criterion_07_lcn_ratio_anomaly():
    prob = problem_catalog()["single_soliton"]
    span = prob.x_range[1] - prob.x_range[0]
    dips = []
    for k in (4, 5, 6):
        tau = 2.0**-k
        errs = {}
        for ratio in (1, 2, 4):
            n = round(span / (ratio * tau))
            mesh = build_problem_mesh(prob, n)
            ops = Operators.build(mesh, prob.potential, prob.kinetic_coeff)
            rep = run_evolution(prob, "lcn", mesh=mesh, operators=ops,
                                u0=initial_state(prob, mesh), tau=tau,
                                n_steps=round(10.0 / tau), compute_errors=False,
                                keep_final_state=True, observe_every=10**9)
            errs[ratio] = error_norms(mesh, rep.final_state, prob.exact, t=10.0).l2
        dips.append(errs[2] < errs[1] and errs[2] < errs[4])
    ok = all(dips)
    record_criterion(7, "LCN mesh-ratio anomaly", ok,
                     f"dip at h/tau=2 for tau=2^-4..2^-6: {dips}")
    assert ok, dips


def test_criterion_08_stability_contrast(lattice_800):
    prob, mesh, ops, u0 = lattice_800
    horizon = 5.0
    blowups = {}
    for k in range(8, 13):
        tau = 2.0**-k
        n_steps = round(horizon / tau)
        rep = run_evolution(prob, "twostep", mesh=mesh, operators=ops,
                            u0=u0.copy(), tau=tau, n_steps=n_steps,
                            compute_errors=False, energy_ceiling_rel=10.0,
                            observe_every=max(1, n_steps // 640))
        blowups[f"2^-{k}"] = rep.blowup_time
    drifts = {}
    for scheme in ("re", "cn"):
        rep = run_evolution(prob, scheme, mesh=mesh, operators=ops,
                            u0=u0.copy(), tau=2.0**-8,
                            n_steps=round(horizon * 2**8), compute_errors=False,
                            observe_every=4)
        drifts[scheme] = energy_drift(rep)
    two_ok = all(t is not None for t in blowups.values())
    cons_ok = all(d <= 1e-6 for d in drifts.values())
    ok = two_ok and cons_ok
    detail = (
        "twostep blow-up times " + str(blowups)
        + f"; re drift {drifts['re']:.2e}, cn drift {drifts['cn']:.2e} (tol 1e-6)"
    )
    record_criterion(8, "stability contrast", ok, detail)
    assert ok, detail


def test_criterion_09_splitting_reference():
    grid = PeriodicGrid(0.0, 2.0 * np.pi, 64)
    wave = np.exp(1j * 3.0 * grid.x)
    stepped = sp2_step(grid, wave, 0.17, beta=0.0)
    plane_err = np.max(np.abs(stepped - np.exp(-1j * 9.0 * 0.17) * wave))

    prob = problem_catalog()["single_soliton"]
    ref = run_spectral(prob, 4096, tau=2.0**-10, n_steps=round(0.5 * 2**10),
                       compute_errors=False, keep_final_state=True,
                       observe_every=10**9)
    errs = []
    for k in (5, 6, 7):
        rep = run_spectral(prob, 4096, tau=2.0**-k, n_steps=round(0.5 * 2**k),
                           compute_errors=False, keep_final_state=True,
                           observe_every=10**9)
        errs.append(np.max(np.abs(rep.final_state - ref.final_state)))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    order_ok = all(3.2 <= r <= 4.8 for r in ratios)

    two = problem_catalog()["two_soliton"]
    obs = run_spectral(two, 1024, tau=2.0**-6, n_steps=200, compute_errors=False,
                       observe_every=1)
    masses = [s.mass for s in obs.samples]
    step_jump = max(abs(masses[i + 1] - masses[i]) for i in range(len(masses) - 1))
    mass_ok = step_jump / masses[0] <= 1e-12

    crossings = []
    for k in (6, 7, 8, 9):
        tau = 2.0**-k
        rep = run_spectral(two, 2048, tau=tau, n_steps=round(100.0 / tau),
                           compute_errors=False, stop_when_energy_above=0.0,
                           observe_every=max(1, round(0.125 / tau)))
        crossings.append(rep.blowup_time)
    sweep_ok = (
        all(c is not None for c in crossings)
        and crossings[-1] > crossings[0]
        and crossings[-1] / crossings[0] < 8.0
    )
    ok = plane_err <= 1e-13 and order_ok and mass_ok and sweep_ok
    detail = (
        f"plane wave {plane_err:.1e}, order ratios "
        + "/".join(f"{r:.2f}" for r in ratios)
        + f", mass per step {step_jump / masses[0]:.1e}, crossings {crossings}"
    )
    record_criterion(9, "splitting reference", ok, detail)
    assert ok, detail


def test_criterion_10_ground_state_oracles():
    mesh_h = build_interval_mesh(-12.0, 12.0, 2400)
    harm = ground_state(mesh_h, harmonic_1d(), beta=0.0, kinetic_coeff=0.5,
                        opts=GradientFlowOptions(seed=0))
    harm_ok = abs(harm.lam - 0.5) <= 0.005

    mesh_b = build_interval_mesh(0.0, 1.0, 200)
    box = ground_state(mesh_b, None, beta=0.0, kinetic_coeff=0.5,
                       opts=GradientFlowOptions(seed=0))
    target = np.pi**2 / 2.0
    box_ok = abs(box.lam - target) <= 1e-3 * target
    ok = harm_ok and box_ok
    record_criterion(10, "ground-state oracles", ok,
                     f"harmonic lam {harm.lam:.6f} (0.5 +/- 1%), "
                     f"box lam {box.lam:.6f} (pi^2/2 = {target:.6f})")
    assert ok, (harm.lam, box.lam)


def test_criterion_11_cpu_ratio():
    prob = problem_catalog()["lattice1d"]
    mesh = build_problem_mesh(prob, 6400)
    ops = Operators.build(mesh, prob.potential, prob.kinetic_coeff)
    gs = ground_state(mesh, lattice_1d(gamma=1.0), beta=prob.beta,
                      kinetic_coeff=prob.kinetic_coeff,
                      opts=GradientFlowOptions(seed=0))
    walls = {}
    for scheme in ALL_SCHEMES:
        rep = run_evolution(prob, scheme, mesh=mesh, operators=ops,
                            u0=gs.u.copy(), tau=2.0**-10, n_steps=1024,
                            compute_errors=False, observe_every=1024)
        walls[scheme] = rep.wall_s
    linear_max = max(walls["re"], walls["lcn"], walls["twostep"])
    ratio_im = walls["im"] / linear_max
    ratio_cn = walls["cn"] / linear_max
    ok = ratio_im >= 4.0 and ratio_cn >= 4.0
    detail = (
        ", ".join(f"{s} {walls[s]:.2f}s" for s in ALL_SCHEMES)
        + f"; im/linear {ratio_im:.1f}x, cn/linear {ratio_cn:.1f}x (need 4x)"
    )
    record_criterion(11, "CPU ratio", ok, detail)
    assert ok, detail
