import numpy as np
import numpy.testing as npt
import pytest

from gpefem.assembly import (
    assemble_mass,
    assemble_stiffness,
    assemble_weighted_mass,
    interpolate_nodal,
    sample_density,
    sample_field,
)
from gpefem.mesh import build_interval_mesh, build_rect_mesh
from gpefem.observables import (
    ErrorTriple,
    ExactField,
    ObservableSample,
    energy,
    eoc,
    eoc_slope,
    error_norms,
    mass,
    re_pseudo_energy,
)
from gpefem.problems import SINGLE_SOLITON


def soliton_setup(n):
    mesh = build_interval_mesh(-30.0, 70.0, n)
    u = interpolate_nodal(mesh, lambda x: SINGLE_SOLITON.value(x, 0.0), zero_boundary=True)
    return mesh, u


def test_soliton_mass_approaches_4_quadratically():
    defects = []
    for n in (512, 1024, 2048):
        mesh, u = soliton_setup(n)
        defects.append(abs(mass(assemble_mass(mesh), u) - 4.0))
    assert defects[0] / defects[1] == pytest.approx(4.0, rel=0.25)
    assert defects[1] / defects[2] == pytest.approx(4.0, rel=0.25)


def test_soliton_energy_approaches_minus_third():
    mesh, u = soliton_setup(4096)
    e = energy(assemble_stiffness(mesh), None, mesh, u, beta=-1.0)
    assert e == pytest.approx(-1.0 / 3.0, abs=5e-4)


def test_energy_includes_potential_term():
    mesh = build_interval_mesh(-1.0, 1.0, 64)
    u = interpolate_nodal(mesh, lambda x: 1.0 - x**2 + 0j, zero_boundary=True)
    v = sample_field(mesh, lambda x: 2.0 + 0.0 * x)
    mv = assemble_weighted_mass(mesh, v)
    a = assemble_stiffness(mesh)
    e0 = energy(a, None, mesh, u, beta=0.0)
    e1 = energy(a, mv, mesh, u, beta=0.0)
    m = mass(assemble_mass(mesh), u)
    assert e1 - e0 == pytest.approx(2.0 * m, rel=1e-12)


def test_kinetic_coefficient_scales_gradient_part():
    mesh, u = soliton_setup(512)
    a = assemble_stiffness(mesh)
    full = energy(a, None, mesh, u, beta=0.0, kinetic_coeff=1.0)
    half = energy(a, None, mesh, u, beta=0.0, kinetic_coeff=0.5)
    assert half == pytest.approx(full / 2.0, rel=1e-13)


def test_pseudo_energy_collapses_to_energy_at_equal_densities():
    mesh, u = soliton_setup(512)
    a = assemble_stiffness(mesh)
    rho = sample_density(mesh, u)
    e = energy(a, None, mesh, u, beta=-1.0)
    pe = re_pseudo_energy(a, None, mesh, u, rho, rho, beta=-1.0)
    assert pe == pytest.approx(e, rel=1e-13)


def test_error_norms_zero_for_identical_states():
    mesh, u = soliton_setup(256)
    err = error_norms(mesh, u, u.copy())
    assert err == ErrorTriple(0.0, 0.0, 0.0)


def test_error_norms_against_exact_interpolation_rates():
    # interpolation error of the exact profile: O(h^2) in L2, O(h) in H1
    errs = [
        error_norms(*soliton_setup(n), SINGLE_SOLITON, t=0.0) for n in (512, 1024)
    ]
    assert errs[0].l2 / errs[1].l2 == pytest.approx(4.0, rel=0.15)
    assert errs[0].h1 / errs[1].h1 == pytest.approx(2.0, rel=0.15)
    assert errs[0].l1_density / errs[1].l1_density == pytest.approx(4.0, rel=0.2)


def test_error_norms_discrete_reference_matches_matrix_norms():
    mesh, u = soliton_setup(128)
    rng = np.random.default_rng(2)
    v = u + 0.01 * (rng.normal(size=u.size) + 1j * rng.normal(size=u.size))
    v[mesh.boundary] = 0.0
    err = error_norms(mesh, u, v)
    e = u - v
    m_mat = assemble_mass(mesh)
    a_mat = assemble_stiffness(mesh)
    l2_sq = np.real(np.conj(e) @ (m_mat @ e))
    h1_sq = l2_sq + np.real(np.conj(e) @ (a_mat @ e))
    assert err.l2 == pytest.approx(np.sqrt(l2_sq), rel=1e-12)
    assert err.h1 == pytest.approx(np.sqrt(h1_sq), rel=1e-12)


def test_error_norms_requires_time_for_exact_reference():
    mesh, u = soliton_setup(64)
    with pytest.raises(ValueError):
        error_norms(mesh, u, SINGLE_SOLITON)


def test_eoc_recovers_synthetic_order():
    taus = np.array([0.1, 0.05, 0.025, 0.0125])
    errors = 3.0 * taus**2
    npt.assert_allclose(eoc(errors, taus), 2.0, rtol=1e-12)
    assert eoc_slope(errors, taus) == pytest.approx(2.0, rel=1e-12)


def test_eoc_rejects_bad_input():
    with pytest.raises(ValueError):
        eoc(np.array([1.0]), np.array([0.1]))
    with pytest.raises(ValueError):
        eoc(np.array([1.0, -1.0]), np.array([0.1, 0.05]))


def test_observable_sample_defaults():
    s = ObservableSample(t=0.5, mass=4.0, energy=-1.0 / 3.0)
    assert s.pseudo_energy is None
    assert s.errors is None


def test_exact_field_protocol():
    f = ExactField(value=lambda x, t: x * t, dx=lambda x, t: t + 0.0 * x)
    assert f.value(2.0, 3.0) == 6.0


def test_2d_error_norms_discrete():
    mesh = build_rect_mesh((0.0, 1.0), (0.0, 1.0), 12, 12)
    u = interpolate_nodal(mesh, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y) + 0j)
    err = error_norms(mesh, u, 0.0 * u)
    # |u|_L2 = 1/2 for the continuous function; interpolant is close
    assert err.l2 == pytest.approx(0.5, rel=2e-2)
    assert err.h1 > err.l2
