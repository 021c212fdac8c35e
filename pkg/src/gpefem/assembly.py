"""P1 finite element assembly on interval and triangle meshes.

All bilinear forms are integrated with fixed quadrature rules that are
exact for the polynomial degrees the schemes produce: degree 5 in 1D
(3-point Gauss) and degree 4 on triangles (6-point rule).  Exactness up
to degree 4 is what makes the discrete conservation identities hold to
solver precision, since densities of P1 functions are piecewise
quadratic and enter the forms multiplied by trial and test functions.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class QuadRule:
    """Quadrature on the reference element ([0,1] or the unit triangle)."""

    points: np.ndarray   # (Q, dim)
    weights: np.ndarray  # (Q,), sums to the reference measure
    degree: int


def quad_rule(dim: int) -> QuadRule:
    if dim == 1:
        # 3-point Gauss-Legendre mapped to [0,1], exact through degree 5
        r = np.sqrt(3.0 / 5.0)
        pts = (np.array([-r, 0.0, r]) + 1.0) / 2.0
        wts = np.array([5.0, 8.0, 5.0]) / 18.0
        return QuadRule(points=pts[:, None], weights=wts, degree=5)
    if dim == 2:
        # 6-point degree-4 rule on the unit triangle, two symmetric orbits
        a, wa = 0.445948490915965, 0.223381589678011
        b, wb = 0.091576213509771, 0.109951743655322
        pts = np.array(
            [
                [a, a], [1.0 - 2.0 * a, a], [a, 1.0 - 2.0 * a],
                [b, b], [1.0 - 2.0 * b, b], [b, 1.0 - 2.0 * b],
            ]
        )
        wts = np.array([wa, wa, wa, wb, wb, wb]) / 2.0
        return QuadRule(points=pts, weights=wts, degree=4)
    raise ValueError(f"unsupported dimension {dim}")


def _basis_values(dim: int, pts: np.ndarray) -> np.ndarray:
    """P1 basis functions at reference points, shape (Q, n_vertices)."""
    if dim == 1:
        xi = pts[:, 0]
        return np.column_stack([1.0 - xi, xi])
    xi, eta = pts[:, 0], pts[:, 1]
    return np.column_stack([1.0 - xi - eta, xi, eta])


@dataclass
class ElementGeometry:
    """Per-mesh quadrature data shared by every assembler.

    points:   (E, Q, dim) physical quadrature points
    weights:  (E, Q) quadrature weights including the Jacobian factor
    basis:    (Q, nv) reference basis values (affine map, element independent)
    grads:    (E, nv, dim) physical basis gradients, constant per element
    rows/cols: flattened COO index pattern for (E, nv, nv) local blocks
    """

    points: np.ndarray
    weights: np.ndarray
    basis: np.ndarray
    grads: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    elements: np.ndarray
    n_nodes: int
    mesh_ref: object = field(repr=False, default=None)


_GEOM_CACHE: dict[int, ElementGeometry] = {}


def element_geometry(mesh) -> ElementGeometry:
    """Build (or fetch cached) quadrature geometry for a mesh."""
    key = id(mesh)
    cached = _GEOM_CACHE.get(key)
    if cached is not None and cached.mesh_ref() is mesh:
        return cached

    rule = quad_rule(mesh.dim)
    basis = _basis_values(mesh.dim, rule.points)
    verts = mesh.nodes[mesh.elements]  # (E, nv, dim)
    points = np.einsum("qv,evd->eqd", basis, verts)

    if mesh.dim == 1:
        length = np.abs(verts[:, 1, 0] - verts[:, 0, 0])
        weights = rule.weights[None, :] * length[:, None]
        inv = 1.0 / (verts[:, 1, 0] - verts[:, 0, 0])
        grads = np.stack([-inv, inv], axis=1)[:, :, None]
    else:
        d1 = verts[:, 1] - verts[:, 0]
        d2 = verts[:, 2] - verts[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        weights = rule.weights[None, :] * np.abs(det)[:, None]
        # gradients of (1-xi-eta, xi, eta) pushed through the affine map
        ref_grads = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        inv_jt = np.empty((len(det), 2, 2))
        inv_jt[:, 0, 0] = d2[:, 1]
        inv_jt[:, 0, 1] = -d2[:, 0]
        inv_jt[:, 1, 0] = -d1[:, 1]
        inv_jt[:, 1, 1] = d1[:, 0]
        inv_jt /= det[:, None, None]
        grads = np.einsum("vd,edk->evk", ref_grads, inv_jt)

    nv = mesh.elements.shape[1]
    rows = np.repeat(mesh.elements, nv, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, nv)).ravel()

    geom = ElementGeometry(
        points=points,
        weights=weights,
        basis=basis,
        grads=grads,
        rows=rows,
        cols=cols,
        elements=mesh.elements,
        n_nodes=mesh.n_nodes,
        mesh_ref=weakref.ref(mesh),
    )
    _GEOM_CACHE[key] = geom
    weakref.finalize(mesh, _GEOM_CACHE.pop, key, None)
    return geom


def _local_to_csr(geom: ElementGeometry, local: np.ndarray) -> sp.csr_matrix:
    """Scatter (E, nv, nv) local matrices into a global CSR matrix."""
    m = geom.n_nodes
    mat = sp.coo_matrix((local.ravel(), (geom.rows, geom.cols)), shape=(m, m))
    return mat.tocsr()


def assemble_mass(mesh) -> sp.csr_matrix:
    """Mass matrix M_ij = int phi_j phi_i."""
    geom = element_geometry(mesh)
    local = np.einsum("eq,qi,qj->eij", geom.weights, geom.basis, geom.basis)
    return _local_to_csr(geom, local)


def assemble_stiffness(mesh) -> sp.csr_matrix:
    """Stiffness matrix A_ij = int grad phi_j . grad phi_i."""
    geom = element_geometry(mesh)
    measures = geom.weights.sum(axis=1)
    local = np.einsum("e,eid,ejd->eij", measures, geom.grads, geom.grads)
    return _local_to_csr(geom, local)


def assemble_weighted_mass(mesh, weight: np.ndarray) -> sp.csr_matrix:
    """Weighted mass matrix for a weight given per quadrature point.

    Args:
        weight: (n_elements, Q) real values, e.g. a sampled potential or
            the piecewise-quadratic density of a P1 function.
    """
    geom = element_geometry(mesh)
    wq = geom.weights * weight
    local = np.einsum("eq,qi,qj->eij", wq, geom.basis, geom.basis)
    return _local_to_csr(geom, local)


def assemble_angular_momentum(mesh) -> sp.csr_matrix:
    """Matrix of L = -i (x d/dy - y d/dx) on a 2D mesh.

    The raw quadrature matrix of the rotation derivative is skew only up
    to quadrature error, so it is explicitly antisymmetrized before the
    -i factor; the result is Hermitian and yields real Rayleigh
    quotients, which the rotating-frame gradient flow requires.
    """
    if mesh.dim != 2:
        raise ValueError("angular momentum requires a 2D mesh")
    geom = element_geometry(mesh)
    x = geom.points[:, :, 0]
    y = geom.points[:, :, 1]
    # C_ij = int (x dphi_j/dy - y dphi_j/dx) phi_i
    rot = np.einsum("eq,ej->eqj", x, geom.grads[:, :, 1]) - np.einsum(
        "eq,ej->eqj", y, geom.grads[:, :, 0]
    )
    local = np.einsum("eq,qi,eqj->eij", geom.weights, geom.basis, rot)
    c = _local_to_csr(geom, local)
    return (-0.5j) * (c - c.T).tocsr()


def sample_field(mesh, f: Callable) -> np.ndarray:
    """Evaluate a coordinate function at all quadrature points -> (E, Q)."""
    geom = element_geometry(mesh)
    if mesh.dim == 1:
        return np.asarray(f(geom.points[:, :, 0]), dtype=float)
    return np.asarray(f(geom.points[:, :, 0], geom.points[:, :, 1]), dtype=float)


def evaluate_at_qp(mesh, u: np.ndarray) -> np.ndarray:
    """Values of the P1 function with coefficients u at quadrature points."""
    geom = element_geometry(mesh)
    return np.einsum("qv,ev->eq", geom.basis, u[geom.elements])


def gradient_at_qp(mesh, u: np.ndarray) -> np.ndarray:
    """Gradient of the P1 function, (E, Q, dim); constant in Q per element."""
    geom = element_geometry(mesh)
    g = np.einsum("ev,evd->ed", u[geom.elements], geom.grads)
    return np.broadcast_to(g[:, None, :], (g.shape[0], geom.basis.shape[0], g.shape[1]))


def sample_density(mesh, u: np.ndarray) -> np.ndarray:
    """|u_h|^2 at quadrature points, the piecewise-quadratic density (E, Q)."""
    vals = evaluate_at_qp(mesh, u)
    return (vals.real**2 + vals.imag**2)


def interpolate_nodal(mesh, f: Callable, zero_boundary: bool = False) -> np.ndarray:
    """Nodal interpolant of a coordinate function as a complex vector."""
    if mesh.dim == 1:
        vals = f(mesh.nodes[:, 0])
    else:
        vals = f(mesh.nodes[:, 0], mesh.nodes[:, 1])
    u = np.asarray(vals, dtype=np.complex128).copy()
    if zero_boundary:
        u[mesh.boundary] = 0.0
    return u


def _interior_mask_diag(n: int, boundary: np.ndarray) -> sp.dia_matrix:
    keep = np.ones(n)
    keep[boundary] = 0.0
    return sp.diags(keep)


def zero_rows_cols(matrix: sp.spmatrix, boundary: np.ndarray) -> sp.csr_matrix:
    """Zero out boundary rows and columns (no diagonal replacement)."""
    d = _interior_mask_diag(matrix.shape[0], boundary)
    return (d @ matrix @ d).tocsr()


def apply_dirichlet(matrix: sp.spmatrix, boundary: np.ndarray) -> sp.csr_matrix:
    """Replace boundary rows and columns by identity rows/columns."""
    n = matrix.shape[0]
    ind = np.zeros(n)
    ind[boundary] = 1.0
    return (zero_rows_cols(matrix, boundary) + sp.diags(ind)).tocsr()


@dataclass
class Operators:
    """Assembled operators for one problem discretization.

    ``hamiltonian`` is the linear part kinetic_coeff*A + M_V appearing in
    every scheme; the matrices are kept raw (no boundary conditions), the
    steppers impose Dirichlet rows where they build their systems.
    """

    mesh: object
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    potential_mass: sp.csr_matrix | None
    kinetic_coeff: float
    potential: np.ndarray | None  # (E, Q) sampled values, None if V = 0

    @classmethod
    def build(cls, mesh, potential: Callable | None = None, kinetic_coeff: float = 1.0):
        v_field = sample_field(mesh, potential) if potential is not None else None
        mv = assemble_weighted_mass(mesh, v_field) if v_field is not None else None
        return cls(
            mesh=mesh,
            mass=assemble_mass(mesh),
            stiffness=assemble_stiffness(mesh),
            potential_mass=mv,
            kinetic_coeff=kinetic_coeff,
            potential=v_field,
        )

    @property
    def hamiltonian(self) -> sp.csr_matrix:
        ham = getattr(self, "_ham", None)
        if ham is None:
            ham = self.kinetic_coeff * self.stiffness
            if self.potential_mass is not None:
                ham = ham + self.potential_mass
            self._ham = ham.tocsr()
        return self._ham


def _nonlinear_qp_values(mesh, form: str, u_old, u_new):
    """Scheme nonlinearity evaluated at quadrature points -> (E, Q) complex."""
    old = evaluate_at_qp(mesh, u_old)
    new = evaluate_at_qp(mesh, u_new)
    mid = 0.5 * (new + old)
    if form == "im":
        return (mid.real**2 + mid.imag**2) * mid
    if form == "cn":
        dens = 0.5 * (new.real**2 + new.imag**2 + old.real**2 + old.imag**2)
        return dens * mid
    raise ValueError(f"unknown nonlinear form {form!r}")


def _accumulate_load(mesh, values: np.ndarray) -> np.ndarray:
    """Assemble the load vector int g phi_i from quadrature values of g."""
    geom = element_geometry(mesh)
    contrib = np.einsum("eq,qv->ev", geom.weights * values, geom.basis)
    out = np.zeros(geom.n_nodes, dtype=contrib.dtype)
    np.add.at(out, geom.elements, contrib)
    return out


def assemble_nonlinear_residual(
    mesh,
    form: str,
    u_old: np.ndarray,
    u_new: np.ndarray,
    beta: float,
    tau: float,
    operators: Operators | None = None,
    potential: Callable | None = None,
    kinetic_coeff: float = 1.0,
) -> np.ndarray:
    """Residual of the implicit midpoint or Crank-Nicolson equation.

    F(u_new) = i M (u_new - u_old)/tau - H (u_new + u_old)/2 - beta N(u_old, u_new)
    with H the linear Hamiltonian part and N the scheme's nonlinear form.
    Boundary rows are replaced by u_new restricted to the boundary, so a
    root of F satisfies the homogeneous Dirichlet condition exactly.
    """
    ops = operators if operators is not None else Operators.build(
        mesh, potential, kinetic_coeff
    )
    mid = 0.5 * (u_new + u_old)
    f = 1j * (ops.mass @ (u_new - u_old)) / tau - ops.hamiltonian @ mid
    if beta != 0.0:
        f -= beta * _accumulate_load(mesh, _nonlinear_qp_values(mesh, form, u_old, u_new))
    f[mesh.boundary] = u_new[mesh.boundary]
    return f


def _jacobian_weights(mesh, form: str, u_old, u_new):
    """2x2 real derivative weights of the nonlinearity at quadrature points."""
    old = evaluate_at_qp(mesh, u_old)
    new = evaluate_at_qp(mesh, u_new)
    if form == "im":
        # N(w) = |g|^2 g with g = (w + u_old)/2; chain rule brings a 1/2
        g = 0.5 * (new + old)
        x, y = g.real, g.imag
        wpp = 0.5 * (3.0 * x**2 + y**2)
        wpq = x * y
        wqp = x * y
        wqq = 0.5 * (x**2 + 3.0 * y**2)
    elif form == "cn":
        # N(w) = ((|w|^2 + |u_old|^2)/2) (w + u_old)/2
        x, y = new.real, new.imag
        ax, ay = old.real, old.imag
        quad = 0.25 * (x**2 + y**2 + ax**2 + ay**2)
        wpp = 0.5 * x * (x + ax) + quad
        wpq = 0.5 * y * (x + ax)
        wqp = 0.5 * x * (y + ay)
        wqq = 0.5 * y * (y + ay) + quad
    else:
        raise ValueError(f"unknown nonlinear form {form!r}")
    return wpp, wpq, wqp, wqq


def assemble_newton_jacobian(
    mesh,
    form: str,
    u_old: np.ndarray,
    u_new: np.ndarray,
    beta: float,
    tau: float,
    operators: Operators | None = None,
    potential: Callable | None = None,
    kinetic_coeff: float = 1.0,
) -> sp.csr_matrix:
    """Real 2m x 2m Jacobian of the residual in (Re, Im) block form.

    The modulus makes the residual non-holomorphic, so the Jacobian is
    assembled over the real splitting; Dirichlet rows and columns are
    replaced by identity.
    """
    ops = operators if operators is not None else Operators.build(
        mesh, potential, kinetic_coeff
    )
    m = mesh.n_nodes
    half_h = -0.5 * ops.hamiltonian
    mt = ops.mass / tau

    if beta != 0.0:
        wpp, wpq, wqp, wqq = _jacobian_weights(mesh, form, u_old, u_new)
        j_pp = half_h - beta * assemble_weighted_mass(mesh, wpp)
        j_pq = -mt - beta * assemble_weighted_mass(mesh, wpq)
        j_qp = mt - beta * assemble_weighted_mass(mesh, wqp)
        j_qq = half_h - beta * assemble_weighted_mass(mesh, wqq)
    else:
        j_pp = half_h
        j_pq = -mt
        j_qp = mt.copy()
        j_qq = half_h

    jac = sp.bmat([[j_pp, j_pq], [j_qp, j_qq]], format="csr")
    bdry = np.concatenate([mesh.boundary, mesh.boundary + m])
    return apply_dirichlet(jac, bdry)
