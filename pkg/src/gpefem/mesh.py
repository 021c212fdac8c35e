"""Uniform simplicial meshes for intervals and axis-aligned rectangles.

Only the structured meshes needed by the benchmark problems are provided:
equispaced intervals and rectangles triangulated by splitting each grid
cell along its lower-left to upper-right diagonal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Conforming P1 mesh.

    Attributes:
        dim: spatial dimension, 1 or 2.
        nodes: (m, dim) vertex coordinates.
        elements: (n_elems, dim+1) vertex indices per element.
        boundary: sorted indices of the nodes on the domain boundary.
        h: mesh size, the largest element diameter.
        grid_shape: cells per axis for structured meshes, (nx,) or (nx, ny).
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary: np.ndarray
    h: float
    grid_shape: tuple[int, ...]

    def __post_init__(self):
        for arr in (self.nodes, self.elements, self.boundary):
            arr.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def interior(self) -> np.ndarray:
        """Indices of nodes not on the boundary."""
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary] = False
        return np.nonzero(mask)[0]

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary] = True
        return mask

    def element_measures(self) -> np.ndarray:
        """Length (1D) or area (2D) of every element."""
        verts = self.nodes[self.elements]
        if self.dim == 1:
            return np.abs(verts[:, 1, 0] - verts[:, 0, 0])
        d1 = verts[:, 1] - verts[:, 0]
        d2 = verts[:, 2] - verts[:, 0]
        return 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def fingerprint(self) -> str:
        """Content hash of the mesh geometry, used to key persisted states."""
        import hashlib

        hsh = hashlib.sha256()
        hsh.update(np.int64(self.dim).tobytes())
        hsh.update(np.ascontiguousarray(self.nodes).tobytes())
        hsh.update(np.ascontiguousarray(self.elements).tobytes())
        return hsh.hexdigest()


def build_interval_mesh(a: float, b: float, n_elems: int) -> Mesh:
    """Equispaced mesh of [a, b] with ``n_elems`` elements.

    Nodes are ordered left to right; element k connects nodes (k, k+1).
    """
    if not b > a:
        raise ValueError(f"empty interval [{a}, {b}]")
    if n_elems < 2:
        raise ValueError("need at least 2 elements for a nonempty interior")
    nodes = np.linspace(a, b, n_elems + 1)[:, None]
    idx = np.arange(n_elems)
    elements = np.column_stack([idx, idx + 1])
    boundary = np.array([0, n_elems])
    return Mesh(
        dim=1,
        nodes=nodes,
        elements=elements.astype(np.int64),
        boundary=boundary,
        h=(b - a) / n_elems,
        grid_shape=(n_elems,),
    )


def build_rect_mesh(
    x_range: tuple[float, float],
    y_range: tuple[float, float],
    nx: int,
    ny: int,
) -> Mesh:
    """Structured triangulation of a rectangle with nx-by-ny grid cells.

    Node ordering is lexicographic with x varying fastest.  Each cell is
    split along its lower-left to upper-right diagonal, giving 2*nx*ny
    triangles with counterclockwise vertex ordering.
    """
    ax, bx = x_range
    ay, by = y_range
    if not (bx > ax and by > ay):
        raise ValueError("degenerate rectangle")
    if nx < 2 or ny < 2:
        raise ValueError("need at least 2 cells per axis")

    xs = np.linspace(ax, bx, nx + 1)
    ys = np.linspace(ay, by, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    i = i.ravel()
    j = j.ravel()
    n0 = j * (nx + 1) + i
    n1 = n0 + 1
    n2 = n0 + nx + 2
    n3 = n0 + nx + 1
    lower = np.column_stack([n0, n1, n2])
    upper = np.column_stack([n0, n2, n3])
    elements = np.empty((2 * nx * ny, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper

    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
    on_edge = (ii == 0) | (ii == nx) | (jj == 0) | (jj == ny)
    boundary = np.nonzero(on_edge.ravel())[0]

    dx = (bx - ax) / nx
    dy = (by - ay) / ny
    return Mesh(
        dim=2,
        nodes=nodes,
        elements=elements,
        boundary=boundary,
        h=float(np.hypot(dx, dy)),
        grid_shape=(nx, ny),
    )
