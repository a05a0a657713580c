"""Meshes, nodal fields and quadrature on boxes in one and two dimensions.

Discretization is piecewise-linear on a uniform subdivision: segments in
1D, axis-aligned rectangles split into two triangles in 2D. Gradients of a
nodal field are constant per element. Lower-order integrands |u|^s are
integrated with a fixed rule per element (2-point Gauss on segments, the
3-point edge-midpoint rule on triangles, exact through degree 2), and all
reductions run in fixed element order so repeated evaluation is bitwise
reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, HypothesisError


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable simplicial mesh of a box with Dirichlet boundary flags.

    Equality and hashing are by identity: two meshes are interchangeable
    only if they are the same object, which lets solvers cache factored
    operators per mesh.

    Attributes
    ----------
    dim : int
        Ambient dimension, 1 or 2.
    node_coords : ndarray, shape (n_nodes, dim)
        Node positions; in 2D nodes are ordered lexicographically by
        (ix, iy) grid index.
    elements : ndarray, shape (n_el, dim + 1)
        Node indices per element (segments or triangles).
    element_measure : ndarray, shape (n_el,)
        Length or area of each element.
    boundary_mask : ndarray of bool, shape (n_nodes,)
        True on boundary nodes, where Dirichlet fields vanish.
    basis_gradients : ndarray, shape (n_el, dim + 1, dim)
        Constant gradient of each nodal basis function on each element.
    quad_basis : ndarray, shape (nq, dim + 1)
        Nodal basis values at the reference quadrature points.
    quad_weights : ndarray, shape (nq,)
        Reference quadrature weights, summing to 1.
    """

    dim: int
    node_coords: np.ndarray
    elements: np.ndarray
    element_measure: np.ndarray
    boundary_mask: np.ndarray
    basis_gradients: np.ndarray
    quad_basis: np.ndarray
    quad_weights: np.ndarray
    bounds: tuple
    subdivisions: tuple

    @property
    def n_nodes(self) -> int:
        return self.node_coords.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def interior_count(self) -> int:
        return int(np.count_nonzero(~self.boundary_mask))

    @property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)


def build_mesh(dim: int, bounds, subdivisions) -> Mesh:
    """Uniformly subdivide a box; needs at least 2 subdivisions per axis.

    ``bounds`` is (lo, hi) in 1D and ((x_lo, x_hi), (y_lo, y_hi)) in 2D;
    ``subdivisions`` is an int, or a pair of ints in 2D.
    """
    if dim == 1:
        return _build_mesh_1d(bounds, subdivisions)
    if dim == 2:
        return _build_mesh_2d(bounds, subdivisions)
    raise ConfigError(f"mesh dimension must be 1 or 2, got {dim}")


def _check_axis(lo: float, hi: float, n, axis: str) -> tuple[float, float, int]:
    lo, hi = float(lo), float(hi)
    if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
        raise ConfigError(f"degenerate bounds on {axis}: [{lo}, {hi}]")
    if int(n) != n or int(n) < 2:
        raise ConfigError(
            f"need at least 2 subdivisions on {axis} for an interior node, got {n}"
        )
    return lo, hi, int(n)


def _build_mesh_1d(bounds, subdivisions) -> Mesh:
    lo, hi, n = _check_axis(bounds[0], bounds[1], subdivisions, "x")
    h = (hi - lo) / n
    coords = (lo + h * np.arange(n + 1)).reshape(-1, 1)
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    measure = np.full(n, h)
    boundary = np.zeros(n + 1, dtype=bool)
    boundary[[0, n]] = True
    basis_grad = np.broadcast_to(
        np.array([[[-1.0 / h], [1.0 / h]]]), (n, 2, 1)
    ).copy()
    xi = 0.5 + np.array([-0.5, 0.5]) / np.sqrt(3.0)
    quad_basis = np.column_stack([1.0 - xi, xi])
    quad_weights = np.array([0.5, 0.5])
    return Mesh(
        1,
        _freeze(coords),
        _freeze(elements),
        _freeze(measure),
        _freeze(boundary),
        _freeze(basis_grad),
        _freeze(quad_basis),
        _freeze(quad_weights),
        (lo, hi),
        (n,),
    )


def _build_mesh_2d(bounds, subdivisions) -> Mesh:
    if np.isscalar(subdivisions):
        subdivisions = (subdivisions, subdivisions)
    (x0, x1, nx) = _check_axis(bounds[0][0], bounds[0][1], subdivisions[0], "x")
    (y0, y1, ny) = _check_axis(bounds[1][0], bounds[1][1], subdivisions[1], "y")
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    ix, iy = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    coords = np.column_stack([(x0 + hx * ix).ravel(), (y0 + hy * iy).ravel()])
    boundary = ((ix == 0) | (ix == nx) | (iy == 0) | (iy == ny)).ravel()

    def node(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            n00, n10 = node(i, j), node(i + 1, j)
            n01, n11 = node(i, j + 1), node(i + 1, j + 1)
            # split each cell along the same diagonal, counterclockwise
            tris.append((n00, n10, n11))
            tris.append((n00, n11, n01))
    elements = np.array(tris, dtype=np.int64)
    n_el = elements.shape[0]
    measure = np.full(n_el, 0.5 * hx * hy)

    # per-element edge matrix E = [p1 - p0; p2 - p0]; basis gradients are
    # the columns of E^{-1} for nodes 1, 2 and minus their sum for node 0
    p = coords[elements]
    E = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=1)
    det = E[:, 0, 0] * E[:, 1, 1] - E[:, 0, 1] * E[:, 1, 0]
    inv = np.empty_like(E)
    inv[:, 0, 0] = E[:, 1, 1] / det
    inv[:, 0, 1] = -E[:, 0, 1] / det
    inv[:, 1, 0] = -E[:, 1, 0] / det
    inv[:, 1, 1] = E[:, 0, 0] / det
    basis_grad = np.empty((n_el, 3, 2))
    basis_grad[:, 1, :] = inv[:, :, 0]
    basis_grad[:, 2, :] = inv[:, :, 1]
    basis_grad[:, 0, :] = -(basis_grad[:, 1, :] + basis_grad[:, 2, :])

    quad_basis = np.array(
        [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]
    )
    quad_weights = np.full(3, 1.0 / 3.0)
    return Mesh(
        2,
        _freeze(coords),
        _freeze(elements),
        _freeze(measure),
        _freeze(boundary),
        _freeze(basis_grad),
        _freeze(quad_basis),
        _freeze(quad_weights),
        ((x0, x1), (y0, y1)),
        (nx, ny),
    )


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values of a piecewise-linear function on a mesh."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", _freeze(np.array(self.values, dtype=float))
        )

    @property
    def size(self) -> int:
        return self.values.size


def nodal_array(mesh: Mesh, u) -> np.ndarray:
    """Accept a Field or a raw nodal array and validate its length."""
    values = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise ValueError(
            f"field has {values.shape} values, mesh has {mesh.n_nodes} nodes"
        )
    return values


def make_field(mesh: Mesh, values, *, project_boundary: bool = False) -> Field:
    """Wrap nodal values as a Dirichlet field (boundary entries exactly 0).

    With ``project_boundary`` the boundary entries are zeroed; otherwise a
    nonzero boundary value is an error.
    """
    values = np.array(values, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise ValueError(
            f"field has {values.shape} values, mesh has {mesh.n_nodes} nodes"
        )
    if project_boundary:
        values[mesh.boundary_mask] = 0.0
    elif np.any(values[mesh.boundary_mask] != 0.0):
        raise ValueError("Dirichlet field has nonzero boundary values")
    return Field(values)


def field_from_function(mesh: Mesh, fn: Callable) -> Field:
    """Sample a function of the coordinates at the nodes, zeroed on the boundary.

    In 1D ``fn`` receives x arrays; in 2D it receives (x, y) arrays.
    """
    c = mesh.node_coords
    values = np.asarray(fn(c[:, 0]) if mesh.dim == 1 else fn(c[:, 0], c[:, 1]))
    return make_field(mesh, np.broadcast_to(values, (mesh.n_nodes,)),
                      project_boundary=True)


def bump_field(mesh: Mesh, amplitude: float = 1.0) -> Field:
    """First-eigenfunction-like start: a product of coordinate sine bumps."""
    c = mesh.node_coords
    if mesh.dim == 1:
        lo, hi = mesh.bounds
        values = np.sin(np.pi * (c[:, 0] - lo) / (hi - lo))
    else:
        (x0, x1), (y0, y1) = mesh.bounds
        values = np.sin(np.pi * (c[:, 0] - x0) / (x1 - x0)) * np.sin(
            np.pi * (c[:, 1] - y0) / (y1 - y0)
        )
    return make_field(mesh, amplitude * values, project_boundary=True)


def interior_to_field(mesh: Mesh, interior_values: np.ndarray) -> Field:
    """Embed a vector of interior nodal values as a full Dirichlet field."""
    interior_values = np.asarray(interior_values, dtype=float)
    if interior_values.shape != (mesh.interior_count,):
        raise ValueError(
            f"expected {mesh.interior_count} interior values, "
            f"got {interior_values.shape}"
        )
    values = np.zeros(mesh.n_nodes)
    values[mesh.interior_indices] = interior_values
    return Field(values)


@dataclass(frozen=True, eq=False)
class Weight:
    """Strictly positive nodal weight with its guaranteed lower bound."""

    values: np.ndarray
    floor: float

    def __post_init__(self):
        object.__setattr__(
            self, "values", _freeze(np.array(self.values, dtype=float))
        )


def weight_constant(mesh: Mesh, value: float) -> Weight:
    return weight_from_nodal(mesh, np.full(mesh.n_nodes, float(value)))


def weight_from_function(mesh: Mesh, fn: Callable) -> Weight:
    c = mesh.node_coords
    values = np.asarray(fn(c[:, 0]) if mesh.dim == 1 else fn(c[:, 0], c[:, 1]))
    return weight_from_nodal(mesh, np.broadcast_to(values, (mesh.n_nodes,)))


def weight_from_nodal(mesh: Mesh, values) -> Weight:
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise ValueError(
            f"weight has {values.shape} values, mesh has {mesh.n_nodes} nodes"
        )
    if not np.all(np.isfinite(values)):
        raise ConfigError("weight contains non-finite values")
    floor = float(np.min(values))
    if floor <= 0.0:
        raise HypothesisError(
            f"weight must be bounded below by a positive constant, min = {floor:g}"
        )
    return Weight(values, floor)


def element_gradient_vectors(mesh: Mesh, u) -> np.ndarray:
    """Constant gradient vector of the interpolant on each element, (n_el, dim)."""
    values = nodal_array(mesh, u)
    return np.einsum("eki,ek->ei", mesh.basis_gradients, values[mesh.elements])


def element_gradients(mesh: Mesh, u) -> np.ndarray:
    """Euclidean norm of the element gradient, (n_el,)."""
    vec = element_gradient_vectors(mesh, u)
    if mesh.dim == 1:
        return np.abs(vec[:, 0])
    return np.sqrt(vec[:, 0] ** 2 + vec[:, 1] ** 2)


def integrate(mesh: Mesh, per_element_values) -> float:
    """Sum element values weighted by element measure, in fixed element order."""
    values = np.asarray(per_element_values, dtype=float)
    if values.shape != (mesh.n_elements,):
        raise ValueError(
            f"expected {mesh.n_elements} per-element values, got {values.shape}"
        )
    return float(np.dot(mesh.element_measure, values))


def quad_values(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    """Interpolate nodal values at the quadrature points, (n_el, nq)."""
    return nodal[mesh.elements] @ mesh.quad_basis.T


def lp_norm_pow(mesh: Mesh, u, s: float, weight: Weight | None = None) -> float:
    """Integral of w(x) |u(x)|^s by the fixed element quadrature rule; s > 1."""
    s = float(s)
    if not s > 1.0:
        raise ValueError(f"lp_norm_pow requires exponent s > 1, got {s}")
    values = nodal_array(mesh, u)
    uq = np.abs(quad_values(mesh, values)) ** s
    if weight is not None:
        uq = uq * quad_values(mesh, weight.values)
    return float(np.dot(mesh.element_measure, uq @ mesh.quad_weights))


def write_nodal_csv(path, values: np.ndarray) -> None:
    """Write nodal values as ``node_index,value`` rows with 12 significant digits."""
    values = np.asarray(values, dtype=float)
    with open(path, "w", newline="") as f:
        f.write("node_index,value\n")
        for i, v in enumerate(values):
            f.write(f"{i},{v:.12g}\n")


def read_nodal_csv(path, expected_nodes: int | None = None) -> np.ndarray:
    """Read a ``node_index,value`` CSV into a nodal array."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"nodal CSV not found: {path}")
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["node_index", "value"]:
            raise ConfigError(
                f"{path}: expected header 'node_index,value', got {header}"
            )
        rows = [(int(r[0]), float(r[1])) for r in reader if r]
    n = max(i for i, _ in rows) + 1 if rows else 0
    if expected_nodes is not None and n != expected_nodes:
        raise ConfigError(
            f"{path}: has {n} nodes, mesh expects {expected_nodes}"
        )
    values = np.zeros(n)
    seen = np.zeros(n, dtype=bool)
    for i, v in rows:
        if i < 0 or i >= n:
            raise ConfigError(f"{path}: node index {i} out of range")
        if seen[i]:
            raise ConfigError(f"{path}: duplicate node index {i}")
        seen[i] = True
        values[i] = v
    if not np.all(seen):
        raise ConfigError(f"{path}: missing node index {int(np.flatnonzero(~seen)[0])}")
    return values
