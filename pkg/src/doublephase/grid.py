"""Uniform box grids with Dirichlet masks, midpoint quadrature, and first-difference gradients.

Every integral in the solver is a sum of per-cell values weighted by cell
volumes.  Nodal fields are collocated at cell midpoints (corner averages) so
that the field itself, its gradient, and all modulars share one quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "GridSpec",
    "Grid",
    "ScalarField",
    "GradientField",
    "build_grid",
    "gradient",
    "gradient_adjoint",
    "integrate_cells",
    "nodal_to_cell",
    "nodal_to_cell_adjoint",
    "field_from_values",
    "dirichlet_field",
    "field_from_function",
    "bump_field",
    "zero_field",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned box with per-axis bounds and node counts.

    At least 3 nodes per axis are required so that the grid has an interior
    node to carry Dirichlet degrees of freedom.
    """

    dimension: int
    extents: tuple[tuple[float, float], ...]
    nodes_per_axis: tuple[int, ...]

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        extents = tuple((float(lo), float(hi)) for lo, hi in self.extents)
        nodes = tuple(int(n) for n in self.nodes_per_axis)
        if len(extents) != self.dimension or len(nodes) != self.dimension:
            raise ValueError("extents and nodes_per_axis need one entry per axis")
        for lo, hi in extents:
            if not hi > lo:
                raise ValueError(f"axis bounds must satisfy hi > lo, got ({lo}, {hi})")
        for n in nodes:
            if n < 3:
                raise ValueError(f"need >= 3 nodes per axis (no interior node otherwise), got {n}")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "nodes_per_axis", nodes)

    @property
    def box_volume(self) -> float:
        out = 1.0
        for lo, hi in self.extents:
            out *= hi - lo
        return out

    @property
    def diameter(self) -> float:
        return float(np.sqrt(sum((hi - lo) ** 2 for lo, hi in self.extents)))


@dataclass(frozen=True, eq=False)
class Grid:
    """Discrete carrier for the box domain and its Dirichlet boundary.

    Nodes are ordered row-major over the axes (axis 0 slowest).  Cells are the
    tensor-product intervals between adjacent nodes, ordered the same way.
    ``node_volumes`` are the lumped dual volumes used to weight nodal residual
    norms so that stopping criteria are resolution-consistent.
    """

    spec: GridSpec
    node_coords: np.ndarray      # (num_nodes, dimension)
    cell_volumes: np.ndarray     # (num_cells,)
    boundary_mask: np.ndarray    # (num_nodes,) bool, True on Dirichlet nodes
    spacings: tuple[float, ...]
    cell_midpoints: np.ndarray   # (num_cells, dimension)
    node_volumes: np.ndarray     # (num_nodes,)
    interior_idx: np.ndarray     # indices of unmasked nodes

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def shape(self) -> tuple[int, ...]:
        return self.spec.nodes_per_axis

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return tuple(n - 1 for n in self.spec.nodes_per_axis)

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.cell_shape))

    @property
    def diameter(self) -> float:
        return self.spec.diameter


def build_grid(spec: GridSpec) -> Grid:
    """Build the uniform grid for ``spec``.

    Cell volumes are the product of the axis spacings; the boundary mask marks
    exactly the outer node layer.
    """
    axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(spec.extents, spec.nodes_per_axis)]
    spacings = tuple(
        (hi - lo) / (n - 1) for (lo, hi), n in zip(spec.extents, spec.nodes_per_axis)
    )
    if spec.dimension == 1:
        (x,) = axes
        n = x.size
        coords = x[:, None]
        mask = np.zeros(n, dtype=bool)
        mask[0] = mask[-1] = True
        h = spacings[0]
        volumes = np.full(n - 1, h)
        mids = (0.5 * (x[:-1] + x[1:]))[:, None]
        node_vol = np.full(n, h)
        node_vol[0] = node_vol[-1] = 0.5 * h
    else:
        x0, x1 = axes
        n0, n1 = x0.size, x1.size
        g0, g1 = np.meshgrid(x0, x1, indexing="ij")
        coords = np.column_stack([g0.ravel(), g1.ravel()])
        mask2 = np.zeros((n0, n1), dtype=bool)
        mask2[0, :] = mask2[-1, :] = True
        mask2[:, 0] = mask2[:, -1] = True
        mask = mask2.ravel()
        h0, h1 = spacings
        volumes = np.full((n0 - 1) * (n1 - 1), h0 * h1)
        m0, m1 = np.meshgrid(0.5 * (x0[:-1] + x0[1:]), 0.5 * (x1[:-1] + x1[1:]), indexing="ij")
        mids = np.column_stack([m0.ravel(), m1.ravel()])
        nv = np.full((n0, n1), h0 * h1)
        nv[0, :] *= 0.5
        nv[-1, :] *= 0.5
        nv[:, 0] *= 0.5
        nv[:, -1] *= 0.5
        node_vol = nv.ravel()
    return Grid(
        spec=spec,
        node_coords=_readonly(coords),
        cell_volumes=_readonly(volumes),
        boundary_mask=_readonly(mask),
        spacings=spacings,
        cell_midpoints=_readonly(mids),
        node_volumes=_readonly(node_vol),
        interior_idx=_readonly(np.flatnonzero(~mask)),
    )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One finite real value per node; the discrete stand-in for u on the box.

    Dirichlet-admissible fields vanish on every masked node; use
    :func:`dirichlet_field` to construct them from arbitrary nodal data.
    """

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.num_nodes,):
            raise ValueError(f"expected {self.grid.num_nodes} nodal values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("nodal values must be finite")
        object.__setattr__(self, "values", _readonly(vals))

    def is_admissible(self) -> bool:
        return bool(np.all(self.values[self.grid.boundary_mask] == 0.0))

    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior_idx]


@dataclass(frozen=True, eq=False)
class GradientField:
    """Per-cell gradient components, one row per axis."""

    components: np.ndarray  # (dimension, num_cells)
    grid: Grid

    def __post_init__(self):
        comp = np.asarray(self.components, dtype=float)
        want = (self.grid.dimension, self.grid.num_cells)
        if comp.shape != want:
            raise ValueError(f"expected components of shape {want}, got {comp.shape}")
        object.__setattr__(self, "components", _readonly(comp))

    def magnitude(self) -> np.ndarray:
        if self.grid.dimension == 1:
            return np.abs(self.components[0])
        return np.sqrt(np.sum(self.components * self.components, axis=0))


# ---------------------------------------------------------------------------
# array-level kernels (hot paths work on raw nodal arrays)

def grad_components(values: np.ndarray, grid: Grid) -> np.ndarray:
    """First-difference gradient per cell; 2D averages the two parallel edge
    differences per axis (the bilinear-interpolant gradient at cell centers)."""
    if grid.dimension == 1:
        h = grid.spacings[0]
        return ((values[1:] - values[:-1]) / h)[None, :]
    n0, n1 = grid.shape
    h0, h1 = grid.spacings
    u = values.reshape(n0, n1)
    dx = (u[1:, :-1] - u[:-1, :-1] + u[1:, 1:] - u[:-1, 1:]) / (2.0 * h0)
    dy = (u[:-1, 1:] - u[:-1, :-1] + u[1:, 1:] - u[1:, :-1]) / (2.0 * h1)
    return np.stack([dx.ravel(), dy.ravel()])


def grad_adjoint(components: np.ndarray, grid: Grid) -> np.ndarray:
    """Adjoint of :func:`grad_components`: nodal r with r . u = sum_c F_c . (grad u)_c."""
    if grid.dimension == 1:
        h = grid.spacings[0]
        f = components[0]
        r = np.zeros(grid.num_nodes)
        r[1:] += f / h
        r[:-1] -= f / h
        return r
    n0, n1 = grid.shape
    h0, h1 = grid.spacings
    fx = components[0].reshape(n0 - 1, n1 - 1) / (2.0 * h0)
    fy = components[1].reshape(n0 - 1, n1 - 1) / (2.0 * h1)
    r = np.zeros((n0, n1))
    r[1:, :-1] += fx
    r[1:, 1:] += fx
    r[:-1, :-1] -= fx
    r[:-1, 1:] -= fx
    r[:-1, 1:] += fy
    r[1:, 1:] += fy
    r[:-1, :-1] -= fy
    r[1:, :-1] -= fy
    return r.ravel()


def grad_magnitude(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Euclidean norm of the per-cell gradient of a raw nodal array."""
    comp = grad_components(values, grid)
    if grid.dimension == 1:
        return np.abs(comp[0])
    return np.sqrt(np.sum(comp * comp, axis=0))


def cell_means(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Average of each cell's corner nodal values (midpoint collocation)."""
    if grid.dimension == 1:
        return 0.5 * (values[1:] + values[:-1])
    n0, n1 = grid.shape
    u = values.reshape(n0, n1)
    return (0.25 * (u[:-1, :-1] + u[1:, :-1] + u[:-1, 1:] + u[1:, 1:])).ravel()


def cell_means_adjoint(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Adjoint of :func:`cell_means`: nodal r with r . u = sum_c f_c * u_c."""
    if grid.dimension == 1:
        r = np.zeros(grid.num_nodes)
        r[1:] += 0.5 * f
        r[:-1] += 0.5 * f
        return r
    n0, n1 = grid.shape
    g = 0.25 * f.reshape(n0 - 1, n1 - 1)
    r = np.zeros((n0, n1))
    r[:-1, :-1] += g
    r[1:, :-1] += g
    r[:-1, 1:] += g
    r[1:, 1:] += g
    return r.ravel()


# ---------------------------------------------------------------------------
# field-level operations

def gradient(u: ScalarField) -> GradientField:
    """Per-cell first-difference gradient of a nodal field.

    Exact for fields that are linear along each axis.
    """
    return GradientField(grad_components(u.values, u.grid), u.grid)


def gradient_adjoint(components: np.ndarray, grid: Grid) -> np.ndarray:
    return grad_adjoint(np.asarray(components, dtype=float), grid)


def nodal_to_cell(u: ScalarField) -> np.ndarray:
    return cell_means(u.values, u.grid)


def nodal_to_cell_adjoint(f: np.ndarray, grid: Grid) -> np.ndarray:
    return cell_means_adjoint(np.asarray(f, dtype=float), grid)


def integrate_cells(f: np.ndarray, grid: Grid) -> float:
    """Midpoint quadrature: sum of per-cell values times cell volumes."""
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.num_cells,):
        raise ValueError(f"expected {grid.num_cells} cell values, got shape {f.shape}")
    return float(np.dot(f, grid.cell_volumes))


# ---------------------------------------------------------------------------
# constructors

def field_from_values(grid: Grid, values) -> ScalarField:
    return ScalarField(np.array(values, dtype=float), grid)


def dirichlet_field(grid: Grid, values) -> ScalarField:
    """Copy ``values`` and zero every masked node."""
    vals = np.array(values, dtype=float)
    vals[grid.boundary_mask] = 0.0
    return ScalarField(vals, grid)


def field_from_function(grid: Grid, fn: Callable[..., np.ndarray]) -> ScalarField:
    """Sample ``fn`` on the node coordinates; fn receives one array per axis."""
    cols = [grid.node_coords[:, d] for d in range(grid.dimension)]
    return ScalarField(np.asarray(fn(*cols), dtype=float), grid)


def bump_field(grid: Grid) -> ScalarField:
    """Product-of-sines bump: positive in the interior, zero on the boundary."""
    vals = np.ones(grid.num_nodes)
    for d, (lo, hi) in enumerate(grid.spec.extents):
        vals = vals * np.sin(np.pi * (grid.node_coords[:, d] - lo) / (hi - lo))
    return dirichlet_field(grid, vals)


def zero_field(grid: Grid) -> ScalarField:
    return ScalarField(np.zeros(grid.num_nodes), grid)
