"""Double-phase integrand, its modulars, the Luxemburg norm, and weights.

The integrand is theta(x, t) = a(x) t^p + t^q with exponents p >= q > 1 and a
nonnegative bounded weight a.  Its unweighted-power part t^q keeps the growth
envelope t^q <= theta <= c0 (t^p + 1) valid even where the weight vanishes,
which is the unbalanced regime this solver is built around.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import HypothesisError, HypothesisWarning
from .grid import Grid, cell_means, integrate_cells

__all__ = [
    "Exponents",
    "Weight",
    "DoublePhase",
    "theta",
    "growth_envelope_check",
    "rho_theta",
    "rho_theta0",
    "lq_norm_q",
    "luxemburg_norm",
    "constant_weight",
    "coordinate_weight",
    "distance_weight",
    "power_weight",
    "weight_from_nodal",
    "load_weight",
    "make_weight",
]


@dataclass(frozen=True)
class Exponents:
    """Growth exponents (p, q) with the ambient dimension used for hypothesis checks.

    Hard constraints (always): q > 1 and p >= q.  The full operator hypotheses
    (q < p < N, p/q < 1 + 1/N, hence p < q* = Nq/(N-q)) are errors in strict
    mode and warnings otherwise; relaxed mode exists so classical validation
    cases (p = q = 2, or 1D with p >= N) stay runnable.
    """

    p: float
    q: float
    ambient_dim: int = 2
    strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "ambient_dim", int(self.ambient_dim))
        if not self.q > 1.0:
            raise ValueError(f"exponent q must exceed 1, got q = {self.q}")
        if self.p < self.q:
            raise ValueError(f"exponents must satisfy p >= q, got p = {self.p} < q = {self.q}")
        if self.ambient_dim < 1:
            raise ValueError("ambient_dim must be a positive integer")
        issues = []
        if self.p == self.q:
            issues.append(f"p = q = {self.p} collapses the two phases into one power")
        if self.p >= self.ambient_dim:
            issues.append(f"p = {self.p} is not below the ambient dimension N = {self.ambient_dim}")
        if self.p / self.q >= 1.0 + 1.0 / self.ambient_dim:
            issues.append(f"p/q = {self.p / self.q:.6g} is not below 1 + 1/N = {1 + 1 / self.ambient_dim:.6g}")
        if self.q >= self.ambient_dim:
            issues.append(f"q = {self.q} >= N leaves the critical exponent q* undefined")
        if issues:
            msg = "; ".join(issues)
            if self.strict:
                raise HypothesisError(f"strict exponent hypotheses violated: {msg}")
            warnings.warn(f"relaxed exponents: {msg}", HypothesisWarning, stacklevel=2)

    @property
    def q_star(self) -> float:
        """Critical exponent Nq/(N-q); +inf when q >= N."""
        n = self.ambient_dim
        if self.q >= n:
            return math.inf
        return n * self.q / (n - self.q)


@dataclass(frozen=True, eq=False)
class Weight:
    """Nonnegative bounded weight sampled at nodes and at cell midpoints.

    Cell samples feed every quadrature; nodal samples exist for IO round-trips.
    ``interior_positive`` is the computable face of the positivity hypothesis
    a(x) > 0 on the open domain (cell midpoints all lie in the interior).
    """

    nodal: np.ndarray
    cells: np.ndarray
    grid: Grid
    name: str = "custom"

    def __post_init__(self):
        nodal = np.asarray(self.nodal, dtype=float)
        cells = np.asarray(self.cells, dtype=float)
        if nodal.shape != (self.grid.num_nodes,):
            raise ValueError(f"expected {self.grid.num_nodes} nodal weight samples, got {nodal.shape}")
        if cells.shape != (self.grid.num_cells,):
            raise ValueError(f"expected {self.grid.num_cells} cell weight samples, got {cells.shape}")
        if not (np.all(np.isfinite(nodal)) and np.all(np.isfinite(cells))):
            raise ValueError("weight samples must be finite")
        if np.any(nodal < 0.0) or np.any(cells < 0.0):
            raise ValueError("weight samples must be nonnegative")
        if not (np.any(nodal > 0.0) or np.any(cells > 0.0)):
            raise ValueError("weight must be positive somewhere (a in L^inf_+ \\ {0})")
        nodal.setflags(write=False)
        cells.setflags(write=False)
        object.__setattr__(self, "nodal", nodal)
        object.__setattr__(self, "cells", cells)

    @property
    def sup_norm(self) -> float:
        return float(max(self.nodal.max(), self.cells.max()))

    @property
    def c0(self) -> float:
        """Envelope constant: smallest convenient c0 = sup a + 1."""
        return self.sup_norm + 1.0

    def interior_positive(self) -> bool:
        return bool(np.all(self.cells > 0.0))


def constant_weight(grid: Grid, value: float = 1.0) -> Weight:
    v = float(value)
    return Weight(np.full(grid.num_nodes, v), np.full(grid.num_cells, v), grid, name="constant")


def coordinate_weight(grid: Grid) -> Weight:
    """a(x) = x_1, sampled exactly at nodes and at cell midpoints."""
    return Weight(
        grid.node_coords[:, 0].copy(), grid.cell_midpoints[:, 0].copy(), grid, name="linear"
    )


def distance_weight(grid: Grid) -> Weight:
    """a(x) = distance to the box boundary."""

    def dist(coords: np.ndarray) -> np.ndarray:
        per_axis = [
            np.minimum(coords[:, d] - lo, hi - coords[:, d])
            for d, (lo, hi) in enumerate(grid.spec.extents)
        ]
        return np.minimum.reduce(per_axis)

    return Weight(dist(grid.node_coords), dist(grid.cell_midpoints), grid, name="distance")


def power_weight(grid: Grid, alpha: float) -> Weight:
    """a(x) = x_1^alpha with alpha > 0 (requires x_1 >= 0 on the box)."""
    if not alpha > 0:
        raise ValueError(f"power weight needs alpha > 0, got {alpha}")
    lo = grid.spec.extents[0][0]
    if lo < 0:
        raise ValueError("power weight x_1^alpha needs the box to lie in x_1 >= 0")
    return Weight(
        grid.node_coords[:, 0] ** alpha,
        grid.cell_midpoints[:, 0] ** alpha,
        grid,
        name=f"power({alpha:g})",
    )


def weight_from_nodal(grid: Grid, values, name: str = "nodal") -> Weight:
    """Weight from raw nodal samples; cell samples are corner averages."""
    nodal = np.asarray(values, dtype=float)
    return Weight(nodal, cell_means(nodal, grid), grid, name=name)


def load_weight(grid: Grid, path) -> Weight:
    """One real per node, newline-separated, row-major node order."""
    text = Path(path).read_text()
    vals = np.array([float(tok) for tok in text.split()], dtype=float)
    if vals.size != grid.num_nodes:
        raise ValueError(
            f"weight file {path} holds {vals.size} values, grid has {grid.num_nodes} nodes"
        )
    return weight_from_nodal(grid, vals, name=f"file:{path}")


def make_weight(grid: Grid, family: str, value: float = 1.0, alpha: float | None = None) -> Weight:
    if family == "constant":
        return constant_weight(grid, value)
    if family == "linear":
        return coordinate_weight(grid)
    if family == "distance":
        return distance_weight(grid)
    if family == "power":
        if alpha is None:
            raise ValueError("power weight family requires alpha")
        return power_weight(grid, alpha)
    raise ValueError(f"unknown weight family {family!r}")


@dataclass(frozen=True, eq=False)
class DoublePhase:
    """Exponents, weight, and grid bundled as the problem data."""

    exponents: Exponents
    weight: Weight
    grid: Grid

    def __post_init__(self):
        if self.weight.grid is not self.grid:
            if (
                self.weight.nodal.shape != (self.grid.num_nodes,)
                or self.weight.cells.shape != (self.grid.num_cells,)
            ):
                raise ValueError("weight and grid shapes disagree")
        if self.exponents.strict and not self.weight.interior_positive():
            raise HypothesisError(
                "strict mode requires the weight to be positive at every interior cell"
            )
        if not self.exponents.strict and not self.weight.interior_positive():
            warnings.warn(
                "weight vanishes on some interior cells; degenerate quotients may occur",
                HypothesisWarning,
                stacklevel=2,
            )

    @property
    def p(self) -> float:
        return self.exponents.p

    @property
    def q(self) -> float:
        return self.exponents.q


def theta(dp: DoublePhase, cell: int, t: float) -> float:
    """Integrand value a(cell) t^p + t^q for t >= 0."""
    t = float(t)
    if t < 0.0:
        raise ValueError(f"theta is defined on t >= 0, got t = {t}")
    a = float(dp.weight.cells[cell])
    return a * t**dp.p + t**dp.q


def growth_envelope_check(dp: DoublePhase, samples: Iterable[tuple[int, float]]) -> bool:
    """True iff t^q <= theta(x, t) <= c0 (t^p + 1) at every sample, c0 = sup a + 1."""
    c0 = dp.weight.c0
    for cell, t in samples:
        t = float(t)
        if t < 0.0:
            raise ValueError(f"envelope samples need t >= 0, got t = {t}")
        val = theta(dp, cell, t)
        if not (t**dp.q <= val <= c0 * (t**dp.p + 1.0)):
            return False
    return True


def rho_theta0(dp: DoublePhase, v: np.ndarray) -> float:
    """Weighted-power modular: integral of a(x) |v|^p over the cells."""
    mags = np.abs(np.asarray(v, dtype=float))
    return integrate_cells(dp.weight.cells * mags**dp.p, dp.grid)


def lq_norm_q(v: np.ndarray, grid: Grid, q: float) -> float:
    """Integral of |v|^q (the q-th power of the L^q norm, not its root)."""
    if not q > 1.0:
        raise ValueError(f"exponent q must exceed 1, got {q}")
    mags = np.abs(np.asarray(v, dtype=float))
    return integrate_cells(mags**q, grid)


def rho_theta(dp: DoublePhase, v: np.ndarray) -> float:
    """Full modular; equals rho_theta0 + the q-power integral by construction."""
    return rho_theta0(dp, v) + lq_norm_q(v, dp.grid, dp.q)


def luxemburg_norm(dp: DoublePhase, v: np.ndarray) -> float:
    """Gauge norm inf{lam > 0 : rho_theta(v / lam) <= 1}.

    The map lam -> rho_theta(v/lam) is continuous and strictly decreasing for
    v != 0, so the norm is the unique root of rho = 1.  Bracketed by repeated
    doubling/halving from lam = 1, then bisected to relative tolerance 1e-12.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("luxemburg_norm needs finite magnitudes")
    if not np.any(v):
        return 0.0

    def rho(lam: float) -> float:
        return rho_theta(dp, v / lam)

    lo = hi = 1.0
    r1 = rho(1.0)
    if r1 == 1.0:
        return 1.0
    if r1 > 1.0:
        for _ in range(200):
            hi *= 2.0
            if rho(hi) <= 1.0:
                break
        else:
            raise RuntimeError("failed to bracket the Luxemburg norm from above")
        lo = hi / 2.0
    else:
        for _ in range(200):
            lo /= 2.0
            if rho(lo) >= 1.0:
                break
        else:
            raise RuntimeError("failed to bracket the Luxemburg norm from below")
        hi = lo * 2.0

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rho(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return 0.5 * (lo + hi)
