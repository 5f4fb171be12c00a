"""Energy functional, weak-form operator pairings, and nodal residual assembly.

The energy of a Dirichlet-admissible field u at parameter lambda is

    (1/p) rho0(grad u) + (1/q) ||grad u||_q^q - (lambda/p) rho0(u)

with both u and grad u collocated on the cells, so the functional is an exact
differentiable function of the interior nodal values.  The pairings below are
its Gateaux derivative split into the weighted-p flux, the q flux, and the
weighted mass term; ``residual`` assembles the derivative against every
interior nodal hat field at once via the adjoint scatter operators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .grid import (
    Grid,
    ScalarField,
    cell_means,
    cell_means_adjoint,
    grad_adjoint,
    grad_components,
    integrate_cells,
)
from .modular import DoublePhase, lq_norm_q, rho_theta0

__all__ = [
    "Problem",
    "Residual",
    "default_epsilon",
    "energy",
    "pairing_weighted_p",
    "pairing_q",
    "energy_derivative",
    "energy_gradient",
    "residual",
    "make_laplace_solver",
    "dirichlet_stiffness",
]


@dataclass(frozen=True, eq=False)
class Problem:
    """Double-phase data plus the spectral parameter and gradient regularization.

    ``epsilon_reg`` smooths |grad u|^{s-2} near zero-gradient cells inside the
    pairings only; the energy itself is never regularized.
    """

    dp: DoublePhase
    lam: float
    epsilon_reg: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "epsilon_reg", float(self.epsilon_reg))
        if not self.lam > 0.0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.epsilon_reg < 0.0:
            raise ValueError(f"epsilon_reg must be nonnegative, got {self.epsilon_reg}")


@dataclass(frozen=True, eq=False)
class Residual:
    """Values of the energy derivative against every interior nodal hat field.

    ``dual_norm`` is the volume-weighted Euclidean norm
    sqrt(sum_i r_i^2 vol_i), which keeps stopping criteria comparable across
    resolutions.
    """

    values: np.ndarray  # one entry per interior node, row-major interior order
    dual_norm: float
    grid: Grid


def default_epsilon(grid: Grid) -> float:
    """Gradient regularization scaled to the inverse box diameter."""
    return 1e-8 / grid.diameter


def _check_grid(dp: DoublePhase, *fields: ScalarField) -> None:
    for f in fields:
        if f.grid is not dp.grid:
            raise ValueError("field lives on a different grid than the problem data")


def _flux_weight(mag: np.ndarray, s: float, eps: float, *, reject_singular: bool) -> np.ndarray:
    """(|g|^2 + eps^2)^{(s-2)/2} evaluated safely.

    With eps = 0 and s < 2 the weight is singular at zero-gradient cells: the
    public pairings reject that case, while internal assemblies use the
    continuous extension |g|^{s-2} g -> 0.
    """
    if eps > 0.0:
        return (mag * mag + eps * eps) ** ((s - 2.0) / 2.0)
    if s == 2.0:
        return np.ones_like(mag)
    if s > 2.0:
        return mag ** (s - 2.0)
    if np.any(mag == 0.0):
        if reject_singular:
            raise ValueError(
                "zero-gradient cell makes |grad u|^{s-2} singular for s < 2; "
                "set epsilon_reg > 0"
            )
        return np.where(mag > 0.0, mag, 1.0) ** (s - 2.0) * (mag > 0.0)
    return mag ** (s - 2.0)


def _sign_power(vals: np.ndarray, s: float) -> np.ndarray:
    """|t|^{s-2} t with the continuous extension 0 at t = 0 (any s > 1)."""
    return np.sign(vals) * np.abs(vals) ** (s - 1.0)


def energy(prob: Problem, u: ScalarField) -> float:
    """Value of the double-phase energy at u."""
    _check_grid(prob.dp, u)
    dp = prob.dp
    gmag = _grad_mag(u.values, dp.grid)
    ucells = cell_means(u.values, dp.grid)
    return (
        rho_theta0(dp, gmag) / dp.p
        + lq_norm_q(gmag, dp.grid, dp.q) / dp.q
        - prob.lam * rho_theta0(dp, ucells) / dp.p
    )


def _grad_mag(values: np.ndarray, grid: Grid) -> np.ndarray:
    comp = grad_components(values, grid)
    if grid.dimension == 1:
        return np.abs(comp[0])
    return np.sqrt(np.sum(comp * comp, axis=0))


def pairing_weighted_p(prob: Problem, u: ScalarField, h: ScalarField) -> float:
    """Weighted p-flux pairing: integral of a |grad u|^{p-2} grad u . grad h."""
    _check_grid(prob.dp, u, h)
    dp = prob.dp
    gu = grad_components(u.values, dp.grid)
    gh = grad_components(h.values, dp.grid)
    mag = _grad_mag(u.values, dp.grid)
    w = _flux_weight(mag, dp.p, prob.epsilon_reg, reject_singular=True)
    dot = np.sum(gu * gh, axis=0)
    return integrate_cells(dp.weight.cells * w * dot, dp.grid)


def pairing_q(prob: Problem, u: ScalarField, h: ScalarField) -> float:
    """Unweighted q-flux pairing: integral of |grad u|^{q-2} grad u . grad h."""
    _check_grid(prob.dp, u, h)
    dp = prob.dp
    gu = grad_components(u.values, dp.grid)
    gh = grad_components(h.values, dp.grid)
    mag = _grad_mag(u.values, dp.grid)
    w = _flux_weight(mag, dp.q, prob.epsilon_reg, reject_singular=True)
    dot = np.sum(gu * gh, axis=0)
    return integrate_cells(w * dot, dp.grid)


def energy_derivative(prob: Problem, u: ScalarField, h: ScalarField) -> float:
    """Directional derivative of the energy at u along h.

    Sum of both flux pairings minus lambda times the weighted mass term
    integral of a |u|^{p-2} u h (collocated at cell midpoints).
    """
    _check_grid(prob.dp, u, h)
    dp = prob.dp
    ucells = cell_means(u.values, dp.grid)
    hcells = cell_means(h.values, dp.grid)
    mass = integrate_cells(dp.weight.cells * _sign_power(ucells, dp.p) * hcells, dp.grid)
    return pairing_weighted_p(prob, u, h) + pairing_q(prob, u, h) - prob.lam * mass


def energy_gradient(prob: Problem, u: ScalarField, *, reject_singular: bool = True) -> np.ndarray:
    """Assembled derivative against every nodal hat field; boundary entries zeroed.

    Identical to evaluating ``energy_derivative`` on each interior basis field,
    but assembled in one pass through the adjoint scatter operators.
    """
    _check_grid(prob.dp, u)
    dp = prob.dp
    grid = dp.grid
    vol = grid.cell_volumes
    gu = grad_components(u.values, grid)
    mag = _grad_mag(u.values, grid)
    wp = _flux_weight(mag, dp.p, prob.epsilon_reg, reject_singular=reject_singular)
    wq = _flux_weight(mag, dp.q, prob.epsilon_reg, reject_singular=reject_singular)
    coef = vol * (dp.weight.cells * wp + wq)
    r = grad_adjoint(coef[None, :] * gu, grid)
    ucells = cell_means(u.values, grid)
    r -= prob.lam * cell_means_adjoint(vol * dp.weight.cells * _sign_power(ucells, dp.p), grid)
    r[grid.boundary_mask] = 0.0
    return r


def residual(prob: Problem, u: ScalarField) -> Residual:
    """Energy derivative paired with every interior hat field, with its dual norm."""
    r = energy_gradient(prob, u)
    grid = prob.dp.grid
    vals = r[grid.interior_idx]
    dual = float(np.sqrt(np.sum(vals * vals * grid.node_volumes[grid.interior_idx])))
    return Residual(values=vals, dual_norm=dual, grid=grid)


# ---------------------------------------------------------------------------
# spectral assemblies for the weighted p-Laplacian alone (no q term, no lambda)

def p_operator_gradient(dp: DoublePhase, values: np.ndarray) -> np.ndarray:
    """Nodal assembly of the weighted p-flux pairing against each hat field."""
    grid = dp.grid
    gu = grad_components(values, grid)
    if grid.dimension == 1:
        mag = np.abs(gu[0])
    else:
        mag = np.sqrt(np.sum(gu * gu, axis=0))
    w = _flux_weight(mag, dp.p, 0.0, reject_singular=False)
    coef = grid.cell_volumes * dp.weight.cells * w
    r = grad_adjoint(coef[None, :] * gu, grid)
    r[grid.boundary_mask] = 0.0
    return r


def p_mass_gradient(dp: DoublePhase, values: np.ndarray) -> np.ndarray:
    """Nodal assembly of the weighted mass pairing integral a |u|^{p-2} u e_i."""
    grid = dp.grid
    ucells = cell_means(values, grid)
    r = cell_means_adjoint(grid.cell_volumes * dp.weight.cells * _sign_power(ucells, dp.p), grid)
    r[grid.boundary_mask] = 0.0
    return r


def interior_dual_norm(nodal: np.ndarray, grid: Grid) -> float:
    vals = nodal[grid.interior_idx]
    return float(np.sqrt(np.sum(vals * vals * grid.node_volumes[grid.interior_idx])))


# ---------------------------------------------------------------------------
# linear Dirichlet stiffness used as a descent preconditioner

def _gradient_matrix(grid: Grid) -> sp.coo_matrix:
    n = grid.num_nodes
    m = grid.num_cells
    if grid.dimension == 1:
        h = grid.spacings[0]
        c = np.arange(m)
        rows = np.concatenate([c, c])
        cols = np.concatenate([c, c + 1])
        data = np.concatenate([np.full(m, -1.0 / h), np.full(m, 1.0 / h)])
        return sp.coo_matrix((data, (rows, cols)), shape=(m, n))
    n0, n1 = grid.shape
    h0, h1 = grid.spacings
    c0, c1 = np.meshgrid(np.arange(n0 - 1), np.arange(n1 - 1), indexing="ij")
    i00 = (c0 * n1 + c1).ravel()
    i10 = ((c0 + 1) * n1 + c1).ravel()
    i01 = i00 + 1
    i11 = i10 + 1
    cell = np.arange(m)
    rows = []
    cols = []
    data = []
    # x component rows [0, m), y component rows [m, 2m)
    rows += [cell] * 4
    cols += [i10, i11, i00, i01]
    data += [np.full(m, 0.5 / h0), np.full(m, 0.5 / h0), np.full(m, -0.5 / h0), np.full(m, -0.5 / h0)]
    rows += [cell + m] * 4
    cols += [i01, i11, i00, i10]
    data += [np.full(m, 0.5 / h1), np.full(m, 0.5 / h1), np.full(m, -0.5 / h1), np.full(m, -0.5 / h1)]
    return sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * m, n),
    )


def dirichlet_stiffness(grid: Grid) -> sp.csr_matrix:
    """Interior block of G^T diag(vol) G for the discrete gradient G."""
    g = _gradient_matrix(grid).tocsr()
    vol = np.tile(grid.cell_volumes, grid.dimension)
    k = (g.T @ sp.diags(vol) @ g).tocsr()
    idx = grid.interior_idx
    return k[idx][:, idx]


def make_laplace_solver(grid: Grid) -> Callable[[np.ndarray], np.ndarray]:
    """Factorized solve with the interior Dirichlet stiffness (descent preconditioner)."""
    lu = splu(dirichlet_stiffness(grid).tocsc())
    return lu.solve
