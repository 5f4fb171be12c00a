"""Principal eigenvalue of the weighted p-Laplacian and spectral threshold tools.

The principal eigenvalue is the infimum of the Rayleigh quotient
rho0(grad u) / rho0(u) over nonzero Dirichlet-admissible fields.  It is found
by preconditioned descent on the quotient with renormalization to
rho0(u) = 1 after every accepted step.  The same value bounds the spectrum of
the full double-phase problem from below: the threshold quotient that adds the
(p/q)||grad u||_q^q term has the same infimum, certified here by evaluating it
along upward scalings of the computed eigenfunction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvergenceError
from .grid import Grid, ScalarField, bump_field, cell_means, grad_magnitude
from .modular import DoublePhase, lq_norm_q, rho_theta0
from .operators import (
    Problem,
    interior_dual_norm,
    make_laplace_solver,
    p_mass_gradient,
    p_operator_gradient,
    residual,
)

__all__ = [
    "EigenOptions",
    "EigenResult",
    "SweepRow",
    "NonexistenceReport",
    "rayleigh_quotient",
    "principal_eigenvalue",
    "lambda_star_curve",
    "nonexistence_certificate",
]


@dataclass(frozen=True)
class EigenOptions:
    """Tolerances for the principal-eigenvalue descent.

    Convergence requires the eigen-residual dual norm to fall below ``tol``
    while the quotient has moved by less than ``stall_rtol`` (relative) over
    the last ``stall_window`` iterations.
    """

    tol: float = 1e-8
    max_iters: int = 20000
    initial_step: float = 0.1
    armijo: float = 1e-4
    stall_window: int = 10
    stall_rtol: float = 1e-10


@dataclass(frozen=True, eq=False)
class EigenResult:
    lambda_hat1: float
    eigenfunction: ScalarField  # normalized to rho0(u) = 1, nonnegative interior
    iterations: int
    residual: float


@dataclass(frozen=True)
class SweepRow:
    """One record of a lambda sweep; infeasible rows carry no minimizer data."""

    lam: float
    feasible: bool
    m_lambda: float | None
    residual: float | None
    min_u: float | None
    max_u: float | None
    iters: int

    def __post_init__(self):
        if not self.feasible and self.m_lambda is not None:
            raise ValueError("infeasible sweep rows cannot carry m_lambda")


@dataclass(frozen=True)
class NonexistenceReport:
    """Outcome of random Nehari-feasibility probes at lambda <= lambda_hat1."""

    lam: float
    lambda_hat1: float
    trials: int
    violations: int
    max_gap: float  # largest lam*rho0(u) - rho0(grad u) seen; expected <= 0


def rayleigh_quotient(dp: DoublePhase, u: ScalarField) -> float:
    """rho0(grad u) / rho0(u); scale-invariant by p-homogeneity."""
    if u.grid is not dp.grid:
        raise ValueError("field lives on a different grid than the problem data")
    den = rho_theta0(dp, cell_means(u.values, dp.grid))
    if den == 0.0:
        raise ValueError(
            "degenerate Rayleigh denominator: rho0(u) = 0 "
            "(u vanishes or is supported where the weight is zero)"
        )
    return rho_theta0(dp, grad_magnitude(u.values, dp.grid)) / den


def _normalized(dp: DoublePhase, values: np.ndarray) -> np.ndarray:
    den = rho_theta0(dp, cell_means(values, dp.grid))
    if den == 0.0:
        raise ValueError(
            "degenerate field: rho0(u) = 0 (u vanishes or is supported where the weight is zero)"
        )
    return values / den ** (1.0 / dp.p)


def _descend_quotient(dp, values, solve, *, stop, max_iters, step0, armijo=1e-4):
    """Preconditioned backtracking descent on the Rayleigh quotient.

    ``stop(history, resid)`` is evaluated once per iteration with the quotient
    history and the current eigen-residual dual norm.  Returns
    ``(values, quotient, resid, iterations, status)`` with status one of
    ``"stopped"`` (stop fired), ``"stalled"`` (no step accepted), or
    ``"max_iters"``.
    """
    grid = dp.grid
    idx = grid.interior_idx
    p = dp.p
    u = _normalized(dp, values)
    history: list[float] = []
    s = step0
    it = 0
    quot = np.inf
    resid = np.inf
    while it < max_iters:
        it += 1
        num = rho_theta0(dp, grad_magnitude(u, grid))
        den = rho_theta0(dp, cell_means(u, grid))
        quot = num / den
        rnod = p_operator_gradient(dp, u) - quot * p_mass_gradient(dp, u)
        resid = interior_dual_norm(rnod, grid)
        history.append(quot)
        if stop(history, resid):
            return u, quot, resid, it, "stopped"
        grad_r = (p / den) * rnod[idx]
        d = solve(grad_r)
        slope = -float(np.dot(grad_r, d))
        accepted = False
        for _ in range(60):
            v = u.copy()
            v[idx] -= s * d
            den_v = rho_theta0(dp, cell_means(v, grid))
            if den_v > 0.0:
                quot_v = rho_theta0(dp, grad_magnitude(v, grid)) / den_v
                if quot_v <= quot + armijo * s * slope:
                    u = v / den_v ** (1.0 / p)
                    accepted = True
                    s = min(2.0 * s, 1e6)
                    break
            s *= 0.5
        if not accepted:
            return u, quot, resid, it, "stalled"
    return u, quot, resid, it, "max_iters"


def _eigen_residual(dp: DoublePhase, u: np.ndarray) -> tuple[float, float]:
    """Quotient and eigen-residual dual norm for a rho0-normalized field."""
    den = rho_theta0(dp, cell_means(u, dp.grid))
    quot = rho_theta0(dp, grad_magnitude(u, dp.grid)) / den
    rnod = p_operator_gradient(dp, u) - quot * p_mass_gradient(dp, u)
    return quot, interior_dual_norm(rnod, dp.grid)


def _residual_polish(dp, u, solve, *, tol, max_iters=200):
    """Drive the eigen-residual below ``tol`` once the quotient hits its
    rounding floor, accepting preconditioned steps on residual decrease."""
    grid = dp.grid
    idx = grid.interior_idx
    p = dp.p
    quot, resid = _eigen_residual(dp, u)
    s = 1.0
    count = 0
    while resid > tol and count < max_iters:
        den = rho_theta0(dp, cell_means(u, grid))
        rnod = p_operator_gradient(dp, u) - quot * p_mass_gradient(dp, u)
        d = solve((p / den) * rnod[idx])
        accepted = False
        for _ in range(40):
            v = u.copy()
            v[idx] -= s * d
            den_v = rho_theta0(dp, cell_means(v, grid))
            if den_v > 0.0:
                v = v / den_v ** (1.0 / p)
                quot_v, resid_v = _eigen_residual(dp, v)
                if resid_v < resid:
                    u, quot, resid = v, quot_v, resid_v
                    accepted = True
                    s = min(2.0 * s, 1e3)
                    break
            s *= 0.5
        count += 1
        if not accepted:
            break
    return u, quot, resid, count


def principal_eigenvalue(
    dp: DoublePhase, opts: EigenOptions | None = None, init: ScalarField | None = None
) -> EigenResult:
    """Smallest eigenvalue of the weighted p-Laplacian Dirichlet problem.

    Minimizes the Rayleigh quotient over interior nodal values, renormalizing
    to rho0(u) = 1 after each accepted step, and returns the nonnegative
    representative of the minimizer.  Raises :class:`NonConvergenceError`
    carrying the best iterate if the budget runs out.
    """
    opts = opts or EigenOptions()
    grid = dp.grid
    start = init.values.copy() if init is not None else bump_field(grid).values.copy()
    start[grid.boundary_mask] = 0.0
    if not np.any(start):
        raise ValueError("initial field vanishes after applying the Dirichlet mask")

    window = opts.stall_window

    def stop(history: list[float], resid: float) -> bool:
        if resid > opts.tol:
            return False
        if len(history) <= window:
            return False
        r = history[-1]
        return abs(history[-1 - window] - r) <= opts.stall_rtol * max(1.0, abs(r))

    solve = make_laplace_solver(grid)
    u, quot, resid, it, status = _descend_quotient(
        dp, start, solve, stop=stop, max_iters=opts.max_iters,
        step0=opts.initial_step, armijo=opts.armijo,
    )
    if status != "stopped" and resid > opts.tol:
        u, quot, resid, extra = _residual_polish(dp, u, solve, tol=opts.tol)
        it += extra
    converged = resid <= opts.tol
    if np.sum(u[grid.interior_idx]) < 0.0:
        u = -u
    u = _normalized(dp, u)
    quot = rho_theta0(dp, grad_magnitude(u, grid)) / rho_theta0(dp, cell_means(u, grid))
    rnod = p_operator_gradient(dp, u) - quot * p_mass_gradient(dp, u)
    resid = interior_dual_norm(rnod, grid)
    result = EigenResult(
        lambda_hat1=quot, eigenfunction=ScalarField(u, grid), iterations=it, residual=resid
    )
    if not converged:
        raise NonConvergenceError(
            f"principal-eigenvalue descent did not converge in {it} iterations "
            f"(residual {resid:.3e}, status {status})",
            best=result,
        )
    return result


def lambda_star_curve(dp: DoublePhase, u: ScalarField, t_values) -> np.ndarray:
    """Threshold quotient [rho0(grad v) + (p/q)||grad v||_q^q] / rho0(v) at v = t u.

    Evaluated directly on the scaled fields.  Along an eigenfunction the curve
    decreases strictly to the principal eigenvalue as t grows, which is the
    desk-scale witness that the threshold equals the principal eigenvalue.
    """
    if u.grid is not dp.grid:
        raise ValueError("field lives on a different grid than the problem data")
    p, q = dp.p, dp.q
    if not p > q:
        raise ValueError("the threshold curve needs p > q")
    ts = np.asarray(t_values, dtype=float)
    if np.any(ts <= 0.0):
        raise ValueError("scaling values t must be positive")
    out = np.empty(ts.size)
    for k, t in enumerate(ts.ravel()):
        w = t * u.values
        den = rho_theta0(dp, cell_means(w, dp.grid))
        if den == 0.0:
            raise ValueError(
                "degenerate denominator: rho0(t u) = 0 "
                "(u vanishes or is supported where the weight is zero)"
            )
        gm = grad_magnitude(w, dp.grid)
        out[k] = (rho_theta0(dp, gm) + (p / q) * lq_norm_q(gm, dp.grid, q)) / den
    return out.reshape(ts.shape)


def nonexistence_certificate(
    prob: Problem,
    trials: int,
    rng_seed: int,
    lambda_hat1: float | None = None,
    eig_opts: EigenOptions | None = None,
) -> NonexistenceReport:
    """Probe random admissible fields for Nehari feasibility at lambda <= lambda_hat1.

    Each trial checks that lam * rho0(u) - rho0(grad u) <= 0 (so the Nehari
    projection is infeasible) and that the energy derivative does not vanish.
    The expected violation count is zero.
    """
    if trials <= 0:
        raise ValueError("certificate needs a positive trial count")
    dp = prob.dp
    lam1 = (
        lambda_hat1
        if lambda_hat1 is not None
        else principal_eigenvalue(dp, eig_opts).lambda_hat1
    )
    if prob.lam > lam1 * (1.0 + 1e-9):
        raise ValueError(
            f"certificate applies to lambda <= lambda_hat1 = {lam1:.12g}, got {prob.lam:.12g}"
        )
    grid = dp.grid
    rng = np.random.default_rng(rng_seed)
    violations = 0
    max_gap = -np.inf
    for _ in range(trials):
        vals = rng.standard_normal(grid.num_nodes)
        vals[grid.boundary_mask] = 0.0
        gap = prob.lam * rho_theta0(dp, cell_means(vals, grid)) - rho_theta0(
            dp, grad_magnitude(vals, grid)
        )
        res = residual(prob, ScalarField(vals, grid)).dual_norm
        if gap > 0.0 or res == 0.0:
            violations += 1
        max_gap = max(max_gap, gap)
    return NonexistenceReport(
        lam=prob.lam, lambda_hat1=lam1, trials=trials, violations=violations, max_gap=max_gap
    )
