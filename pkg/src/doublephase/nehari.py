"""Nehari manifold machinery: fiber map, closed-form projection, and minimization.

The manifold is the set of nonzero admissible fields whose energy derivative
vanishes against the field itself.  Along the ray through a field u the
constraint value is the fiber map

    k(t) = t^p (rho0(grad u) - lam rho0(u)) + t^q ||grad u||_q^q,

which has exactly one positive root when lam rho0(u) > rho0(grad u); the root
is the closed-form projection scale t0.  Minimizing the energy over the
manifold by projected preconditioned descent produces, for every lam above the
principal eigenvalue, a nonnegative eigenpair of the double-phase problem.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, NonConvergenceError, StalePositivityWarning
from .grid import ScalarField, bump_field, cell_means, dirichlet_field, grad_magnitude
from .modular import lq_norm_q, rho_theta0
from .operators import Problem, energy, energy_gradient, interior_dual_norm, make_laplace_solver, residual
from .spectrum import EigenOptions, _descend_quotient, principal_eigenvalue

__all__ = [
    "NehariPoint",
    "SolveOptions",
    "MinimizerResult",
    "EigenpairDiagnostics",
    "fiber_map",
    "nehari_project",
    "minimize_on_nehari",
    "multistart_minimize",
    "best_result",
    "extract_eigenpair",
]


@dataclass(frozen=True, eq=False)
class NehariPoint:
    """A projected field t0 * u on the manifold with its energy and constraint gap.

    Construction re-evaluates both invariants from scratch: the constraint gap
    must vanish to rounding, and the energy must equal
    (1/q - 1/p) ||grad(t0 u)||_q^q.
    """

    u: ScalarField  # the projected field t0 * (input field)
    t0: float
    energy: float
    constraint_gap: float

    def __post_init__(self):
        if not abs(self.constraint_gap) <= 1e-9 * (1.0 + abs(self.energy)):
            raise ValueError(
                f"projected point violates the manifold constraint: gap {self.constraint_gap:.3e}"
            )


@dataclass(frozen=True)
class SolveOptions:
    """Stopping and step-control parameters for the manifold minimization."""

    tol: float = 1e-7
    max_iters: int = 5000
    initial_step: float = 0.1
    armijo: float = 1e-4
    stall_window: int = 20
    stall_rtol: float = 1e-12
    lambda_hat1: float | None = None  # skip the internal eigensolve when supplied
    eig: EigenOptions = EigenOptions()


@dataclass(frozen=True, eq=False)
class MinimizerResult:
    u_hat: ScalarField
    m_lambda: float
    residual: float
    iterations: int
    positivity: tuple[float, float]  # (min, max) over interior nodes
    converged: bool
    stop_reason: str
    energies: tuple[float, ...]  # accepted-step energy history, nonincreasing


@dataclass(frozen=True)
class EigenpairDiagnostics:
    residual: float
    residual_unregularized: float | None
    sup_norm: float
    interior_min: float
    positivity_violated: bool


def _require_two_phases(prob: Problem) -> None:
    if prob.dp.p == prob.dp.q:
        raise ValueError(
            "Nehari machinery needs p > q (the projection exponent 1/(p - q) is undefined at p = q)"
        )


def fiber_map(prob: Problem, u: ScalarField, t: float) -> float:
    """Constraint value along the ray: t^p (rho0(grad u) - lam rho0(u)) + t^q ||grad u||_q^q."""
    if not t > 0.0:
        raise ValueError(f"fiber map is defined for t > 0, got {t}")
    dp = prob.dp
    if not np.any(u.values):
        raise ValueError("fiber map needs a nonzero field")
    gm = grad_magnitude(u.values, dp.grid)
    a = rho_theta0(dp, gm) - prob.lam * rho_theta0(dp, cell_means(u.values, dp.grid))
    b = lq_norm_q(gm, dp.grid, dp.q)
    return t**dp.p * a + t**dp.q * b


def nehari_project(prob: Problem, u: ScalarField) -> NehariPoint:
    """Scale u onto the manifold via the closed-form root of the fiber map.

    Requires lam rho0(u) > rho0(grad u); otherwise the ray never meets the
    manifold and :class:`InfeasibleError` is raised carrying the signed gap
    (this is the computational face of nonexistence at lam <= lambda_hat1).
    The closed form is cross-checked against bisection on the fiber map.
    """
    _require_two_phases(prob)
    dp = prob.dp
    if u.grid is not dp.grid:
        raise ValueError("field lives on a different grid than the problem data")
    if not np.any(u.values):
        raise ValueError("cannot project the zero field")
    p, q = dp.p, dp.q
    gm = grad_magnitude(u.values, dp.grid)
    rho_u = rho_theta0(dp, cell_means(u.values, dp.grid))
    rho_gu = rho_theta0(dp, gm)
    b = lq_norm_q(gm, dp.grid, q)
    d = prob.lam * rho_u - rho_gu
    tol_feas = 1e-12 * (1.0 + prob.lam * rho_u)
    if d <= tol_feas:
        raise InfeasibleError(
            f"Nehari projection infeasible: lam rho0(u) - rho0(grad u) = {d:.6e} <= "
            f"feasibility tolerance {tol_feas:.3e}",
            gap=d,
        )
    t0 = (b / d) ** (1.0 / (p - q))

    # independent root bracketing on k(t) = t^q (b - t^{p-q} d)
    lo, hi = t0 / 4.0, 4.0 * t0

    def k(t: float) -> float:
        return t**p * (rho_gu - prob.lam * rho_u) + t**q * b

    if not (k(lo) > 0.0 and k(hi) < 0.0):
        raise RuntimeError("fiber map lost its sign change around the closed-form root")
    while hi - lo > 1e-8 * t0:
        mid = 0.5 * (lo + hi)
        if k(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    t_bis = 0.5 * (lo + hi)
    if abs(t_bis - t0) > 2e-8 * t0:
        raise RuntimeError(
            f"closed-form projection t0 = {t0:.12g} disagrees with bisection {t_bis:.12g}"
        )

    proj = ScalarField(t0 * u.values, dp.grid)
    e = energy(prob, proj)
    gm_p = grad_magnitude(proj.values, dp.grid)
    gap = (
        rho_theta0(dp, gm_p)
        + lq_norm_q(gm_p, dp.grid, q)
        - prob.lam * rho_theta0(dp, cell_means(proj.values, dp.grid))
    )
    return NehariPoint(u=proj, t0=t0, energy=e, constraint_gap=gap)


def _resolve_lambda_hat1(prob: Problem, opts: SolveOptions) -> float:
    if opts.lambda_hat1 is not None:
        return opts.lambda_hat1
    return principal_eigenvalue(prob.dp, opts.eig).lambda_hat1


def minimize_on_nehari(
    prob: Problem, init: ScalarField, opts: SolveOptions | None = None
) -> MinimizerResult:
    """Projected preconditioned descent of the energy over the Nehari manifold.

    Requires lam above the principal eigenvalue (supplied through the options
    or computed fresh); otherwise :class:`InfeasibleError`.  Each iteration
    takes a preconditioned negative-gradient step in the interior nodal values
    with Armijo backtracking and re-projects onto the manifold.  Stops when the
    full energy-derivative residual falls below ``opts.tol`` or the energy has
    stalled; the final iterate is replaced by its absolute value (which leaves
    the energy invariant for sign-definite fields) and re-projected.
    """
    opts = opts or SolveOptions()
    _require_two_phases(prob)
    dp = prob.dp
    grid = dp.grid
    lam1 = _resolve_lambda_hat1(prob, opts)
    if prob.lam <= lam1:
        raise InfeasibleError(
            f"lambda = {prob.lam:.12g} is at or below the principal eigenvalue "
            f"{lam1:.12g}; the problem has no eigenpair there",
            gap=prob.lam - lam1,
        )
    values = init.values.copy()
    values[grid.boundary_mask] = 0.0
    if not np.any(values):
        raise ValueError("initial field vanishes after applying the Dirichlet mask")

    solve = make_laplace_solver(grid)

    # Phase 1: descend the Rayleigh quotient until the ray is projectable,
    # i.e. the quotient sits safely below lam.
    target = lam1 + 0.9 * (prob.lam - lam1)
    quot = rho_theta0(dp, grad_magnitude(values, grid)) / rho_theta0(dp, cell_means(values, grid))
    if quot >= target:
        values, quot, _, _, status = _descend_quotient(
            dp,
            values,
            solve,
            stop=lambda hist, res: hist[-1] < target,
            max_iters=2000,
            step0=opts.initial_step,
            armijo=opts.armijo,
        )
        if status != "stopped":
            raise NonConvergenceError(
                f"feasibility descent stalled at quotient {quot:.12g} above target {target:.12g}"
            )

    point = nehari_project(prob, ScalarField(values, grid))
    u = point.u.values.copy()
    e = point.energy
    energies = [e]
    idx = grid.interior_idx
    s = opts.initial_step
    stall = 0
    it = 0
    reason = "max_iters"
    res_dual = np.inf
    for it in range(1, opts.max_iters + 1):
        r = energy_gradient(prob, ScalarField(u, grid))
        res_dual = interior_dual_norm(r, grid)
        if res_dual <= opts.tol:
            reason = "residual"
            break
        rint = r[idx]
        d = solve(rint)
        slope = -float(np.dot(rint, d))
        accepted = False
        cand = None
        for _ in range(60):
            v = u.copy()
            v[idx] -= s * d
            try:
                cand = nehari_project(prob, ScalarField(v, grid))
            except (InfeasibleError, ValueError):
                s *= 0.5
                continue
            if cand.energy <= e + opts.armijo * s * slope:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            reason = "line_search_stall"
            break
        new_e = cand.energy
        u = cand.u.values.copy()
        stall = stall + 1 if abs(new_e - e) <= opts.stall_rtol * (1.0 + abs(new_e)) else 0
        e = new_e
        energies.append(e)
        s = min(2.0 * s, 1e3)
        if stall >= opts.stall_window:
            reason = "energy_stall"
            break
    else:
        it = opts.max_iters
        reason = "max_iters"

    # Residual polish: once the energy plateaus at its rounding floor (the
    # minimizer can be huge near the threshold, so energy differences lose
    # all digits long before the derivative does), keep taking preconditioned
    # steps accepted on residual decrease alone.
    if res_dual > opts.tol and reason in ("line_search_stall", "energy_stall"):
        sp = 1.0
        for _ in range(200):
            if res_dual <= opts.tol:
                break
            r = energy_gradient(prob, ScalarField(u, grid))
            res_dual = interior_dual_norm(r, grid)
            if res_dual <= opts.tol:
                break
            d = solve(r[idx])
            accepted = False
            for _ in range(40):
                v = u.copy()
                v[idx] -= sp * d
                try:
                    cand = nehari_project(prob, ScalarField(v, grid))
                except (InfeasibleError, ValueError):
                    sp *= 0.5
                    continue
                cand_res = interior_dual_norm(
                    energy_gradient(prob, cand.u), grid
                )
                if cand_res < res_dual:
                    u = cand.u.values.copy()
                    e = cand.energy
                    res_dual = cand_res
                    accepted = True
                    sp = min(2.0 * sp, 1e3)
                    break
                sp *= 0.5
            it += 1
            if not accepted:
                break
        if res_dual <= opts.tol:
            reason = "residual"

    # final positivity step: |u| leaves every modular of a sign-definite field
    # unchanged; re-projection then lands at t0 ~ 1
    final = nehari_project(prob, ScalarField(np.abs(u), grid))
    if abs(final.energy - e) > 1e-10 * (1.0 + abs(e)):
        warnings.warn(
            f"absolute-value replacement moved the energy by {abs(final.energy - e):.3e}",
            StalePositivityWarning,
            stacklevel=2,
        )
    u = final.u.values
    e = final.energy
    res_dual = residual(prob, final.u).dual_norm
    interior = u[idx]
    result = MinimizerResult(
        u_hat=final.u,
        m_lambda=e,
        residual=res_dual,
        iterations=it,
        positivity=(float(interior.min()), float(interior.max())),
        converged=res_dual <= opts.tol,
        stop_reason=reason,
        energies=tuple(energies),
    )
    if reason == "max_iters" and not result.converged:
        raise NonConvergenceError(
            f"manifold descent exhausted {opts.max_iters} iterations (residual {res_dual:.3e})",
            best=result,
        )
    return result


def multistart_minimize(
    prob: Problem, opts: SolveOptions, n_starts: int, rng_seed: int
) -> list[MinimizerResult]:
    """Run the minimization from the bump plus seeded random initializations.

    Start 0 is the deterministic interior bump; starts k >= 1 use independent
    random interior values.  Non-convergent starts contribute their best
    iterate.  Results are ordered by start index.
    """
    if n_starts < 1:
        raise ValueError("need at least one start")
    grid = prob.dp.grid
    seeds = np.random.SeedSequence(rng_seed).spawn(max(n_starts - 1, 0))
    inits = [bump_field(grid)]
    for child in seeds:
        rng = np.random.default_rng(child)
        inits.append(dirichlet_field(grid, rng.standard_normal(grid.num_nodes)))
    results = []
    for init in inits[:n_starts]:
        try:
            results.append(minimize_on_nehari(prob, init, opts))
        except NonConvergenceError as err:
            if err.best is not None:
                results.append(err.best)
    return results


def best_result(results: list[MinimizerResult]) -> MinimizerResult | None:
    """Lowest-energy converged result; ties resolved to the earliest start."""
    converged = [r for r in results if r.converged]
    if not converged:
        return None
    return min(converged, key=lambda r: r.m_lambda)


def extract_eigenpair(
    prob: Problem, res: MinimizerResult, tol: float = 1e-6
) -> tuple[float, ScalarField, EigenpairDiagnostics]:
    """Re-verify a converged minimizer as an eigenpair and report diagnostics.

    Checks the assembled energy derivative against every interior hat field,
    reports the sup norm and interior minimum of the eigenfunction, and flags
    positivity violations (any interior value below -1e-12, or a nonpositive
    interior minimum).
    """
    _require_two_phases(prob)
    u = res.u_hat
    rr = residual(prob, u)
    if rr.dual_norm > tol:
        raise NonConvergenceError(
            f"residual {rr.dual_norm:.3e} above the eigenpair tolerance {tol:.1e}", best=res
        )
    if prob.epsilon_reg > 0.0:
        try:
            bare = residual(Problem(prob.dp, prob.lam, 0.0), u).dual_norm
        except ValueError:
            bare = None
    else:
        bare = rr.dual_norm
    interior = u.values[u.grid.interior_idx]
    imin = float(interior.min())
    diag = EigenpairDiagnostics(
        residual=rr.dual_norm,
        residual_unregularized=bare,
        sup_norm=float(np.max(np.abs(u.values))),
        interior_min=imin,
        positivity_violated=bool(np.any(interior < -1e-12) or imin <= 0.0),
    )
    return prob.lam, u, diag
