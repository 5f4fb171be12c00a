"""Drivers that turn a :class:`RunConfig` into report models.

These are the service handlers; the CLI is a thin client over them.  Every
driver is deterministic for a fixed config and seed.
"""

from __future__ import annotations

import warnings
from contextlib import contextmanager

import numpy as np

from .errors import (
    ConfigError,
    HypothesisError,
    HypothesisWarning,
    InfeasibleError,
    NonConvergenceError,
)
from .grid import (
    Grid,
    GridSpec,
    ScalarField,
    build_grid,
    cell_means,
    dirichlet_field,
    grad_components,
    grad_magnitude,
)
from .modular import (
    DoublePhase,
    Exponents,
    growth_envelope_check,
    load_weight,
    luxemburg_norm,
    lq_norm_q,
    make_weight,
    rho_theta,
    rho_theta0,
)
from .nehari import SolveOptions, best_result, multistart_minimize, nehari_project
from .operators import (
    Problem,
    default_epsilon,
    energy,
    energy_derivative,
    pairing_q,
    pairing_weighted_p,
)
from .schemas import (
    EigReport,
    PropertyResult,
    PropsReport,
    RunConfig,
    SolveReport,
    SweepReport,
    SweepRowModel,
)
from .spectrum import EigenOptions, SweepRow, principal_eigenvalue, rayleigh_quotient

__all__ = ["run_eig", "run_solve", "run_sweep", "run_props", "render_sweep_csv"]


@contextmanager
def _recorded_warnings(sink: list[str]):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        yield
    seen = []
    for w in caught:
        if issubclass(w.category, UserWarning):
            msg = str(w.message)
            if msg not in seen:
                seen.append(msg)
    sink.extend(seen)


def _build_problem_data(cfg: RunConfig) -> tuple[DoublePhase, float]:
    """Grid, weight, and exponents from the config; semantic errors -> ConfigError.

    A strict-mode request whose hypotheses fail is downgraded to relaxed mode
    with a warning, so classical validation configs remain runnable.
    """
    try:
        spec = GridSpec(
            dimension=cfg.grid.dimension,
            extents=tuple(tuple(e) for e in cfg.grid.extents),
            nodes_per_axis=tuple(cfg.grid.nodes_per_axis),
        )
        grid = build_grid(spec)
    except ValueError as err:
        raise ConfigError(f"grid: {err}") from err

    ambient = cfg.exponents.ambient_dim if cfg.exponents.ambient_dim is not None else cfg.grid.dimension
    strict = cfg.exponents.strict
    try:
        try:
            exps = Exponents(cfg.exponents.p, cfg.exponents.q, ambient, strict)
        except HypothesisError as err:
            warnings.warn(
                f"strict hypotheses not satisfied ({err}); proceeding in relaxed mode",
                HypothesisWarning,
                stacklevel=2,
            )
            strict = False
            exps = Exponents(cfg.exponents.p, cfg.exponents.q, ambient, False)
    except HypothesisError:  # pragma: no cover - relaxed mode never raises this
        raise
    except ValueError as err:
        raise ConfigError(f"exponents: {err}") from err

    try:
        if cfg.weight.file is not None:
            weight = load_weight(grid, cfg.weight.file)
        else:
            weight = make_weight(grid, cfg.weight.family, cfg.weight.value, cfg.weight.alpha)
    except (OSError, ValueError) as err:
        raise ConfigError(f"weight: {err}") from err

    try:
        try:
            dp = DoublePhase(exps, weight, grid)
        except HypothesisError as err:
            warnings.warn(
                f"strict hypotheses not satisfied ({err}); proceeding in relaxed mode",
                HypothesisWarning,
                stacklevel=2,
            )
            exps = Exponents(cfg.exponents.p, cfg.exponents.q, ambient, False)
            dp = DoublePhase(exps, weight, grid)
    except ValueError as err:
        raise ConfigError(f"problem data: {err}") from err

    eps = cfg.solver.epsilon_reg if cfg.solver.epsilon_reg is not None else default_epsilon(grid)
    return dp, eps


def _eig_options(cfg: RunConfig) -> EigenOptions:
    return EigenOptions(tol=cfg.solver.eig_tol, max_iters=cfg.solver.eig_max_iters)


def run_eig(cfg: RunConfig) -> EigReport:
    captured: list[str] = []
    with _recorded_warnings(captured):
        dp, _ = _build_problem_data(cfg)
        try:
            res = principal_eigenvalue(dp, _eig_options(cfg))
            status = "ok"
        except NonConvergenceError as err:
            res = err.best
            status = "nonconverged"
    return EigReport(
        status=status,
        lambda_hat1=res.lambda_hat1,
        residual=res.residual,
        iterations=res.iterations,
        grid=cfg.grid,
        exponents=cfg.exponents,
        eigenfunction=res.eigenfunction.values.tolist(),
        warnings=captured,
    )


def run_solve(cfg: RunConfig) -> SolveReport:
    if cfg.lambda_value is None:
        raise ConfigError("solve needs a 'lambda' value")
    captured: list[str] = []
    with _recorded_warnings(captured):
        dp, eps = _build_problem_data(cfg)
        lam = float(cfg.lambda_value)
        if lam <= 0.0:
            raise ConfigError(f"lambda must be positive, got {lam}")
        try:
            lam1 = principal_eigenvalue(dp, _eig_options(cfg)).lambda_hat1
        except NonConvergenceError as err:
            return SolveReport(
                status="nonconverged",
                lam=lam,
                lambda_hat1=err.best.lambda_hat1,
                feasible=lam > err.best.lambda_hat1,
                warnings=captured,
            )
        prob = Problem(dp, lam, eps)
        opts = SolveOptions(
            tol=cfg.solver.tol,
            max_iters=cfg.solver.max_iters,
            lambda_hat1=lam1,
            eig=_eig_options(cfg),
        )
        try:
            results = multistart_minimize(prob, opts, cfg.solver.multistarts, cfg.solver.rng_seed)
            best = best_result(results)
        except InfeasibleError:
            return SolveReport(
                status="infeasible",
                lam=lam,
                lambda_hat1=lam1,
                feasible=False,
                warnings=captured,
            )
        if best is None:
            best = min(results, key=lambda r: r.m_lambda) if results else None
            status = "nonconverged"
        else:
            status = "ok"
    if best is None:
        return SolveReport(
            status="nonconverged", lam=lam, lambda_hat1=lam1, feasible=True, warnings=captured
        )
    vals = best.u_hat.values
    return SolveReport(
        status=status,
        lam=lam,
        lambda_hat1=lam1,
        feasible=True,
        m_lambda=best.m_lambda,
        residual=best.residual,
        min_u=best.positivity[0],
        max_u=best.positivity[1],
        sup_u=float(np.max(np.abs(vals))),
        iterations=best.iterations,
        eigenfunction=vals.tolist() if status == "ok" else None,
        warnings=captured,
    )


def _fmt_cell(x: float | None) -> str:
    return "" if x is None else f"{x:.17g}"


def render_sweep_csv(rows: list[SweepRow]) -> str:
    lines = ["lambda,feasible,m_lambda,residual,min_u,max_u,iters"]
    for r in rows:
        lines.append(
            f"{r.lam:.17g},{'true' if r.feasible else 'false'},"
            f"{_fmt_cell(r.m_lambda)},{_fmt_cell(r.residual)},"
            f"{_fmt_cell(r.min_u)},{_fmt_cell(r.max_u)},{r.iters}"
        )
    return "\n".join(lines) + "\n"


def run_sweep(cfg: RunConfig) -> SweepReport:
    if cfg.sweep is None:
        raise ConfigError("sweep needs a 'sweep' section")
    captured: list[str] = []
    with _recorded_warnings(captured):
        dp, eps = _build_problem_data(cfg)
        lam1 = principal_eigenvalue(dp, _eig_options(cfg)).lambda_hat1
        ticks = np.linspace(cfg.sweep.start, cfg.sweep.stop, cfg.sweep.steps)
        lam_values = ticks * lam1 if cfg.sweep.spacing == "relative" else ticks
        opts = SolveOptions(
            tol=cfg.solver.tol,
            max_iters=cfg.solver.max_iters,
            lambda_hat1=lam1,
            eig=_eig_options(cfg),
        )
        rows: list[SweepRow] = []
        for lam in lam_values:
            rows.append(_sweep_row(dp, eps, float(lam), opts, cfg))
        csv = render_sweep_csv(rows)
    return SweepReport(
        status="ok",
        lambda_hat1=lam1,
        rows=[
            SweepRowModel(
                lam=r.lam,
                feasible=r.feasible,
                m_lambda=r.m_lambda,
                residual=r.residual,
                min_u=r.min_u,
                max_u=r.max_u,
                iters=r.iters,
            )
            for r in rows
        ],
        csv=csv,
        warnings=captured,
    )


def _sweep_row(dp, eps, lam, opts, cfg) -> SweepRow:
    if lam <= 0.0:
        return SweepRow(lam, False, None, None, None, None, iters=0)
    prob = Problem(dp, lam, eps)
    try:
        results = multistart_minimize(prob, opts, cfg.solver.multistarts, cfg.solver.rng_seed)
    except InfeasibleError:
        return SweepRow(lam, False, None, None, None, None, iters=0)
    except Exception:
        return SweepRow(lam, False, None, None, None, None, iters=-1)
    best = best_result(results)
    if best is None:
        if not results:
            return SweepRow(lam, True, None, None, None, None, iters=-1)
        b = min(results, key=lambda r: r.m_lambda)
        return SweepRow(
            lam, True, b.m_lambda, b.residual, b.positivity[0], b.positivity[1], iters=-1
        )
    return SweepRow(
        lam,
        True,
        best.m_lambda,
        best.residual,
        best.positivity[0],
        best.positivity[1],
        iters=best.iterations,
    )


# ---------------------------------------------------------------------------
# property suite


def run_props(cfg: RunConfig) -> PropsReport:
    if cfg.solver.trials <= 0:
        raise ConfigError("props needs a positive trial count (vacuous run rejected)")
    captured: list[str] = []
    with _recorded_warnings(captured):
        dp, eps = _build_problem_data(cfg)
        lam = float(cfg.lambda_value) if cfg.lambda_value is not None else 1.0
        if lam <= 0.0:
            raise ConfigError(f"lambda must be positive, got {lam}")
        props = _props_suite(dp, eps, lam, cfg.solver.trials, cfg.solver.rng_seed)
    failing = [p.name for p in props if p.failures > 0]
    return PropsReport(
        status="ok" if not failing else "failed",
        properties=props,
        first_failure=failing[0] if failing else None,
        warnings=captured,
    )


def _props_suite(dp: DoublePhase, eps: float, lam: float, trials: int, seed: int):
    rng = np.random.default_rng(seed)
    grid = dp.grid
    p, q = dp.p, dp.q
    prob = Problem(dp, lam, eps)

    def rand_mags() -> np.ndarray:
        return np.abs(rng.standard_normal(grid.num_cells)) * rng.uniform(0.2, 5.0)

    def rand_field(scale: float = 1.0) -> ScalarField:
        return dirichlet_field(grid, scale * rng.standard_normal(grid.num_nodes))

    out: list[PropertyResult] = []

    def record(name: str, tol: float, slacks: list[float]) -> None:
        worst = max(slacks) if slacks else 0.0
        failures = sum(1 for s in slacks if s > tol)
        out.append(
            PropertyResult(
                name=name, trials=len(slacks), failures=failures, worst_slack=worst, tolerance=tol
            )
        )

    # (a) the modular at the Luxemburg norm equals one
    slacks = []
    norms = []
    mags = []
    for _ in range(trials):
        v = rand_mags()
        n = luxemburg_norm(dp, v)
        mags.append(v)
        norms.append(n)
        slacks.append(abs(rho_theta(dp, v / n) - 1.0) if n > 0 else 0.0)
    record("norm_modular_unit", 1e-10, slacks)

    # (b) the norm and the modular sit on the same side of one
    slacks = []
    for v, n in zip(mags, norms):
        r = rho_theta(dp, v)
        if abs(r - 1.0) <= 1e-10:
            slacks.append(abs(n - 1.0))
        else:
            slacks.append(0.0 if (r - 1.0) * (n - 1.0) > 0 else 1.0)
    record("norm_modular_sign", 1e-9, slacks)

    # (c)/(d) power bounds on either side of norm one
    slacks = []
    for v, n in zip(mags, norms):
        r = rho_theta(dp, v)
        if abs(n - 1.0) <= 1e-12:
            slacks.append(0.0)
        elif n < 1.0:
            slacks.append(max(n**p - r, r - n**q, 0.0))
        else:
            slacks.append(max(n**q - r, r - n**p, 0.0))
    record("norm_modular_power_bounds", 1e-10, slacks)

    # (e) modular limits under geometric scalings
    slacks = []
    for v in mags[: max(1, trials // 10)]:
        base = rho_theta(dp, v)
        down = [rho_theta(dp, v / 2.0**k) for k in range(0, 21, 4)]
        up = [rho_theta(dp, v * 2.0**k) for k in range(0, 21, 4)]
        ok = (
            all(b < a for a, b in zip(down, down[1:]))
            and all(b > a for a, b in zip(up, up[1:]))
            and down[-1] <= 1e-5 * base
            and up[-1] >= 1e5 * base
        )
        slacks.append(0.0 if ok else 1.0)
    record("norm_modular_limits", 0.0, slacks)

    # growth envelope at random samples
    slacks = []
    for _ in range(trials):
        cell = int(rng.integers(grid.num_cells))
        t = float(np.abs(rng.standard_normal())) * 3.0
        slacks.append(0.0 if growth_envelope_check(dp, [(cell, t)]) else 1.0)
    record("growth_envelope", 0.0, slacks)

    # p-homogeneity of the weighted modular
    slacks = []
    for _ in range(trials):
        v = rand_mags()
        t = float(rng.lognormal())
        a = rho_theta0(dp, t * v)
        b = t**p * rho_theta0(dp, v)
        slacks.append(abs(a - b) / (1.0 + abs(b)))
    record("modular_homogeneity", 1e-12, slacks)

    # monotonicity of the full modular
    slacks = []
    for _ in range(trials):
        v = rand_mags()
        w = v + np.abs(rng.standard_normal(grid.num_cells))
        slacks.append(max(rho_theta(dp, v) - rho_theta(dp, w), 0.0) / (1.0 + rho_theta(dp, w)))
    record("modular_monotonicity", 1e-14, slacks)

    # the full modular splits into the weighted part plus the q-power integral
    slacks = []
    for _ in range(trials):
        v = rand_mags()
        direct = float(
            np.dot(dp.weight.cells * v**p + v**q, grid.cell_volumes)
        )
        slacks.append(abs(rho_theta(dp, v) - direct) / (1.0 + abs(direct)))
    record("modular_decomposition", 1e-13, slacks)

    # gradient linearity
    slacks = []
    for _ in range(trials):
        u, v = rand_field(), rand_field()
        a, b = float(rng.standard_normal()), float(rng.standard_normal())
        lhs = grad_components(a * u.values + b * v.values, grid)
        rhs = a * grad_components(u.values, grid) + b * grad_components(v.values, grid)
        scale = 1.0 + np.max(np.abs(rhs))
        slacks.append(float(np.max(np.abs(lhs - rhs))) / scale)
    record("gradient_linearity", 1e-12, slacks)

    # discrete Poincare sanity: admissible nonzero fields have positive q-energy
    slacks = []
    for _ in range(trials):
        u = rand_field()
        slacks.append(0.0 if lq_norm_q(grad_magnitude(u.values, grid), grid, q) > 0.0 else 1.0)
    record("poincare_sanity", 0.0, slacks)

    # the energy is even, exactly
    slacks = []
    for _ in range(trials):
        u = rand_field()
        neg = ScalarField(-u.values, grid)
        slacks.append(abs(energy(prob, u) - energy(prob, neg)))
    record("energy_evenness", 0.0, slacks)

    # derivative pairing matches central differences of the energy
    slacks = []
    for _ in range(trials):
        u, h = rand_field(), rand_field()
        pair = energy_derivative(prob, u, h)
        worst = 0.0
        for delta in (1e-5, 1e-6):
            up = ScalarField(u.values + delta * h.values, grid)
            dn = ScalarField(u.values - delta * h.values, grid)
            cd = (energy(prob, up) - energy(prob, dn)) / (2.0 * delta)
            worst = max(worst, abs(pair - cd) / (1.0 + abs(pair)))
        slacks.append(worst)
    record("gradient_consistency", 1e-4, slacks)

    # pairing is linear in the test field
    slacks = []
    for _ in range(trials):
        u, h1, h2 = rand_field(), rand_field(), rand_field()
        a, b = float(rng.standard_normal()), float(rng.standard_normal())
        combo = ScalarField(a * h1.values + b * h2.values, grid)
        lhs = energy_derivative(prob, u, combo)
        rhs = a * energy_derivative(prob, u, h1) + b * energy_derivative(prob, u, h2)
        slacks.append(abs(lhs - rhs) / (1.0 + abs(rhs)))
    record("pairing_linearity", 1e-12, slacks)

    # monotonicity of the flux operator
    slacks = []
    strict_ok = p >= 2.0 and q >= 2.0
    mono_prob = Problem(dp, lam, 0.0 if strict_ok else eps)
    for _ in range(trials):
        u, v = rand_field(), rand_field()
        diff = ScalarField(u.values - v.values, grid)
        gap = (
            pairing_weighted_p(mono_prob, u, diff)
            + pairing_q(mono_prob, u, diff)
            - pairing_weighted_p(mono_prob, v, diff)
            - pairing_q(mono_prob, v, diff)
        )
        if strict_ok and np.any(diff.values):
            slacks.append(1.0 if gap <= 0.0 else 0.0)
        else:
            slacks.append(max(-gap, 0.0))
    record("operator_monotonicity", 1e-12, slacks)

    # Rayleigh quotient scale invariance
    slacks = []
    for _ in range(trials):
        u = rand_field()
        t = float(rng.lognormal())
        r0 = rayleigh_quotient(dp, u)
        r1 = rayleigh_quotient(dp, ScalarField(t * u.values, grid))
        slacks.append(abs(r1 - r0) / (1.0 + abs(r0)))
    record("rayleigh_scale_invariance", 1e-12, slacks)

    # fiber root quality, projection idempotence, and projection homogeneity
    if p > q:
        slack_root, slack_idem, slack_homog = [], [], []
        for _ in range(trials):
            u = rand_field()
            lam_u = 1.5 * rayleigh_quotient(dp, u)
            prob_u = Problem(dp, lam_u, eps)
            pt = nehari_project(prob_u, u)
            gm = grad_magnitude(u.values, grid)
            scale = pt.t0**p * lam_u * rho_theta0(dp, cell_means(u.values, grid)) + pt.t0**q * lq_norm_q(gm, grid, q)
            slack_root.append(abs(_fiber_value(prob_u, u, pt.t0)) / scale)
            again = nehari_project(prob_u, pt.u)
            slack_idem.append(abs(again.t0 - 1.0))
            s = 2.0
            scaled = nehari_project(prob_u, ScalarField(s * u.values, grid))
            slack_homog.append(abs(scaled.t0 - pt.t0 / s) / pt.t0)
        record("fiber_root", 1e-9, slack_root)
        record("projection_idempotence", 1e-10, slack_idem)
        record("projection_homogeneity", 1e-10, slack_homog)

    return out


def _fiber_value(prob: Problem, u: ScalarField, t: float) -> float:
    gm = grad_magnitude(u.values, prob.dp.grid)
    a = rho_theta0(prob.dp, gm) - prob.lam * rho_theta0(prob.dp, cell_means(u.values, prob.dp.grid))
    b = lq_norm_q(gm, prob.dp.grid, prob.dp.q)
    return t**prob.dp.p * a + t**prob.dp.q * b
