"""FastAPI service exposing the solver drivers.

Config errors map to HTTP 400 (schema violations are FastAPI's own 422);
solver non-convergence that prevents a report at all maps to 500.  Domain
outcomes (infeasible lambda, non-converged minimization with a best iterate)
are regular 200 responses with a ``status`` field, because they are results,
not transport failures.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__, runner
from .errors import ConfigError, NonConvergenceError
from .schemas import EigReport, PropsReport, RunConfig, SolveReport, SweepReport

app = FastAPI(
    title="doublephase",
    version=__version__,
    description="Double-phase Dirichlet eigenvalue solver",
)


def _run(fn, cfg: RunConfig):
    try:
        return fn(cfg)
    except ConfigError as err:
        raise HTTPException(status_code=400, detail=str(err)) from err
    except NonConvergenceError as err:
        raise HTTPException(status_code=500, detail=str(err)) from err


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/eig", response_model=EigReport)
def eig(cfg: RunConfig) -> EigReport:
    return _run(runner.run_eig, cfg)


@app.post("/solve", response_model=SolveReport)
def solve(cfg: RunConfig) -> SolveReport:
    return _run(runner.run_solve, cfg)


@app.post("/sweep", response_model=SweepReport)
def sweep(cfg: RunConfig) -> SweepReport:
    return _run(runner.run_sweep, cfg)


@app.post("/props", response_model=PropsReport)
def props(cfg: RunConfig) -> PropsReport:
    return _run(runner.run_props, cfg)
