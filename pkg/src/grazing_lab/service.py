"""HTTP service exposing the lab: request/response models and handlers.

The FastAPI app wraps the core package; every endpoint has a plain handler
function (`handle_*`) taking and returning pydantic models, so the CLI can
call the same code path in-process or over HTTP as a thin client.

Endpoints
---------
GET  /health
POST /check-pairs      -> pair admissibility report
POST /check-geometry   -> collision-geometry report
POST /functionals      -> one row per requested functional
POST /grazing-sweep    -> per-epsilon rows plus the fitted rate
POST /simulate         -> conservation/entropy trace rows
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .checks import geometry_report
from .config import (ExperimentConfig, build_density, build_kernels,
                     build_pair, build_sampler)
from .dsmc import SolverConfig, Simulator
from .dualpairs import check_pair, get_pair
from .functionals import (FUNCTIONAL_TABLE, evaluate_functional)
from .grazing import sweep_dissipation, sweep_weak_operator
from .results import FunctionalResult
from .testfunctions import position_velocity


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HealthResponse(_Model):
    status: str
    version: str


class PairCheckRequest(_Model):
    pair: Literal["quadratic", "cosh", "custom"] = "cosh"
    custom_name: Optional[str] = None
    samples: int = 10_000
    seed: int = 0


class CheckItem(_Model):
    name: str
    passed: bool
    worst_residual: float
    detail: str = ""


class PairCheckResponse(_Model):
    pair: str
    passed: bool
    checks: list[CheckItem]


class GeometryCheckRequest(_Model):
    dim: int = 2
    frames: int = 100_000
    seed: int = 0


class GeometryCheckResponse(_Model):
    dim: int
    n_frames: int
    passed: bool
    checks: dict


class FunctionalsRequest(_Model):
    config: ExperimentConfig = Field(default_factory=ExperimentConfig)
    functionals: list[str] = Field(
        default_factory=lambda: ["dissipation_boltzmann", "dissipation_psi",
                                 "dissipation_cosh", "dissipation_landau"])


class FunctionalRow(_Model):
    functional: str
    pair: str
    epsilon: float
    gamma: float
    seed: int
    value: float
    value_stderr: float
    n_samples: int
    method: str
    unreliable: bool


class FunctionalsResponse(_Model):
    rows: list[FunctionalRow]
    config: dict


class SweepRequest(_Model):
    config: ExperimentConfig = Field(default_factory=ExperimentConfig)
    eps_list: list[float] = Field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05, 0.025])
    kind: Literal["dissipation", "weak_operator"] = "dissipation"


class SweepRow(_Model):
    epsilon: float
    value: float
    value_stderr: float
    target: float
    target_stderr: float
    gap: float
    rate: float


class SweepResponse(_Model):
    rows: list[SweepRow]
    fitted_rate: float
    achieved_gap: float
    notes: list[str]
    failures: list[str]
    config: dict


class SimulateRequest(_Model):
    config: ExperimentConfig


class TraceRowModel(_Model):
    t: float
    mass: float
    momentum: list[float]
    energy: float
    entropy: float
    entropy_stderr: float
    collisions_accepted: int
    candidates: int
    moment_bracket: float


class SimulateResponse(_Model):
    trace: list[TraceRowModel]
    theta_min: float
    neglected_mass_fraction: float
    final_positions: Optional[list[list[float]]] = None
    final_velocities: Optional[list[list[float]]] = None
    config: dict


# ---------------------------------------------------------------------------
# Handlers (shared by HTTP endpoints and the in-process CLI)
# ---------------------------------------------------------------------------

def handle_health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


def handle_check_pairs(req: PairCheckRequest) -> PairCheckResponse:
    pair = get_pair(req.pair, req.custom_name)
    report = check_pair(pair, n=req.samples, seed=req.seed)
    return PairCheckResponse(
        pair=report.pair, passed=report.passed,
        checks=[CheckItem(**c.as_dict()) for c in report.checks])


def handle_check_geometry(req: GeometryCheckRequest) -> GeometryCheckResponse:
    rep = geometry_report(req.dim, req.frames, req.seed)
    return GeometryCheckResponse(**rep)


def handle_functionals(req: FunctionalsRequest) -> FunctionalsResponse:
    cfg = req.config
    f = build_density(cfg.density)
    ks = build_kernels(cfg.kernels)
    pair = build_pair(cfg.pair)
    mc = build_sampler(cfg.mc)
    rows = []
    for kind in req.functionals:
        if kind not in FUNCTIONAL_TABLE:
            raise ValueError(f"unknown functional {kind!r}; "
                             f"available: {sorted(FUNCTIONAL_TABLE)}")
        est = evaluate_functional(kind, f, ks, pair, mc)
        res = FunctionalResult(kind=kind, estimate=est, epsilon=ks.epsilon,
                               pair=pair.name, gamma=ks.gamma, seed=mc.seed)
        r = res.as_row()
        r["unreliable"] = bool(r["unreliable"])
        rows.append(FunctionalRow(**r))
    return FunctionalsResponse(rows=rows, config=cfg.model_dump())


def handle_sweep(req: SweepRequest) -> SweepResponse:
    cfg = req.config
    f = build_density(cfg.density)
    ks = build_kernels(cfg.kernels)
    mc = build_sampler(cfg.mc)
    if req.kind == "dissipation":
        pair = build_pair(cfg.pair)
        res = sweep_dissipation(f, pair, ks, req.eps_list, mc,
                                oracle=cfg.oracle.enabled,
                                grid_n=cfg.oracle.resolution, grid_L=cfg.oracle.L)
    else:
        res = sweep_weak_operator(f, position_velocity(ks.dim), ks,
                                  req.eps_list, mc)
    return SweepResponse(
        rows=[SweepRow(**row) for row in res.rows()],
        fitted_rate=res.fitted_rate, achieved_gap=res.achieved_gap,
        notes=list(res.notes), failures=list(res.failures),
        config=cfg.model_dump())


def handle_simulate(req: SimulateRequest, return_particles: bool = True
                    ) -> SimulateResponse:
    cfg = req.config
    if cfg.solver is None:
        raise ValueError("simulate requires a solver section in the config")
    f = build_density(cfg.density)
    ks = build_kernels(cfg.kernels)
    s = cfg.solver
    solver_cfg = SolverConfig(n=s.n, dt=s.dt, horizon=s.horizon,
                              theta_min=s.theta_min, seed=s.seed,
                              trace_every=s.trace_every, entropy_trace=s.entropy)
    sim = Simulator(ks, solver_cfg)
    trace, ens = sim.run(f)
    rows = [TraceRowModel(
        t=r.t, mass=r.mass, momentum=[float(m) for m in np.atleast_1d(r.momentum)],
        energy=r.energy, entropy=r.entropy, entropy_stderr=r.entropy_err,
        collisions_accepted=r.collisions_accepted, candidates=r.candidates,
        moment_bracket=r.moment_bracket) for r in trace]
    return SimulateResponse(
        trace=rows, theta_min=sim.theta_min,
        neglected_mass_fraction=sim.neglected_fraction,
        final_positions=ens.x.tolist() if return_particles else None,
        final_velocities=ens.v.tolist() if return_particles else None,
        config=cfg.model_dump())


# ---------------------------------------------------------------------------
# FastAPI wiring
# ---------------------------------------------------------------------------

app = FastAPI(title="grazing-lab", version=__version__,
              description="Numerical laboratory for delocalised-collision "
                          "kinetic operators and their small-angle limits.")


@app.get("/health", response_model=HealthResponse)
def health():
    return handle_health()


def _wrap(handler, req):
    try:
        return handler(req)
    except (ValueError, KeyError) as err:
        raise HTTPException(status_code=422, detail=str(err))


@app.post("/check-pairs", response_model=PairCheckResponse)
def check_pairs_endpoint(req: PairCheckRequest):
    return _wrap(handle_check_pairs, req)


@app.post("/check-geometry", response_model=GeometryCheckResponse)
def check_geometry_endpoint(req: GeometryCheckRequest):
    return _wrap(handle_check_geometry, req)


@app.post("/functionals", response_model=FunctionalsResponse)
def functionals_endpoint(req: FunctionalsRequest):
    return _wrap(handle_functionals, req)


@app.post("/grazing-sweep", response_model=SweepResponse)
def sweep_endpoint(req: SweepRequest):
    return _wrap(handle_sweep, req)


@app.post("/simulate", response_model=SimulateResponse)
def simulate_endpoint(req: SimulateRequest):
    return _wrap(handle_simulate, req)
