"""FastAPI wrapper over the pipeline.

Requests carry the experiment config inline (same JSON schema as the CLI
config files) plus, where relevant, a trained model bundle.  Configuration
problems map to 400, numeric/verification-impossible failures to 422.
"""

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .. import __version__, bench, pipeline
from ..config import config_from_dict
from ..errors import (
    BoundUndefinedError,
    CasimirctlError,
    ConfigError,
    MinimumEscapedError,
    NoCasimirError,
    NumericDomainError,
    QuadratureError,
    StructuralError,
    TrainingDivergedError,
    UnsupportedStructureError,
)

_NUMERIC_ERRORS = (
    NumericDomainError,
    TrainingDivergedError,
    QuadratureError,
    MinimumEscapedError,
    BoundUndefinedError,
    NoCasimirError,
    UnsupportedStructureError,
)


class TrainRequest(BaseModel):
    config: dict
    seed: int | None = None
    verify: bool = True


class BoundCheckResponse(BaseModel):
    passed: bool
    distance: float
    bound: float
    slack: float


class TrainResponse(BaseModel):
    epsilon: float
    margin_a: float
    xi_star: list[float]
    z_star: list[float]
    bound: float | None
    epochs_run: int
    degeneracy_warnings: list[str]
    model: dict
    report: dict
    z_bar: list[float] | None = None
    bound_check: BoundCheckResponse | None = None


class SimulateRequest(BaseModel):
    config: dict
    model: dict
    seed: int | None = None


class SimulateResponse(BaseModel):
    z_bar: list[float] | None
    stabilized: bool | None
    trajectories: list[dict]


class VerifyBoundRequest(BaseModel):
    report: dict
    model: dict
    slack: float = Field(default=1.1, gt=1.0)


class VerifyBoundResponse(BaseModel):
    passed: bool
    distance: float
    bound: float
    epsilon: float
    margin_a: float
    z_bar: list[float]
    slack: float


class SweepRequest(BaseModel):
    config: dict
    values: list[float] | None = None
    seed: int | None = None


class SweepResponse(BaseModel):
    rows: list[dict]
    passed: bool


class SurfaceRequest(BaseModel):
    model: dict
    grid: list[int] = Field(default_factory=lambda: [101, 101])
    box: list[list[float]] = Field(
        default_factory=lambda: [[-2.0, 2.0], [-2.0, 2.0]]
    )


class SurfaceResponse(BaseModel):
    q: list[list[float]]
    p: list[list[float]]
    V: list[list[float]]
    min_q: float
    min_p: float
    min_V: float


class ValidateRequest(BaseModel):
    config: dict
    seed: int | None = None


class ValidateResponse(BaseModel):
    config_valid: bool
    structure_valid: bool
    max_skewness: float
    min_damping_eigenvalue: float
    min_input_singular_value: float
    findings: list[str]


def create_app():
    app = FastAPI(
        title="casimirctl",
        version=__version__,
        description=(
            "Neural energy-Casimir controller synthesis for port-Hamiltonian "
            "systems."
        ),
    )

    @app.exception_handler(ConfigError)
    async def _config_error(request, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(StructuralError)
    async def _structural_error(request, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(CasimirctlError)
    async def _numeric_error(request, exc):
        code = 422 if isinstance(exc, _NUMERIC_ERRORS) else 500
        return JSONResponse(status_code=code, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/validate", response_model=ValidateResponse)
    def validate(req: ValidateRequest):
        cfg = config_from_dict(req.config)
        rep = pipeline.validate_config_system(cfg, seed=req.seed)
        return ValidateResponse(
            config_valid=True,
            structure_valid=rep.passed,
            max_skewness=rep.max_skewness,
            min_damping_eigenvalue=rep.min_damping_eigenvalue,
            min_input_singular_value=rep.min_input_singular_value,
            findings=list(rep.findings),
        )

    @app.post("/train", response_model=TrainResponse)
    def train_endpoint(req: TrainRequest):
        cfg = config_from_dict(req.config)
        report, parts, problem = pipeline.run_training(cfg, seed=req.seed)
        out = TrainResponse(
            epsilon=report.epsilon,
            margin_a=report.margin_a,
            xi_star=[float(v) for v in report.xi_star],
            z_star=[float(v) for v in report.z_star],
            bound=report.bound,
            epochs_run=report.epochs_run,
            degeneracy_warnings=list(report.degeneracy_warnings),
            model=bench.bundle_dict(cfg, parts, report),
            report=report.to_dict(),
        )
        if req.verify:
            z_bar, bc = pipeline.bound_check(report, parts["lyapunov"])
            out.z_bar = [float(v) for v in z_bar]
            out.bound_check = BoundCheckResponse(
                passed=bool(bc.passed),
                distance=bc.distance,
                bound=bc.bound,
                slack=bc.slack,
            )
        return out

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest):
        cfg = config_from_dict(req.config)
        out = pipeline.simulate_from_model(req.model, cfg, seed=req.seed)
        return SimulateResponse(**out)

    @app.post("/verify-bound", response_model=VerifyBoundResponse)
    def verify_bound(req: VerifyBoundRequest):
        out = pipeline.verify_bound_from_data(req.report, req.model, slack=req.slack)
        return VerifyBoundResponse(**out)

    @app.post("/sweep-a", response_model=SweepResponse)
    def sweep(req: SweepRequest):
        cfg = config_from_dict(req.config)
        rows = pipeline.sweep_margin(cfg, values=req.values, seed=req.seed)
        return SweepResponse(rows=rows, passed=all(r["passed"] for r in rows))

    @app.post("/export-surface", response_model=SurfaceResponse)
    def surface(req: SurfaceRequest):
        import numpy as np

        if len(req.grid) != 2:
            raise ConfigError("grid must be [width, height]")
        parts = bench.load_bundle(req.model)
        Q, P, V = pipeline.surface_grid(parts, grid=req.grid, box=req.box)
        k = int(np.argmin(V))
        i, j = divmod(k, V.shape[1])
        return SurfaceResponse(
            q=Q.tolist(),
            p=P.tolist(),
            V=V.tolist(),
            min_q=float(Q[i, j]),
            min_p=float(P[i, j]),
            min_V=float(V[i, j]),
        )

    return app


app = create_app()
