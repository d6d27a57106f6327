"""HTTP service exposing the toolkit.

Each endpoint validates the request with pydantic, calls the same pipeline
functions the CLI uses and returns a structured response. Logs travel as
CSV text in the request/response bodies, so a client needs no shared
filesystem with the server.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .budget import residual_light_sweep
from .config import RunConfig, config_json_schema
from .core import InterferenceTerms, PhasePoint
from .errors import ToolkitError
from .fitting import fit_contrast, fit_thermalization
from .logio import dump_log, parse_log
from .pipeline import analyze_log, budget_run, corrected_point_dict, simulate_run
from .reconstruct import correct_phase_point
from .reference import BENCHMARKS
from .budget import mc_power_fluctuations, mc_phase_fluctuations


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    config: RunConfig
    seed: int | None = None


class SimulateResponse(BaseModel):
    n_records: int
    n_cycles: int
    log_csv: str


class AnalyzeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    log_csv: str
    malfunction_threshold_mad: float | None = Field(default=None, gt=0)


class ReconstructRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    alpha: float
    beta: float
    gamma: float


class BudgetRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    log_csv: str
    config: RunConfig
    reference: str | None = None
    seed: int | None = None


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    phases: dict[str, float]
    config: RunConfig
    tau: float | None = Field(default=None, ge=0)
    n_points: int | None = Field(default=None, ge=5)
    phase_sign: str = "symmetric"


class ContrastFitRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    alphas: list[float]
    delta_t: float | None = None
    temps: list[float] | None = None


class McFluctRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    mode: str = Field(pattern="^(power|phase)$")
    config: RunConfig
    sigma: float | None = Field(default=None, ge=0)
    n_samples: int | None = Field(default=None, ge=2)
    seed: int | None = None


app = FastAPI(
    title="peresim",
    version=__version__,
    description="Three-path interferometer simulation and Peres/Sorkin error-budget analysis",
)


@app.exception_handler(ToolkitError)
async def _toolkit_error_handler(request, exc: ToolkitError):
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/run-config/schema")
def run_config_schema() -> dict:
    return config_json_schema()


@app.get("/benchmarks")
def benchmarks() -> dict:
    return {
        label: {
            "housing_temp_c": b.housing_temp_c,
            "reconstructed_terms": list(b.reconstructed_terms),
            "corrected_terms": list(b.corrected_terms),
            "tau": b.tau,
            "measured_delta_f": b.measured_delta_f,
            "measured_kappa": b.measured_kappa,
        }
        for label, b in BENCHMARKS.items()
    }


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest) -> SimulateResponse:
    log = simulate_run(req.config, req.seed)
    return SimulateResponse(
        n_records=len(log.records),
        n_cycles=len(log.cycle_indices),
        log_csv=dump_log(log),
    )


@app.post("/analyze")
def analyze(req: AnalyzeRequest) -> dict:
    log = parse_log(req.log_csv, "request.log_csv")
    report = analyze_log(log, req.malfunction_threshold_mad)
    return report.to_dict()


@app.post("/reconstruct")
def reconstruct(req: ReconstructRequest) -> dict:
    terms = InterferenceTerms(alpha=req.alpha, beta=req.beta, gamma=req.gamma)
    corrected = correct_phase_point(terms)
    return corrected_point_dict(corrected)


@app.post("/budget")
def budget(req: BudgetRequest) -> dict:
    if req.reference is not None and req.reference not in BENCHMARKS:
        raise HTTPException(
            status_code=422,
            detail=f"unknown reference {req.reference!r}; choose from {sorted(BENCHMARKS)}",
        )
    log = parse_log(req.log_csv, "request.log_csv")
    report = budget_run(log, req.config, req.reference, req.seed)
    return report.to_dict()


@app.post("/sweep-residual")
def sweep_residual(req: SweepRequest) -> dict:
    phases = PhasePoint(
        req.phases.get("dphi_bc", 0.0),
        req.phases.get("dphi_ca", 0.0),
        req.phases.get("dphi_ab", 0.0),
    )
    source, _, imperfections = req.config.domain_specs()
    tau = req.tau if req.tau is not None else imperfections.residual.tau
    n_points = req.n_points if req.n_points is not None else req.config.analysis.sweep_points
    curve = residual_light_sweep(
        phases, source, tau,
        n_points=n_points, phase_sign=req.phase_sign,
    )
    return {
        "tau": curve.tau,
        "phase_sign": curve.phase_sign,
        "max_delta_f": curve.max_delta_f,
        "max_phi_sh": curve.max_phi_sh,
        "min_delta_f": curve.min_delta_f,
        "min_phi_sh": curve.min_phi_sh,
        "phi_sh": curve.phi_sh.tolist(),
        "delta_f": curve.delta_f.tolist(),
    }


@app.post("/fit-contrast")
def fit_contrast_endpoint(req: ContrastFitRequest) -> dict:
    out: dict = {}
    delta_t = req.delta_t
    if req.temps is not None:
        thermal = fit_thermalization(req.temps)
        out["thermalization"] = {
            "t0": thermal.t0,
            "delta_t": thermal.delta_t,
            "kappa_th": thermal.kappa_th,
            "residual_norm": thermal.residual_norm,
            "parameter_uncertainties": list(thermal.parameter_uncertainties),
        }
        if delta_t is None:
            delta_t = thermal.delta_t
    if delta_t is None:
        raise HTTPException(
            status_code=422, detail="provide delta_t or temps to fix the temperature range"
        )
    fit = fit_contrast(req.alphas, delta_t)
    out["contrast"] = {
        "c_alpha": fit.c_alpha,
        "dphi0": fit.dphi0,
        "eta": fit.eta,
        "kappa_th": fit.kappa_th,
        "delta_t": fit.delta_t,
        "residual_norm": fit.residual_norm,
        "parameter_uncertainties": list(fit.parameter_uncertainties),
    }
    return out


@app.post("/mc-fluct")
def mc_fluct(req: McFluctRequest) -> dict:
    source, phases, imperfections = req.config.domain_specs()
    n = req.n_samples if req.n_samples is not None else req.config.analysis.mc_samples
    seed = req.seed if req.seed is not None else req.config.seed
    if req.mode == "power":
        sigma = req.sigma if req.sigma is not None else imperfections.fluctuations.sigma_pin_rel
        result = mc_power_fluctuations(phases, source, sigma, n, seed)
    else:
        sigma = req.sigma if req.sigma is not None else imperfections.fluctuations.sigma_phase
        result = mc_phase_fluctuations(phases, source, sigma, n, seed)
    return {
        "mode": req.mode,
        "sigma": sigma,
        "delta_f": result.delta_f,
        "sigma_f": result.sigma_f,
        "n_samples": result.n_samples,
        "n_resampled": result.n_resampled,
        "mc_error": result.mc_error,
    }
