"""Run configuration: JSON schema, validation and conversion to domain specs.

Configs are strict: unknown keys are rejected and every violation is
reported with its key path. All imperfections default to disabled, so a
minimal config only names the phases and the source.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .core import PhasePoint
from .errors import ConfigurationError
from .forward import (
    CROSSTALK_CONVENTIONS,
    CrosstalkSpec,
    FluctuationSpec,
    ImperfectionSpec,
    NonlinearitySpec,
    PolarizationSpec,
    ResidualLightSpec,
    SourceSpec,
)


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PhasesModel(_StrictModel):
    dphi_bc: float
    dphi_ca: float
    dphi_ab: float

    def to_domain(self) -> PhasePoint:
        return PhasePoint(self.dphi_bc, self.dphi_ca, self.dphi_ab)


class SourceModel(_StrictModel):
    p_in_w: float = Field(gt=0)
    t_a: float = Field(gt=0, le=1)
    t_b: float = Field(gt=0, le=1)
    t_c: float = Field(gt=0, le=1)
    p_dark_w: float = Field(default=0.0, ge=0)

    def to_domain(self) -> SourceSpec:
        return SourceSpec(self.p_in_w, self.t_a, self.t_b, self.t_c, self.p_dark_w)


class ResidualModel(_StrictModel):
    tau: float = Field(default=0.0, ge=0, lt=1)
    phi_sh: float = 0.0

    def to_domain(self) -> ResidualLightSpec:
        return ResidualLightSpec(self.tau, self.phi_sh)


class CrosstalkModel(_StrictModel):
    dphi_dh: float = Field(default=0.0, gt=-math.pi, lt=math.pi)
    convention: str = "cancelling"

    def to_domain(self) -> CrosstalkSpec:
        if self.convention not in CROSSTALK_CONVENTIONS:
            raise ConfigurationError(
                f"imperfections.crosstalk.convention must be one of "
                f"{CROSSTALK_CONVENTIONS}, got {self.convention!r}"
            )
        return CrosstalkSpec(self.dphi_dh, self.convention)


class FluctuationsModel(_StrictModel):
    sigma_pin_rel: float = Field(default=0.0, ge=0)
    sigma_phase: float = Field(default=0.0, ge=0)
    sigma_phase_fast: float = Field(default=0.0, ge=0)

    def to_domain(self) -> FluctuationSpec:
        return FluctuationSpec(self.sigma_pin_rel, self.sigma_phase, self.sigma_phase_fast)


class NonlinearityModel(_StrictModel):
    c2_per_w: float = 0.0
    c3_per_w2: float = 0.0

    def to_domain(self) -> NonlinearitySpec:
        return NonlinearitySpec(self.c2_per_w, self.c3_per_w2)


class PolarizationModel(_StrictModel):
    h_fraction_a: float = Field(default=1.0, ge=0, le=1)
    h_fraction_b: float = Field(default=1.0, ge=0, le=1)
    h_fraction_c: float = Field(default=1.0, ge=0, le=1)
    phases_v: PhasesModel | None = None
    polarizer_enabled: bool = False

    def to_domain(self) -> PolarizationSpec:
        phases_v = self.phases_v.to_domain() if self.phases_v else PhasePoint(0.0, 0.0, 0.0)
        return PolarizationSpec(
            self.h_fraction_a, self.h_fraction_b, self.h_fraction_c,
            phases_v, self.polarizer_enabled,
        )


class ImperfectionsModel(_StrictModel):
    residual: ResidualModel = Field(default_factory=ResidualModel)
    crosstalk: CrosstalkModel = Field(default_factory=CrosstalkModel)
    fluctuations: FluctuationsModel = Field(default_factory=FluctuationsModel)
    nonlinearity: NonlinearityModel = Field(default_factory=NonlinearityModel)
    polarization: PolarizationModel = Field(default_factory=PolarizationModel)

    def to_domain(self) -> ImperfectionSpec:
        return ImperfectionSpec(
            residual=self.residual.to_domain(),
            crosstalk=self.crosstalk.to_domain(),
            fluctuations=self.fluctuations.to_domain(),
            nonlinearity=self.nonlinearity.to_domain(),
            polarization=self.polarization.to_domain(),
        )


class ProtocolModel(_StrictModel):
    n_cycles: int = Field(default=100, ge=1)
    samples_per_setting: int = Field(default=10, ge=1)
    setting_duration_s: float = Field(default=13.0, gt=0)
    housing_temp_c: float = 23.0


class AnalysisModel(_StrictModel):
    malfunction_threshold_mad: float | None = Field(default=None, gt=0)
    sweep_points: int = Field(default=721, ge=5)
    mc_samples: int = Field(default=100_000, ge=2)


class RunConfig(_StrictModel):
    """Complete description of one simulation/analysis run."""

    phases: PhasesModel
    source: SourceModel
    imperfections: ImperfectionsModel = Field(default_factory=ImperfectionsModel)
    protocol: ProtocolModel = Field(default_factory=ProtocolModel)
    seed: int = 0
    analysis: AnalysisModel = Field(default_factory=AnalysisModel)

    def domain_specs(self):
        return (
            self.source.to_domain(),
            self.phases.to_domain(),
            self.imperfections.to_domain(),
        )


def _format_validation_error(exc: ValidationError, origin: str) -> str:
    parts = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{path}: {err['msg']}")
    return f"{origin}: invalid configuration: " + "; ".join(parts)


def parse_config(data: dict, origin: str = "<dict>") -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(_format_validation_error(exc, origin)) from exc


def read_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON: {exc}") from exc
    return parse_config(data, origin=str(path))


def config_json_schema() -> dict:
    """Published JSON schema of the run configuration."""
    return RunConfig.model_json_schema()
