"""Scenario schemas for the command line tool.

Complex numbers use ``{"re": .., "im": ..}`` (plain numbers are read as
real); matrices are row-major nested lists. Unknown keys are rejected.
"""

from __future__ import annotations

import json
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .exceptions import ConfigError

Matrix = list[list[Any]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TripleSpec(_Strict):
    A: Matrix
    S: Matrix
    Pi: Matrix


class FamilySpec(_Strict):
    n: Optional[int] = None
    b: list[Any]
    g: list[Any]
    h: Optional[list[Any]] = None
    U: Optional[Matrix] = None
    l: float = 1.0


class TabulatedH(_Strict):
    grid: list[float]
    values: list[Matrix]


HamiltonianSpec = Union[Literal["base-rank-one"], TabulatedH]


class _GbdtInput(_Strict):
    triple: Optional[TripleSpec] = None
    family: Optional[FamilySpec] = None
    hamiltonian: HamiltonianSpec = "base-rank-one"
    U: Optional[Matrix] = None
    l: float = Field(1.0, gt=0)
    grid_points: int = Field(101, ge=2)
    integrator_tol: float = Field(1e-10, gt=0)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.triple is None) == (self.family is None):
            raise ValueError("give exactly one of 'triple' or 'family'")
        return self


class VerifyIdentityConfig(_GbdtInput):
    tolerance: float = Field(1e-7, gt=0)
    j_tolerance: float = Field(1e-8, gt=0)


class TransformConfig(_GbdtInput):
    route: Literal["explicit", "ode"] = "ode"
    tolerance: float = Field(1e-9, gt=0)


class JumpConfig(_Strict):
    system: Literal["base"] = "base"
    family: Optional[FamilySpec] = None
    s_grid: list[float] = [0.25, 0.5, 0.75]
    eta: list[float] = [1e-2, 1e-3, 1e-4]
    l: float = Field(1.0, gt=0)
    jump_matrix: Literal["paper", "identity"] = "paper"
    tolerance: Optional[float] = None


class RealizationSpec(_Strict):
    alpha: Optional[Matrix] = None
    S0: Optional[Matrix] = None
    theta: Any
    pole: Any = None

    @model_validator(mode="after")
    def _shape(self):
        full = self.alpha is not None and self.S0 is not None
        if full == (self.pole is not None):
            raise ValueError("give either {'alpha', 'S0', 'theta'} or {'pole', 'theta'}")
        return self


class InvertConfig(_Strict):
    realization: RealizationSpec
    theta2: Optional[list[Any]] = None
    U: Optional[Matrix] = None
    l: float = Field(1.0, gt=0)
    s_samples: list[float] = Field(default_factory=lambda: [
        -5.0, -3.0, -1.7, -1.0, -0.6, -0.3, -0.1, 0.1, 0.3, 0.6,
        1.0, 1.7, 3.0, 5.0, -10.0, 10.0, -0.05, 0.05, 2.2, -2.2])
    tolerance: float = Field(1e-8, gt=0)
    s_grid: list[float] = [0.25, 0.5, 0.75]
    eta: list[float] = [1e-2, 1e-3, 1e-4]
    jump_tolerance: float = Field(1e-4, gt=0)


SCHEMAS = {
    "verify-identity": VerifyIdentityConfig,
    "transform": TransformConfig,
    "jump": JumpConfig,
    "invert": InvertConfig,
    "roundtrip": InvertConfig,
}


def load_config(command, path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return SCHEMAS[command].model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
