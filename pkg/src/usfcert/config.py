"""Experiment configuration: a YAML document validated with pydantic.

Top-level keys: ``model``, ``sim``, ``ensemble``, ``monitors``, ``output``
plus the optional task blocks ``usf``, ``comparison``, ``example1``,
``example2``, ``fit`` and ``seed``. Unknown keys are rejected everywhere.
Signals are given as dicts understood by :func:`usfcert.signals.from_dict`.
"""

from __future__ import annotations

from typing import Any, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import sdde
from .signals import from_dict


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _signal_ok(v):
    if v is not None:
        from_dict(v)
    return v


class ModelConfig(_Strict):
    builtin: Literal["example1", "example2", "linear", "zero"] = "linear"
    params: dict[str, Any] = Field(default_factory=dict)

    def build(self) -> sdde.SddeModel:
        p = dict(self.params)
        if self.builtin == "example1":
            return sdde.builtin_example1(p.pop("c"), p.pop("e"), p.pop("tau", 0.5), **_only(p, "period"))
        if self.builtin == "example2":
            return sdde.builtin_example2(p.pop("lambda"), p.pop("l"), p.pop("k"), p.pop("tau", 0.5),
                                         **_only(p))
        if self.builtin == "zero":
            n = int(p.pop("n", 1))
            _only(p)
            return sdde.SddeModel(n, 1, 0.0, lambda t, x, y, r, u: 0.0 * x,
                                  lambda t, x, y, r, u: np.zeros(x.shape + (1,)), builtin="zero")
        kw = _only(p, "a", "b", "a_delay", "b_delay", "gamma", "tau", "input_gain")
        return sdde.linear_model(**{"a": -0.5, "b": 0.3, **kw})


def _only(p, *allowed):
    extra = set(p) - set(allowed)
    if extra:
        raise ValueError(f"unknown model parameters: {sorted(extra)}")
    return p


class SimSection(_Strict):
    dt: float = 1e-3
    t_span: tuple[float, float] = (0.0, 1.0)
    history: float = 1.0
    input: dict[str, Any] | None = None
    initial_regime: int = 1          # 1-based, as in the CSV outputs
    record_every: int = 1

    @field_validator("input")
    @classmethod
    def _chk_input(cls, v):
        return _signal_ok(v)

    @field_validator("dt")
    @classmethod
    def _pos(cls, v):
        if not v > 0:
            raise ValueError("dt must be positive")
        return v

    def build(self, seed) -> sdde.SimConfig:
        return sdde.SimConfig(self.dt, tuple(self.t_span), self.history,
                              None if self.input is None else from_dict(self.input),
                              seed, self.initial_regime - 1, self.record_every)


class EnsembleSection(_Strict):
    N: int = 1000
    p: float = 2.0
    threads: int = 1
    input_levels: list[float] = Field(default_factory=lambda: [0.0, 0.1, 0.2])

    @field_validator("N")
    @classmethod
    def _n(cls, v):
        if v < 2:
            raise ValueError("N must be at least 2")
        return v


class MonitorSection(_Strict):
    kind: Literal["razumikhin", "krasovskii"] = "razumikhin"
    mu: dict[str, Any]
    q: float = 1.0
    rho: float | None = None
    T: float | None = None
    c: list[float] = Field(default_factory=lambda: [1.0])
    w: float = 0.0
    variant: Literal["guas", "iss", "iiss"] = "guas"
    varpi: float = 0.0
    varpi1: float = 0.0
    varpi2: float = 0.0
    budget: float = 0.05

    @field_validator("mu")
    @classmethod
    def _chk(cls, v):
        return _signal_ok(v)


class UsfSection(_Strict):
    mu: dict[str, Any] = Field(default_factory=lambda: {"family": "constant", "value": -1.0})
    T: float = 1.0
    horizon: float = 100.0
    grid_step: float = 1e-3
    q: float = 1.0
    rho: float = 1.0
    q_prior: float = 1.5
    tau: float = 0.5
    horizons: list[float] = Field(default_factory=lambda: [50.0, 100.0, 200.0])

    @field_validator("mu")
    @classmethod
    def _chk(cls, v):
        return _signal_ok(v)


class ComparisonSection(_Strict):
    mu: dict[str, Any] = Field(default_factory=lambda: {"family": "constant", "value": -1.0})
    pi: dict[str, Any] = Field(default_factory=lambda: {"family": "constant", "value": 0.0})
    psi: dict[str, Any] = Field(default_factory=lambda: {"family": "constant", "value": 0.0})
    y0: float = 1.0
    t_span: tuple[float, float] = (0.0, 10.0)
    dt: float = 1e-3
    T: float = 1.0

    @field_validator("mu", "pi", "psi")
    @classmethod
    def _chk(cls, v):
        return _signal_ok(v)


class Example1Section(_Strict):
    c: float = 0.95
    e: float = 4.0
    N: int = 2000
    horizon: float = 10.0
    tau: float = 0.5
    dt: float = 1e-3
    q_step: float = 1e-3
    q_max: float = 50.0


class Example2Section(_Strict):
    lam: float = 1.0
    l: float = 0.1
    N: int = 300
    horizon: float = 20.0
    tau: float = 0.5
    dt: float = 1e-3
    u_levels: list[float] = Field(default_factory=lambda: [0.0, 0.1, 0.2])
    k_rule: Literal["printed", "window"] = "printed"


class FitSection(_Strict):
    window: tuple[float, float] | None = None


class OutputSection(_Strict):
    dir: str = "out"


class ExperimentConfig(_Strict):
    model: ModelConfig = Field(default_factory=ModelConfig)
    sim: SimSection = Field(default_factory=SimSection)
    ensemble: EnsembleSection = Field(default_factory=EnsembleSection)
    monitors: list[MonitorSection] = Field(default_factory=list)
    output: OutputSection = Field(default_factory=OutputSection)
    usf: UsfSection = Field(default_factory=UsfSection)
    comparison: ComparisonSection = Field(default_factory=ComparisonSection)
    example1: Example1Section = Field(default_factory=Example1Section)
    example2: Example2Section = Field(default_factory=Example2Section)
    fit: FitSection = Field(default_factory=FitSection)
    seed: int = 0

    @model_validator(mode="after")
    def _model_builds(self):
        self.model.build()
        return self


def parse(text: str) -> ExperimentConfig:
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ValueError("config must be a mapping")
    return ExperimentConfig.model_validate(data)


def load(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse(fh.read())


def dump(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)
