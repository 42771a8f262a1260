from enum import Enum
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .fermions import XYParams
from .hilbert import RENORM_SLOP, ChainSpec
from .magnons import HarperParams, HeisenbergParams
from .operations import MeasureType, Parties, measure_accepts, parse_parties
from .qdp import QdpSpec

ModelConfig = Annotated[Union[HeisenbergParams, XYParams, HarperParams], Field(discriminator="name")]

NEAREST_NEIGHBOURS = "nn"


class InitialPreset(str, Enum):
    one_magnon_pair = "one_magnon_pair"
    vacuum_two_magnon_pair = "vacuum_two_magnon_pair"
    pq_mixture = "pq_mixture"


class InitialConfig(BaseModel):
    """Initial state; alpha and beta are [re, im] pairs and default to 1/sqrt(2).

    For the pq mixture, giving p and q evaluates that single point instead of the landscape.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    preset: InitialPreset = InitialPreset.one_magnon_pair
    alpha: Optional[tuple[float, float]] = None
    beta: Optional[tuple[float, float]] = None
    p: Optional[float] = Field(None, ge=0, le=1)
    q: Optional[float] = Field(None, ge=0, le=1)

    @model_validator(mode="after")
    def check_state(self):
        if (self.p is None) != (self.q is None):
            raise ValueError("Give both p and q, or neither")
        if self.p is not None:
            if self.preset != InitialPreset.pq_mixture:
                raise ValueError("p and q only apply to the pq_mixture preset")
            if self.p + self.q > 1 + 1e-12:
                raise ValueError(f"p + q must not exceed 1, got p={self.p}, q={self.q}")
        if (self.alpha is None) != (self.beta is None):
            raise ValueError("Give both alpha and beta, or neither")
        if self.alpha is not None:
            norm = abs(self.alpha_value) ** 2 + abs(self.beta_value) ** 2
            if abs(norm - 1.0) > RENORM_SLOP:
                raise ValueError(f"|alpha|^2 + |beta|^2 = {norm:.12g}, expected 1")
        return self

    @property
    def alpha_value(self) -> complex:
        return complex(*self.alpha) if self.alpha is not None else complex(1 / np.sqrt(2))

    @property
    def beta_value(self) -> complex:
        return complex(*self.beta) if self.beta is not None else complex(1 / np.sqrt(2))


class GridConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    t_start: float = 0.0
    t_stop: float = 10.0
    t_steps: int = Field(201, ge=1)
    t0_start: float = Field(0.0, ge=0)
    t0_stop: float = Field(5.0, ge=0)
    t0_steps: int = Field(101, ge=1)
    pq_steps: int = Field(50, ge=2)

    @model_validator(mode="after")
    def check_monotone(self):
        if self.t_stop < self.t_start:
            raise ValueError("t_stop must not be below t_start")
        if self.t0_stop < self.t0_start:
            raise ValueError("t0_stop must not be below t0_start")
        return self

    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_stop, self.t_steps)

    def epochs(self) -> np.ndarray:
        return np.linspace(self.t0_start, self.t0_stop, self.t0_steps)


class SweepConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    parameter: str
    values: list[float] = Field(..., min_length=1)


class OutputConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    directory: str = "out"
    engine: Literal["auto", "analytic", "exact"] = "auto"
    correlators: bool = False


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    measures: list[MeasureType] = Field(default_factory=lambda: [MeasureType.concurrence], min_length=1)
    parties: list[str] = Field(default_factory=lambda: [NEAREST_NEIGHBOURS], min_length=1)
    chain: ChainSpec = Field(default_factory=ChainSpec)
    model: ModelConfig = Field(default_factory=HeisenbergParams)
    initial: InitialConfig = Field(default_factory=InitialConfig)
    qdp: Optional[QdpSpec] = None
    grid: GridConfig = Field(default_factory=GridConfig)
    sweep: Optional[SweepConfig] = None
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def check_scenario(self):
        n = self.chain.n_sites
        for entry in self.parties:
            groups = self.party_groups(entry)
            sites = [s for parties in groups for group in parties for s in group]
            if max(sites) > n:
                raise ValueError(f"Parties {entry!r} reach beyond the {n}-site chain")
            if not any(measure_accepts(m, p) for m in self.measures for p in groups):
                raise ValueError(f"No requested measure accepts parties {entry!r}")
        if self.qdp is not None and self.qdp.site > n:
            raise ValueError(f"QDP site {self.qdp.site} beyond the {n}-site chain")
        if self.sweep is not None:
            fields = set(type(self.model).model_fields) - {"name"}
            if self.sweep.parameter not in fields:
                raise ValueError(
                    f"Sweep parameter {self.sweep.parameter!r} is not one of {sorted(fields)}"
                )
            self.swept_models()
        return self

    def party_groups(self, entry: str) -> list[Parties]:
        """'nn' expands to all nearest-neighbour pairs; anything else is a single party tuple."""
        if entry.strip() == NEAREST_NEIGHBOURS:
            return [((i,), (i + 1,)) for i in range(1, self.chain.n_sites)]
        return [parse_parties(entry)]

    def swept_models(self) -> list[tuple[Optional[float], BaseModel]]:
        """(swept value, model) pairs; a single (None, model) without a sweep."""
        if self.sweep is None:
            return [(None, self.model)]
        base = self.model.model_dump()
        return [
            (value, type(self.model).model_validate({**base, self.sweep.parameter: value}))
            for value in self.sweep.values
        ]
