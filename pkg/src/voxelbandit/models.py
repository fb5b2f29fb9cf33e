# src/voxelbandit/models.py
"""
Configuration models.

Every hyperparameter is a pydantic field whose default is the tuned value; an
experiment file only lists what it overrides. Unknown keys are rejected.
"""

from __future__ import annotations

import os
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


# ---------------------------------------------------------------------------
# Algorithms
# ---------------------------------------------------------------------------

class RandomSearchConfig(StrictModel):
    kind: Literal["random"] = "random"


class DuctConfig(StrictModel):
    """Decoupled UCB with gaussian-scaled exploration."""
    kind: Literal["duct"] = "duct"
    exploration: float = Field(0.2145, ge=0.0)
    noise: bool = True
    noise_mean: float = 0.3242
    noise_std: float = Field(1.0, ge=0.0)
    warmup_random_steps: int = Field(50, ge=0)


class EaConfig(StrictModel):
    kind: Literal["ea"] = "ea"
    population: int = Field(92, ge=1)
    parents_mating: int = Field(8, ge=0)
    keep_parents: int = Field(2, ge=0)
    crossover: Literal["uniform"] = "uniform"
    mutation: Literal["swap"] = "swap"
    gene_mutation_rate: float = Field(0.34, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _ordering(self) -> "EaConfig":
        if not self.population >= self.parents_mating >= self.keep_parents >= 0:
            raise ValueError(
                "need population >= parents_mating >= keep_parents >= 0, got "
                f"{self.population}, {self.parents_mating}, {self.keep_parents}"
            )
        if self.parents_mating < 1:
            raise ValueError("parents_mating must be >= 1")
        return self


class IqlConfig(StrictModel):
    kind: Literal["iql"] = "iql"
    lr: float = Field(1e-3, gt=0.0)
    batch: int = Field(32, ge=1)
    buffer: int = Field(200, ge=1)
    hidden: List[int] = Field(default_factory=lambda: [64, 64])
    bands: int = Field(8, ge=1)
    eps_start: float = Field(1.0, ge=0.0, le=1.0)
    eps_end: float = Field(0.05, ge=0.0, le=1.0)
    eps_anneal_fraction: float = Field(0.6, gt=0.0, le=1.0)
    updates_per_step: int = Field(1, ge=1)
    nesterov: bool = False


class BacConfig(StrictModel):
    kind: Literal["bac"] = "bac"
    critic_steps: int = Field(128, ge=0)
    policy_steps: int = Field(1024, ge=0)
    batch: int = Field(32, ge=1)
    critic_lr: float = Field(1e-4, gt=0.0)
    policy_lr: float = Field(1e-3, gt=0.0)
    critic_hidden: List[int] = Field(default_factory=lambda: [256, 256])
    policy_hidden: List[int] = Field(default_factory=lambda: [128, 128])
    critic_kind: Literal["pooled", "local", "flat"] = "pooled"
    policy: Literal["mlp", "flat"] = "mlp"
    bands: int = Field(8, ge=1)
    mask_fraction: float = Field(0.95, ge=0.0, lt=1.0)
    policy_reinit_period: int = Field(1, ge=0)
    critic_reinit_period: int = Field(250, ge=0)
    reinit_burst_multiplier: int = Field(512, ge=1)
    buffer: int = Field(10000, ge=1)
    warmup_samples: Optional[int] = Field(None, ge=1)
    nesterov: bool = False

    @property
    def warmup(self) -> int:
        return self.warmup_samples if self.warmup_samples is not None else self.batch


class BppoConfig(StrictModel):
    kind: Literal["bppo"] = "bppo"
    rollout_size: int = Field(32, ge=1)
    updates_per_rollout: int = Field(66, ge=0)
    clip: float = Field(0.4978, gt=0.0)
    entropy_coef: float = Field(0.005759, ge=0.0)
    lr: float = Field(1e-4, gt=0.0)
    hidden: List[int] = Field(default_factory=lambda: [126, 126, 126, 126])
    bands: int = Field(8, ge=1)
    minibatch: int = Field(10000, ge=1)
    normalize_advantages: bool = True
    policy: Literal["mlp", "flat"] = "mlp"
    nesterov: bool = False


class GradDescConfig(StrictModel):
    kind: Literal["grad"] = "grad"
    peak_lr: float = Field(0.01, gt=0.0)
    schedule: Literal["cosine-with-warmup", "constant"] = "cosine-with-warmup"
    warmup_fraction: float = Field(0.1, ge=0.0, le=1.0)
    threshold: float = Field(0.5, gt=0.0, lt=1.0)
    nesterov: bool = True
    init: Literal["uniform", "half"] = "uniform"


AlgorithmConfig = Annotated[
    Union[
        RandomSearchConfig, DuctConfig, EaConfig, IqlConfig, BacConfig, BppoConfig, GradDescConfig
    ],
    Field(discriminator="kind"),
]


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------

MATERIAL_PERMITTIVITY = {"silicon": 12.25, "polymer": 2.6326}


class SyntheticEnvConfig(StrictModel):
    kind: Literal["synthetic"] = "synthetic"
    nx: int = Field(16, ge=1)
    ny: int = Field(1, ge=1)
    nz: int = Field(1, ge=1)
    target: Optional[str] = None
    target_seed: int = 0

    @field_validator("target")
    @classmethod
    def _bitstring(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and (not v or set(v) - {"0", "1"}):
            raise ValueError("target must be a string of 0/1 characters")
        return v

    @model_validator(mode="after")
    def _target_length(self) -> "SyntheticEnvConfig":
        if self.target is not None and len(self.target) != self.nx * self.ny * self.nz:
            raise ValueError(
                f"target has {len(self.target)} bits, grid has {self.nx * self.ny * self.nz}"
            )
        return self


class GolEnvConfig(StrictModel):
    kind: Literal["gol"] = "gol"
    width: int = Field(32, ge=1)
    height: int = Field(32, ge=1)


class SceneConfig(StrictModel):
    """Geometry and numerics shared by the photonic tasks (lengths in meters)."""
    material: Literal["silicon", "polymer"] = "silicon"
    eps_wg: Optional[float] = Field(None, ge=1.0)
    fabrication: Optional[Literal["none", "connected-no-cavities"]] = None
    anchor: Literal["bottom", "top", "left", "right"] = "bottom"
    wavelength: float = Field(1550e-9, gt=0.0)
    dx: float = Field(30e-9, gt=0.0)
    cells_per_voxel: int = Field(4, ge=1)
    design_nx: int = Field(12, ge=1)
    design_ny: int = Field(12, ge=1)
    guide_width_cells: int = Field(7, ge=1)
    pml_cells: int = Field(15, ge=1)
    pml_order: float = Field(3.0, gt=0.0)
    pml_reflection: float = Field(1e-6, gt=0.0, lt=1.0)
    sigma_max: Optional[float] = Field(None, gt=0.0)
    courant: float = Field(0.99, gt=0.0, le=1.0)
    ramp_periods: float = Field(3.0, gt=0.0)
    transits: float = Field(3.0, gt=0.0)
    stub_cells: int = Field(20, ge=8)
    margin_cells: int = Field(10, ge=2)
    divergence_factor: float = Field(1e6, gt=1.0)

    @property
    def permittivity(self) -> float:
        return self.eps_wg if self.eps_wg is not None else MATERIAL_PERMITTIVITY[self.material]

    @property
    def fabrication_mode(self) -> str:
        if self.fabrication is not None:
            return self.fabrication
        return "connected-no-cavities" if self.material == "polymer" else "none"


class BendEnvConfig(SceneConfig):
    kind: Literal["bend"] = "bend"


class SplitterEnvConfig(SceneConfig):
    kind: Literal["splitter"] = "splitter"
    targets: List[float] = Field(default_factory=lambda: [0.65, 0.35])
    design_nx: int = Field(16, ge=1)
    design_ny: int = Field(16, ge=1)

    @field_validator("targets")
    @classmethod
    def _targets(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("targets must list at least one output")
        if any(t < 0 for t in v) or sum(v) > 1.0 + 1e-12:
            raise ValueError(f"targets must be non-negative and sum to <= 1, got {v}")
        return v


EnvironmentConfig = Annotated[
    Union[SyntheticEnvConfig, GolEnvConfig, BendEnvConfig, SplitterEnvConfig],
    Field(discriminator="kind"),
]


# ---------------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------------

class RunConfig(StrictModel):
    budget: int = Field(10000, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    out_dir: str = "outputs"
    jobs: Optional[int] = Field(None, ge=1)
    wall_clock: bool = True
    keep_designs: bool = False
    plot: bool = True

    @field_validator("seeds")
    @classmethod
    def _seeds(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("at least one seed is required")
        if len(set(v)) != len(v):
            raise ValueError(f"duplicate seeds in {v}")
        return v

    @property
    def workers(self) -> int:
        return self.jobs if self.jobs is not None else (os.cpu_count() or 1)


class AnalysisConfig(StrictModel):
    variance: bool = False
    variance_window: int = Field(50, ge=1)
    robustness: bool = False
    robustness_probs: List[float] = Field(
        default_factory=lambda: [0.0, 0.05, 0.1, 0.2, 0.3, 0.5]
    )
    samples_per_prob: int = Field(20, ge=1)

    @field_validator("robustness_probs")
    @classmethod
    def _probs(cls, v: List[float]) -> List[float]:
        if any(not 0.0 <= p <= 1.0 for p in v):
            raise ValueError(f"error probabilities must lie in [0, 1], got {v}")
        return v


class ExperimentConfig(StrictModel):
    environment: EnvironmentConfig
    algorithm: AlgorithmConfig
    run: RunConfig = Field(default_factory=RunConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
