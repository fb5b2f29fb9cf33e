# src/voxelbandit/analyzer.py
"""
Experiment assembly and post-run analysis.

Builds environments and optimizers from validated configs, runs every seed
(serially or in a process pool), and computes the late-training design
variance and the fabrication-error robustness curve of a best design.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from .baselines import Duct, EvolutionaryAlgorithm, GradientDescent, RandomSearch
from .core import (
    Budget,
    Design,
    GridShape,
    Optimizer,
    PayoffEnvironment,
    RunResult,
    SeedStreams,
    SyntheticSeparableEnv,
    run_optimization,
)
from .errors import ConfigError, InsufficientHistory
from .gol import GolEnv
from .io import save_json, write_design_pbd, write_frame_csv, write_trace_csv
from .marl import BanditActorCritic, BanditPPO, IndependentQLearning
from .models import (
    AnalysisConfig,
    BacConfig,
    BendEnvConfig,
    BppoConfig,
    DuctConfig,
    EaConfig,
    ExperimentConfig,
    GolEnvConfig,
    GradDescConfig,
    IqlConfig,
    RandomSearchConfig,
    SplitterEnvConfig,
    SyntheticEnvConfig,
)
from .photonics import BendEnv, SplitterEnv

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Factories
# ---------------------------------------------------------------------------

def build_environment(cfg) -> PayoffEnvironment:
    """Environment for an [environment] section."""
    if isinstance(cfg, SyntheticEnvConfig):
        shape = GridShape(cfg.nx, cfg.ny, cfg.nz)
        if cfg.target is not None:
            return SyntheticSeparableEnv(np.array([int(c) for c in cfg.target]), shape)
        return SyntheticSeparableEnv.random(shape, SeedStreams(cfg.target_seed).environment)
    if isinstance(cfg, GolEnvConfig):
        return GolEnv(cfg.width, cfg.height)
    if isinstance(cfg, SplitterEnvConfig):
        return SplitterEnv(cfg)
    if isinstance(cfg, BendEnvConfig):
        return BendEnv(cfg)
    raise ConfigError(f"Unknown environment config {type(cfg).__name__}")


_OPTIMIZERS = {
    RandomSearchConfig: lambda c: RandomSearch(),
    DuctConfig: Duct,
    EaConfig: EvolutionaryAlgorithm,
    IqlConfig: IndependentQLearning,
    BacConfig: BanditActorCritic,
    BppoConfig: BanditPPO,
    GradDescConfig: GradientDescent,
}


def build_optimizer(cfg) -> Optimizer:
    """Optimizer for an [algorithm] section."""
    try:
        factory = _OPTIMIZERS[type(cfg)]
    except KeyError as exc:
        raise ConfigError(f"Unknown algorithm config {type(cfg).__name__}") from exc
    return factory(cfg)


# ---------------------------------------------------------------------------
# Analyses
# ---------------------------------------------------------------------------

def design_variance(designs: Sequence[Design], window: int = 50) -> np.ndarray:
    """
    Mean per-voxel Bernoulli variance p(1-p) over a sliding window.

    Entry k belongs to step window + k, with p the material frequency of each
    voxel over designs[k : k + window].
    """
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    if len(designs) < window:
        raise InsufficientHistory(f"{len(designs)} designs recorded, window needs {window}")
    bits = np.stack([d.bits for d in designs]).astype(np.int64)
    csum = np.vstack([np.zeros((1, bits.shape[1]), dtype=np.int64), np.cumsum(bits, axis=0)])
    p = (csum[window:] - csum[:-window]) / window
    return np.mean(p * (1.0 - p), axis=1)


def perturb(design: Design, prob: float, rng: np.random.Generator) -> Design:
    """Resample each voxel uniformly with probability `prob`."""
    n = design.bits.size
    hit = rng.random(n) < prob
    fresh = rng.integers(0, 2, size=n, dtype=np.int8)
    return Design(bits=np.where(hit, fresh, design.bits), shape=design.shape)


def robustness_curve(
    best: Design,
    env: PayoffEnvironment,
    error_probs: Sequence[float],
    samples_per_prob: int = 20,
    seed: int = 0,
) -> List[Tuple[float, float]]:
    """(p, mean payoff of perturbed designs) per error probability; p=0 evaluates once."""
    env.check_design(best)
    rng = SeedStreams(seed).analysis
    curve: List[Tuple[float, float]] = []
    for prob in error_probs:
        if prob == 0.0:
            curve.append((float(prob), float(env.evaluate(best))))
            continue
        payoffs = [env.evaluate(perturb(best, prob, rng)) for _ in range(samples_per_prob)]
        curve.append((float(prob), float(np.mean(payoffs))))
    return curve


def summarize(best_by_seed: Dict[int, float]) -> pd.DataFrame:
    """One row per seed plus a `mean` row with the across-seed std (ddof=0)."""
    seeds = list(best_by_seed)
    values = np.array([best_by_seed[s] for s in seeds], dtype=float)
    rows = [{"seed": str(s), "best": v, "std": np.nan} for s, v in zip(seeds, values)]
    rows.append({"seed": "mean", "best": float(values.mean()), "std": float(values.std(ddof=0))})
    return pd.DataFrame(rows, columns=["seed", "best", "std"])


# ---------------------------------------------------------------------------
# Experiment runner
# ---------------------------------------------------------------------------

@dataclass
class SeedOutcome:
    seed: int
    result: RunResult
    variance: np.ndarray | None = None
    robustness: List[Tuple[float, float]] | None = None


@dataclass
class ExperimentReport:
    out_dir: Path
    outcomes: List[SeedOutcome]
    summary: pd.DataFrame
    files: List[Path] = field(default_factory=list)

    @property
    def best_by_seed(self) -> Dict[int, float]:
        return {o.seed: o.result.best_payoff for o in self.outcomes}


def run_seed(cfg: ExperimentConfig, seed: int) -> SeedOutcome:
    """One seeded run plus its optional analyses; runs inside worker processes."""
    env = build_environment(cfg.environment)
    algo = build_optimizer(cfg.algorithm)
    analysis: AnalysisConfig = cfg.analysis
    keep = cfg.run.keep_designs or analysis.variance
    result = run_optimization(env, algo, Budget(cfg.run.budget), seed,
                              keep_designs=keep, wall_clock=cfg.run.wall_clock)
    outcome = SeedOutcome(seed=seed, result=result)
    if analysis.variance and result.designs and len(result.designs) >= analysis.variance_window:
        outcome.variance = design_variance(result.designs, analysis.variance_window)
    if analysis.robustness:
        outcome.robustness = robustness_curve(result.best, env, analysis.robustness_probs,
                                              analysis.samples_per_prob, seed)
    if not cfg.run.keep_designs:
        result.designs = None
    return outcome


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentReport:
    """
    Run every seed of the experiment and write its outputs:

        trace_<seed>.csv   step,payoff,best,wall_ms
        best_<seed>.pbd    best design of the run
        summary.csv        per-seed best plus a mean/std row
        variance_<seed>.csv, robustness_<seed>.csv   when enabled
        curves.svg, robustness.svg                   when run.plot is set
    """
    out = Path(out_dir or cfg.run.out_dir)
    seeds = list(cfg.run.seeds)
    workers = min(cfg.run.workers, len(seeds))
    logger.info("experiment: %s on %s, %d seeds, T=%d, %d workers",
                cfg.algorithm.kind, cfg.environment.kind, len(seeds), cfg.run.budget, workers)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_seed, [cfg] * len(seeds), seeds))
    else:
        outcomes = [run_seed(cfg, s) for s in seeds]

    files: List[Path] = []
    for o in outcomes:
        files.append(write_trace_csv(o.result, out / f"trace_{o.seed}.csv"))
        files.append(write_design_pbd(o.result.best, out / f"best_{o.seed}.pbd"))
        if o.variance is not None:
            w = cfg.analysis.variance_window
            frame = pd.DataFrame({"step": np.arange(w, w + o.variance.size),
                                  "variance": o.variance})
            files.append(write_frame_csv(frame, out / f"variance_{o.seed}.csv"))
        if o.robustness is not None:
            frame = pd.DataFrame(o.robustness, columns=["prob", "mean_payoff"])
            files.append(write_frame_csv(frame, out / f"robustness_{o.seed}.csv"))

    summary = summarize({o.seed: o.result.best_payoff for o in outcomes})
    files.append(write_frame_csv(summary, out / "summary.csv"))
    files.append(save_json(cfg.model_dump(), out / "config.json"))

    if cfg.run.plot:
        from . import visualize

        files.append(visualize.plot_learning_curves(
            {o.seed: o.result for o in outcomes}, out / "curves.svg",
            title=f"{cfg.algorithm.kind} on {cfg.environment.kind}"))
        curves = {o.seed: o.robustness for o in outcomes if o.robustness is not None}
        if curves:
            files.append(visualize.plot_robustness(curves, out / "robustness.svg"))
        variance = {o.seed: o.variance for o in outcomes if o.variance is not None}
        if variance:
            files.append(visualize.plot_variance(variance, cfg.analysis.variance_window,
                                                 out / "variance.svg"))

    logger.info("experiment done: mean best %.6f", float(summary["best"].iloc[-1]))
    return ExperimentReport(out_dir=out, outcomes=outcomes, summary=summary, files=files)
