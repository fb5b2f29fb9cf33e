# src/voxelbandit/baselines.py
"""
Baseline optimizers: uniform random search, decoupled UCB (DUCT) with noisy
exploration, a PyGAD-style evolutionary algorithm and gradient descent through
a straight-through quantizer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import ClassVar, Tuple

import numpy as np

from .core import Budget, Design, GridShape, Optimizer, PayoffEnvironment, SeedStreams
from .models import DuctConfig, EaConfig, GradDescConfig
from .tinynn import AdamState, LrSchedule, StraightThrough, adam_step

logger = logging.getLogger(__name__)


class RandomSearch(Optimizer):
    """Every design drawn uniformly from {0,1}^N."""
    name: ClassVar[str] = "random"

    def propose(self, step: int) -> Design:
        return Design.random(self.shape, self.rng)

    def observe(self, design: Design, payoff: float) -> None:
        pass


# ---------------------------------------------------------------------------
# DUCT
# ---------------------------------------------------------------------------

@dataclass
class DuctState:
    """
    Per-agent visit counts v[n, a] and reward sums w[n, a].

    Each agent scores action a with w/v + g * c * sqrt(v0 + v1) / v where g is
    a gaussian draw per (step, agent); an unvisited action is picked first.
    """
    visits: np.ndarray
    rewards: np.ndarray
    exploration: float = 0.2145
    noise_mean: float = 0.3242
    noise_std: float = 1.0
    noise: bool = True
    warmup_random_steps: int = 50

    @classmethod
    def empty(cls, n_agents: int, cfg: DuctConfig | None = None) -> "DuctState":
        cfg = cfg or DuctConfig()
        return cls(
            visits=np.zeros((n_agents, 2), dtype=np.int64),
            rewards=np.zeros((n_agents, 2), dtype=float),
            exploration=cfg.exploration,
            noise_mean=cfg.noise_mean,
            noise_std=cfg.noise_std,
            noise=cfg.noise,
            warmup_random_steps=cfg.warmup_random_steps,
        )

    @property
    def n_agents(self) -> int:
        return self.visits.shape[0]

    def _noise(self, size: int, rng: np.random.Generator) -> np.ndarray:
        if not self.noise:
            return np.ones(size)
        return rng.normal(self.noise_mean, self.noise_std, size=size)

    def scores(self, g: np.ndarray) -> np.ndarray:
        """(N, 2) DUCT scores; entries for unvisited actions are +inf."""
        v = self.visits.astype(float)
        total = v.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = self.rewards / v + g[:, None] * self.exploration * np.sqrt(total) / v
        return np.where(self.visits == 0, np.inf, s)

    def select_all(self, rng: np.random.Generator) -> np.ndarray:
        s = self.scores(self._noise(self.n_agents, rng))
        # ties (including two unvisited actions) go to action 0
        return (s[:, 1] > s[:, 0]).astype(np.int8)

    def select(self, n: int, rng: np.random.Generator) -> int:
        v0, v1 = self.visits[n]
        if v0 == 0:
            return 0
        if v1 == 0:
            return 1
        g = self._noise(1, rng)[0]
        total = np.sqrt(v0 + v1)
        s0 = self.rewards[n, 0] / v0 + g * self.exploration * total / v0
        s1 = self.rewards[n, 1] / v1 + g * self.exploration * total / v1
        return int(s1 > s0)

    def update(self, actions: np.ndarray, payoff: float) -> None:
        idx = np.arange(self.n_agents)
        self.visits[idx, actions] += 1
        self.rewards[idx, actions] += payoff


def duct_select(state: DuctState, n: int, rng: np.random.Generator) -> int:
    return state.select(n, rng)


class Duct(Optimizer):
    name: ClassVar[str] = "duct"

    def __init__(self, cfg: DuctConfig | None = None) -> None:
        self.cfg = cfg or DuctConfig()

    def reset(self, env: PayoffEnvironment, budget: Budget, streams: SeedStreams) -> None:
        super().reset(env, budget, streams)
        self.state = DuctState.empty(self.shape.size, self.cfg)

    def propose(self, step: int) -> Design:
        return duct_propose(self.state, self.shape, step, self.rng)

    def observe(self, design: Design, payoff: float) -> None:
        self.state.update(design.bits.astype(np.intp), payoff)


def duct_propose(
    state: DuctState, shape: GridShape, step: int, rng: np.random.Generator
) -> Design:
    """Uniform random during warmup, then every agent picks its best DUCT score."""
    if step <= state.warmup_random_steps:
        return Design.random(shape, rng)
    return Design(bits=state.select_all(rng), shape=shape)


def duct_run_step(
    state: DuctState, env: PayoffEnvironment, step: int, rng: np.random.Generator
) -> Tuple[Design, float]:
    """One DUCT step outside the run loop: select, evaluate, update."""
    design = duct_propose(state, env.shape, step, rng)
    payoff = env.evaluate(design)
    state.update(design.bits.astype(np.intp), payoff)
    return design, payoff


# ---------------------------------------------------------------------------
# Evolutionary algorithm
# ---------------------------------------------------------------------------

def uniform_crossover(
    parent_a: np.ndarray, parent_b: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    take_a = rng.random(parent_a.size) < 0.5
    return np.where(take_a, parent_a, parent_b)


def swap_mutation(genome: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Each of round(rate * N) chosen genes swaps position with a uniformly chosen gene."""
    out = genome.copy()
    n = out.size
    count = int(round(rate * n))
    if count == 0 or n < 2:
        return out
    genes = rng.choice(n, size=count, replace=False)
    partners = rng.integers(0, n, size=count)
    for i, j in zip(genes, partners):
        out[i], out[j] = out[j], out[i]
    return out


def ea_generation(
    population: np.ndarray,
    fitness: np.ndarray,
    cfg: EaConfig,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Steady-state selection, elitism, uniform crossover and swap mutation.

    Returns the next (population, fitness); fitness is carried for the
    keep_parents elites and NaN for new offspring.
    """
    pop_size = population.shape[0]
    # stable sort: equal fitness keeps the earlier individual first
    order = np.argsort(-fitness, kind="stable")
    parents = population[order[:cfg.parents_mating]]
    parent_fitness = fitness[order[:cfg.parents_mating]]

    keep = min(cfg.keep_parents, pop_size)
    next_pop = np.empty_like(population)
    next_fit = np.full(pop_size, np.nan)
    next_pop[:keep] = parents[:keep]
    next_fit[:keep] = parent_fitness[:keep]

    n_parents = parents.shape[0]
    for k in range(pop_size - keep):
        a = parents[k % n_parents]
        b = parents[(k + 1) % n_parents]
        child = uniform_crossover(a, b, rng)
        if cfg.gene_mutation_rate > 0:
            child = swap_mutation(child, cfg.gene_mutation_rate, rng)
        next_pop[keep + k] = child
    return next_pop, next_fit


class EvolutionaryAlgorithm(Optimizer):
    name: ClassVar[str] = "ea"

    def __init__(self, cfg: EaConfig | None = None) -> None:
        self.cfg = cfg or EaConfig()

    def reset(self, env: PayoffEnvironment, budget: Budget, streams: SeedStreams) -> None:
        super().reset(env, budget, streams)
        self.population = self.rng.integers(
            0, 2, size=(self.cfg.population, self.shape.size), dtype=np.int8
        )
        self.fitness = np.full(self.cfg.population, np.nan)
        self.generation = 0
        self._cursor = 0

    def _next_unevaluated(self) -> int:
        while self._cursor < self.cfg.population and not np.isnan(self.fitness[self._cursor]):
            self._cursor += 1
        if self._cursor >= self.cfg.population:
            self.population, self.fitness = ea_generation(
                self.population, self.fitness, self.cfg, self.rng
            )
            self.generation += 1
            logger.info("ea generation %d, elite fitness %.6f",
                        self.generation, float(np.nanmax(self.fitness)))
            self._cursor = 0
            return self._next_unevaluated()
        return self._cursor

    def propose(self, step: int) -> Design:
        i = self._next_unevaluated()
        return Design(bits=self.population[i].copy(), shape=self.shape)

    def observe(self, design: Design, payoff: float) -> None:
        self.fitness[self._cursor] = payoff
        self._cursor += 1


# ---------------------------------------------------------------------------
# Gradient descent with straight-through quantization
# ---------------------------------------------------------------------------

def quantize(latent: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """latent >= threshold -> 1; 0.5 itself maps to material."""
    return (np.asarray(latent) >= threshold).astype(np.int8)


@dataclass
class LatentState:
    latent: np.ndarray
    adam: AdamState
    schedule: LrSchedule
    step: int = 0


def grad_descent_step(
    state: LatentState,
    env: PayoffEnvironment,
    shape: GridShape,
    threshold: float = 0.5,
) -> Tuple[Design, float]:
    """
    Quantize, apply the fabrication mapping, evaluate, then take one ascent
    step on the latent with the gradient copied straight through.
    """
    design = latent_design(state, env, shape, threshold)
    payoff = env.evaluate(design)
    apply_latent_gradient(state, env, design)
    return design, payoff


def latent_design(
    state: LatentState, env: PayoffEnvironment, shape: GridShape, threshold: float = 0.5
) -> Design:
    return env.constrain(Design(bits=quantize(state.latent, threshold), shape=shape))


def apply_latent_gradient(state: LatentState, env: PayoffEnvironment, design: Design) -> None:
    grad = env.gradient(design)
    grad = StraightThrough.backward(grad)
    lr = state.schedule(state.step)
    # ascent on payoff == descent on -payoff
    adam_step([state.latent], [-grad], state.adam, lr)
    np.clip(state.latent, 0.0, 1.0, out=state.latent)
    state.step += 1


class GradientDescent(Optimizer):
    requires_gradient: ClassVar[bool] = True
    name: ClassVar[str] = "grad"

    def __init__(self, cfg: GradDescConfig | None = None) -> None:
        self.cfg = cfg or GradDescConfig()

    def reset(self, env: PayoffEnvironment, budget: Budget, streams: SeedStreams) -> None:
        super().reset(env, budget, streams)
        n = self.shape.size
        if self.cfg.init == "half":
            latent = np.full(n, 0.5)
        else:
            latent = self.rng.uniform(0.0, 1.0, size=n)
        total = budget.total_evaluations
        schedule = LrSchedule(
            peak_lr=self.cfg.peak_lr,
            kind=self.cfg.schedule,
            warmup_steps=int(self.cfg.warmup_fraction * total),
            total_steps=total,
        )
        self.state = LatentState(
            latent=latent,
            adam=AdamState.zeros_like([latent], nesterov=self.cfg.nesterov),
            schedule=schedule,
        )

    def propose(self, step: int) -> Design:
        return latent_design(self.state, self.env, self.shape, self.cfg.threshold)

    def observe(self, design: Design, payoff: float) -> None:
        apply_latent_gradient(self.state, self.env, design)
