# src/voxelbandit/core.py
"""
Bandit formulation of binary topology optimization.

A design is a joint action a in {0,1}^N laid out on a grid. An environment maps
a design to a scalar payoff, an optimizer proposes designs and observes payoffs,
and a run is scored by the best payoff among its T evaluations.
"""

from __future__ import annotations

import logging
import time
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass
from typing import ClassVar, Deque, Dict, Iterator, List, Sequence, Tuple

import numpy as np

from .errors import (
    BudgetExceeded,
    ConfigError,
    DesignFormatError,
    EmptyBuffer,
    IncompatibleAlgorithm,
    LengthMismatch,
    ShapeMismatch,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Design space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridShape:
    """Axis lengths of the design grid; nz=1 for 2D problems."""
    nx: int
    ny: int
    nz: int = 1

    def __post_init__(self) -> None:
        for name in ("nx", "ny", "nz"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise ShapeMismatch(f"GridShape.{name} must be a positive integer, got {val!r}")

    @property
    def size(self) -> int:
        """Agent count N."""
        return self.nx * self.ny * self.nz

    @property
    def is_2d(self) -> bool:
        return self.nz == 1

    def unravel(self, n: int) -> Tuple[int, int, int]:
        """Agent index -> (x, y, z), row-major with x fastest."""
        x = n % self.nx
        y = (n // self.nx) % self.ny
        z = n // (self.nx * self.ny)
        return x, y, z

    def as_tuple(self) -> Tuple[int, int, int]:
        return self.nx, self.ny, self.nz


@dataclass
class Design:
    """
    Flat binary action vector with its grid shape.

    bits[n] is the action of agent n; index order is x fastest, then y, then z,
    so `bits.reshape(nz, ny, nx)` gives the voxel grid.
    """
    bits: np.ndarray
    shape: GridShape

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits)
        if bits.ndim != 1:
            bits = bits.reshape(-1)
        if bits.size != self.shape.size:
            raise LengthMismatch(
                f"Design has {bits.size} bits but shape {self.shape.as_tuple()} "
                f"needs {self.shape.size}"
            )
        if bits.size and not np.all((bits == 0) | (bits == 1)):
            raise DesignFormatError("Design bits must be exactly 0 or 1")
        self.bits = bits.astype(np.int8)

    @classmethod
    def from_grid(cls, grid: np.ndarray) -> "Design":
        """Build from a (ny, nx) or (nz, ny, nx) array."""
        arr = np.asarray(grid)
        if arr.ndim == 2:
            shape = GridShape(nx=arr.shape[1], ny=arr.shape[0], nz=1)
        elif arr.ndim == 3:
            shape = GridShape(nx=arr.shape[2], ny=arr.shape[1], nz=arr.shape[0])
        else:
            raise ShapeMismatch(f"Expected a 2D or 3D grid, got ndim={arr.ndim}")
        return cls(bits=arr.reshape(-1), shape=shape)

    @classmethod
    def zeros(cls, shape: GridShape) -> "Design":
        return cls(bits=np.zeros(shape.size, dtype=np.int8), shape=shape)

    @classmethod
    def ones(cls, shape: GridShape) -> "Design":
        return cls(bits=np.ones(shape.size, dtype=np.int8), shape=shape)

    @classmethod
    def random(cls, shape: GridShape, rng: np.random.Generator) -> "Design":
        return cls(bits=rng.integers(0, 2, size=shape.size, dtype=np.int8), shape=shape)

    def grid(self) -> np.ndarray:
        """(nz, ny, nx) view of the bits."""
        return self.bits.reshape(self.shape.nz, self.shape.ny, self.shape.nx)

    def grid2d(self) -> np.ndarray:
        """(ny, nx) view; only valid for 2D shapes."""
        if not self.shape.is_2d:
            raise ShapeMismatch("grid2d() requires nz == 1")
        return self.bits.reshape(self.shape.ny, self.shape.nx)

    def copy(self) -> "Design":
        return Design(bits=self.bits.copy(), shape=self.shape)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Design):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash((self.shape, self.bits.tobytes()))


@dataclass(frozen=True)
class Budget:
    """Number of payoff evaluations T a run may spend."""
    total_evaluations: int = 10000

    def __post_init__(self) -> None:
        if self.total_evaluations < 1:
            raise ConfigError(
                f"Budget.total_evaluations must be >= 1, got {self.total_evaluations}"
            )


def hamming_payoff(design: Design | np.ndarray, target: np.ndarray) -> float:
    """1 - (differing bits)/N."""
    bits = design.bits if isinstance(design, Design) else np.asarray(design)
    target = np.asarray(target)
    if bits.shape != target.shape:
        raise LengthMismatch(
            f"Design length {bits.size} does not match target length {target.size}"
        )
    n = bits.size
    return 1.0 - float(np.count_nonzero(bits != target)) / n


# ---------------------------------------------------------------------------
# Seeding
# ---------------------------------------------------------------------------

STREAM_IDS: Dict[str, int] = {
    "environment": 0,
    "algorithm": 1,
    "buffer": 2,
    "policy_init": 3,
    "critic_init": 4,
    "analysis": 5,
}


class SeedStreams:
    """
    Named random streams derived from one master seed.

    Stream k is seeded with SeedSequence(seed, spawn_key=(k,)), so each stream
    depends only on (seed, k); adding a new stream leaves the others unchanged.
    """

    def __init__(self, seed: int) -> None:
        self.seed = int(seed)
        self._generators: Dict[str, np.random.Generator] = {}

    def generator(self, name: str) -> np.random.Generator:
        if name not in STREAM_IDS:
            raise KeyError(f"Unknown seed stream {name!r}; known: {sorted(STREAM_IDS)}")
        if name not in self._generators:
            seq = np.random.SeedSequence(self.seed, spawn_key=(STREAM_IDS[name],))
            self._generators[name] = np.random.Generator(np.random.PCG64(seq))
        return self._generators[name]

    def __getattr__(self, name: str) -> np.random.Generator:
        if name in STREAM_IDS:
            return self.generator(name)
        raise AttributeError(name)


# ---------------------------------------------------------------------------
# Experience buffer
# ---------------------------------------------------------------------------

class ExperienceBuffer:
    """Bounded FIFO store of (design, payoff) pairs."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ConfigError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self._entries: Deque[Tuple[Design, float]] = deque(maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Tuple[Design, float]]:
        return iter(self._entries)

    @property
    def entries(self) -> List[Tuple[Design, float]]:
        return list(self._entries)

    def push(self, design: Design, payoff: float) -> None:
        self._entries.append((design, float(payoff)))

    def _indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        if not self._entries:
            raise EmptyBuffer("Cannot sample from an empty experience buffer")
        if batch < 1:
            raise ConfigError(f"batch must be >= 1, got {batch}")
        return rng.integers(0, len(self._entries), size=batch)

    def sample(self, batch: int, rng: np.random.Generator) -> List[Tuple[Design, float]]:
        """Uniform sampling with replacement."""
        idx = self._indices(batch, rng)
        return [self._entries[i] for i in idx]

    def sample_arrays(
        self, batch: int, rng: np.random.Generator
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Same draw as sample(), stacked into (B, N) actions and (B,) payoffs."""
        picked = self.sample(batch, rng)
        actions = np.stack([d.bits for d, _ in picked]).astype(float)
        payoffs = np.array([r for _, r in picked], dtype=float)
        return actions, payoffs


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------

class PayoffEnvironment(ABC):
    """
    Maps a Design to a scalar payoff.

    Implementations must be deterministic and hold no state that changes
    between evaluations, so they can be moved between threads and processes.
    """
    shape: GridShape
    differentiable: ClassVar[bool] = False

    @property
    def agent_count(self) -> int:
        return self.shape.size

    def check_design(self, design: Design) -> None:
        if design.shape != self.shape:
            raise ShapeMismatch(
                f"Design shape {design.shape.as_tuple()} does not match "
                f"environment shape {self.shape.as_tuple()}"
            )

    def constrain(self, design: Design) -> Design:
        """Fabrication-constraint mapping; identity unless overridden."""
        return design

    def gradient(self, design: Design | np.ndarray) -> np.ndarray:
        """Gradient of the relaxed payoff; only differentiable environments have one."""
        raise IncompatibleAlgorithm(f"{type(self).__name__} is not differentiable")

    @abstractmethod
    def evaluate(self, design: Design) -> float:
        ...


class SyntheticSeparableEnv(PayoffEnvironment):
    """
    Oracle environment: payoff is the Hamming agreement with a hidden target.

    The continuous relaxation 1 - mean((p - target)^2) is differentiable, which
    makes this the only shipped environment that gradient descent accepts.
    """
    differentiable: ClassVar[bool] = True

    def __init__(self, target: np.ndarray, shape: GridShape | None = None) -> None:
        target = np.asarray(target).reshape(-1)
        if shape is None:
            shape = GridShape(nx=target.size, ny=1, nz=1)
        self.shape = shape
        self.target = Design(bits=target, shape=shape).bits

    @classmethod
    def random(cls, shape: GridShape, rng: np.random.Generator) -> "SyntheticSeparableEnv":
        return cls(rng.integers(0, 2, size=shape.size), shape)

    def evaluate(self, design: Design) -> float:
        self.check_design(design)
        return hamming_payoff(design, self.target)

    def relaxed_payoff(self, p: np.ndarray) -> float:
        p = np.asarray(p, dtype=float).reshape(-1)
        if p.size != self.target.size:
            raise LengthMismatch(f"Expected {self.target.size} entries, got {p.size}")
        return 1.0 - float(np.mean((p - self.target) ** 2))

    def gradient(self, design: Design | np.ndarray) -> np.ndarray:
        p = design.bits if isinstance(design, Design) else design
        p = np.asarray(p, dtype=float).reshape(-1)
        if p.size != self.target.size:
            raise LengthMismatch(f"Expected {self.target.size} entries, got {p.size}")
        return 2.0 * (self.target - p) / p.size


class CountingEnvironment(PayoffEnvironment):
    """Wraps an environment and enforces the evaluation budget."""

    def __init__(self, inner: PayoffEnvironment, limit: int | None = None) -> None:
        self.inner = inner
        self.shape = inner.shape
        self.limit = limit
        self.calls = 0

    @property
    def differentiable(self) -> bool:  # type: ignore[override]
        return self.inner.differentiable

    def constrain(self, design: Design) -> Design:
        return self.inner.constrain(design)

    def gradient(self, design: Design | np.ndarray) -> np.ndarray:
        return self.inner.gradient(design)

    def evaluate(self, design: Design) -> float:
        if self.limit is not None and self.calls >= self.limit:
            raise BudgetExceeded(f"Evaluation budget of {self.limit} exhausted")
        self.calls += 1
        return float(self.inner.evaluate(design))


def brute_force_optimum(env: PayoffEnvironment, max_agents: int = 20) -> Tuple[Design, float]:
    """Enumerate all 2^N designs; first maximizer in counting order wins ties."""
    n = env.agent_count
    if n > max_agents:
        raise ConfigError(f"Exhaustive search over 2^{n} designs refused (max {max_agents})")
    best: Design | None = None
    best_payoff = -np.inf
    powers = np.arange(n)
    for code in range(2 ** n):
        bits = (code >> powers) & 1
        design = Design(bits=bits, shape=env.shape)
        payoff = env.evaluate(design)
        if payoff > best_payoff:
            best, best_payoff = design, payoff
    assert best is not None
    return best, float(best_payoff)


# ---------------------------------------------------------------------------
# Optimizer interface and the run loop
# ---------------------------------------------------------------------------

class Optimizer(ABC):
    """
    Propose/observe protocol driven by run_optimization.

    reset() is called once per run before the first propose(); propose(step)
    and observe() then strictly alternate for steps 1..T.
    """
    requires_gradient: ClassVar[bool] = False
    name: ClassVar[str] = "optimizer"

    def reset(self, env: PayoffEnvironment, budget: Budget, streams: SeedStreams) -> None:
        self.env = env
        self.shape = env.shape
        self.budget = budget
        self.streams = streams
        self.rng = streams.algorithm

    @abstractmethod
    def propose(self, step: int) -> Design:
        ...

    @abstractmethod
    def observe(self, design: Design, payoff: float) -> None:
        ...


@dataclass(frozen=True)
class RunRecord:
    step: int
    payoff: float
    best_so_far: float
    wall_ms: float


@dataclass
class RunResult:
    best: Design
    best_payoff: float
    trace: List[RunRecord]
    designs: List[Design] | None = None
    evaluations: int = 0

    @property
    def payoffs(self) -> np.ndarray:
        return np.array([rec.payoff for rec in self.trace], dtype=float)


def run_optimization(
    env: PayoffEnvironment,
    algo: Optimizer,
    budget: Budget,
    seed: int,
    keep_designs: bool = False,
    wall_clock: bool = True,
) -> RunResult:
    """
    Run one seeded, budgeted optimization and return the best-of-T result.

    Args:
        env: environment to optimize.
        algo: optimizer, reset at the start of the run.
        budget: number of evaluations T.
        seed: master seed, split into independent streams.
        keep_designs: also return every evaluated design (for design_variance).
        wall_clock: record elapsed milliseconds; False writes 0.0.

    Raises:
        IncompatibleAlgorithm: gradient optimizer on a non-differentiable env.
    """
    if algo.requires_gradient and not env.differentiable:
        raise IncompatibleAlgorithm(
            f"{type(algo).__name__} needs gradients but {type(env).__name__} is not differentiable"
        )

    counter = CountingEnvironment(env, limit=budget.total_evaluations)
    streams = SeedStreams(seed)
    algo.reset(counter, budget, streams)

    trace: List[RunRecord] = []
    designs: List[Design] | None = [] if keep_designs else None
    best: Design | None = None
    best_payoff = -np.inf
    t0 = time.perf_counter()

    logger.info("run start: %s seed=%d T=%d N=%d", type(algo).__name__, seed,
                budget.total_evaluations, env.agent_count)

    for step in range(1, budget.total_evaluations + 1):
        design = algo.propose(step)
        payoff = counter.evaluate(design)
        algo.observe(design, payoff)

        if payoff > best_payoff:
            best, best_payoff = design.copy(), payoff
        wall_ms = (time.perf_counter() - t0) * 1000.0 if wall_clock else 0.0
        trace.append(RunRecord(step=step, payoff=payoff, best_so_far=best_payoff, wall_ms=wall_ms))
        if designs is not None:
            designs.append(design.copy())
        logger.debug("step %d payoff=%.6f best=%.6f", step, payoff, best_payoff)

    assert best is not None
    logger.info("run done: %s seed=%d best=%.6f evaluations=%d", type(algo).__name__, seed,
                best_payoff, counter.calls)
    return RunResult(
        best=best,
        best_payoff=float(best_payoff),
        trace=trace,
        designs=designs,
        evaluations=counter.calls,
    )


def best_so_far(payoffs: Sequence[float]) -> np.ndarray:
    """Running maximum of a payoff sequence."""
    return np.maximum.accumulate(np.asarray(payoffs, dtype=float))
