import numpy as np
import pytest

from voxelbandit.baselines import RandomSearch
from voxelbandit.core import (
    Budget,
    CountingEnvironment,
    Design,
    ExperienceBuffer,
    GridShape,
    SeedStreams,
    SyntheticSeparableEnv,
    best_so_far,
    brute_force_optimum,
    hamming_payoff,
    run_optimization,
)
from voxelbandit.errors import (
    BudgetExceeded,
    ConfigError,
    DesignFormatError,
    EmptyBuffer,
    IncompatibleAlgorithm,
    LengthMismatch,
    ShapeMismatch,
    VoxelBanditError,
)
from voxelbandit.baselines import GradientDescent
from voxelbandit.gol import GolEnv
from voxelbandit.models import GradDescConfig


def test_grid_shape_unravel_is_x_fastest() -> None:
    shape = GridShape(3, 2, 2)
    assert shape.size == 12
    assert shape.unravel(0) == (0, 0, 0)
    assert shape.unravel(1) == (1, 0, 0)
    assert shape.unravel(3) == (0, 1, 0)
    assert shape.unravel(6) == (0, 0, 1)
    assert shape.unravel(11) == (2, 1, 1)


def test_grid_shape_rejects_non_positive() -> None:
    with pytest.raises(ShapeMismatch):
        GridShape(0, 4)
    with pytest.raises(ShapeMismatch):
        GridShape(2, 2, 1.5)


def test_design_validates_length_and_values() -> None:
    with pytest.raises(LengthMismatch):
        Design(bits=np.zeros(5), shape=GridShape(2, 2))
    with pytest.raises(DesignFormatError):
        Design(bits=np.array([0, 1, 2, 0]), shape=GridShape(2, 2))


def test_validation_errors_share_package_base() -> None:
    cases = [
        (ShapeMismatch, lambda: GridShape(4, 0)),
        (DesignFormatError, lambda: Design(bits=np.array([1, -1]), shape=GridShape(2, 1))),
        (ConfigError, lambda: Budget(0)),
        (ConfigError, lambda: ExperienceBuffer(0)),
    ]
    for kind, build in cases:
        with pytest.raises(kind) as info:
            build()
        assert isinstance(info.value, VoxelBanditError)
        assert isinstance(info.value, ValueError)


def test_design_grid_layout() -> None:
    """bits[x + nx*y] sits at grid2d()[y, x]."""
    grid = np.array([[1, 0, 0],
                     [0, 0, 1]])
    design = Design.from_grid(grid)
    assert design.shape == GridShape(3, 2, 1)
    assert design.bits.tolist() == [1, 0, 0, 0, 0, 1]
    assert np.array_equal(design.grid2d(), grid)
    assert design.grid().shape == (1, 2, 3)


def test_hamming_payoff_examples() -> None:
    target = np.array([1, 0, 1, 1])
    assert hamming_payoff(np.array([1, 0, 1, 1]), target) == 1.0
    assert hamming_payoff(np.array([0, 1, 0, 0]), target) == 0.0
    assert hamming_payoff(np.array([1, 0, 0, 1]), target) == 0.75
    with pytest.raises(LengthMismatch):
        hamming_payoff(np.array([1, 0, 1]), target)


def test_seed_streams_are_reproducible_and_independent() -> None:
    a, b = SeedStreams(7), SeedStreams(7)
    assert np.array_equal(a.algorithm.random(5), b.algorithm.random(5))
    # Drawing from one stream must not shift another.
    c = SeedStreams(7)
    c.environment.random(100)
    assert np.array_equal(c.buffer.random(3), SeedStreams(7).buffer.random(3))
    assert not np.array_equal(SeedStreams(7).policy_init.random(3),
                              SeedStreams(7).critic_init.random(3))
    with pytest.raises(KeyError):
        a.generator("nope")


def test_experience_buffer_fifo() -> None:
    shape = GridShape(2, 1)
    buf = ExperienceBuffer(capacity=3)
    for k in range(5):
        buf.push(Design(bits=np.array([k % 2, 0]), shape=shape), float(k))
    assert len(buf) == 3
    assert [r for _, r in buf] == [2.0, 3.0, 4.0]

    actions, payoffs = buf.sample_arrays(8, np.random.default_rng(0))
    assert actions.shape == (8, 2)
    assert set(payoffs.tolist()) <= {2.0, 3.0, 4.0}


def test_experience_buffer_empty_raises() -> None:
    with pytest.raises(EmptyBuffer):
        ExperienceBuffer(4).sample(1, np.random.default_rng(0))


def test_synthetic_env_payoff_and_gradient() -> None:
    env = SyntheticSeparableEnv(np.array([1, 0, 1, 0]))
    target = Design(bits=np.array([1, 0, 1, 0]), shape=env.shape)
    assert env.evaluate(target) == 1.0
    assert env.relaxed_payoff(np.array([1.0, 0.0, 1.0, 0.0])) == 1.0
    assert np.allclose(env.gradient(target), 0.0)
    # Gradient points toward the target.
    g = env.gradient(np.full(4, 0.5))
    assert np.all(np.sign(g) == np.array([1, -1, 1, -1]))


def test_counting_environment_enforces_budget() -> None:
    env = CountingEnvironment(SyntheticSeparableEnv(np.array([1, 0])), limit=2)
    d = Design.zeros(env.shape)
    env.evaluate(d)
    env.evaluate(d)
    with pytest.raises(BudgetExceeded):
        env.evaluate(d)
    assert env.calls == 2


def test_run_optimization_trace() -> None:
    env = SyntheticSeparableEnv(np.array([1, 1, 0, 0, 1, 0]))
    result = run_optimization(env, RandomSearch(), Budget(40), seed=3, keep_designs=True)

    assert result.evaluations == 40
    assert [r.step for r in result.trace] == list(range(1, 41))
    assert np.array_equal([r.best_so_far for r in result.trace], best_so_far(result.payoffs))
    assert result.best_payoff == max(result.payoffs)
    assert env.evaluate(result.best) == result.best_payoff
    assert result.designs is not None and len(result.designs) == 40


def test_run_optimization_is_deterministic() -> None:
    env = SyntheticSeparableEnv(np.array([1, 1, 0, 0, 1, 0, 1, 1]))
    a = run_optimization(env, RandomSearch(), Budget(50), seed=11, wall_clock=False)
    b = run_optimization(env, RandomSearch(), Budget(50), seed=11, wall_clock=False)
    assert a.trace == b.trace
    assert a.best == b.best


def test_gradient_optimizer_rejects_gol() -> None:
    with pytest.raises(IncompatibleAlgorithm):
        run_optimization(GolEnv(4, 4), GradientDescent(GradDescConfig()), Budget(5), seed=0)


def test_brute_force_optimum_finds_target() -> None:
    target = np.array([0, 1, 1, 0, 1])
    best, payoff = brute_force_optimum(SyntheticSeparableEnv(target))
    assert payoff == 1.0
    assert best.bits.tolist() == target.tolist()
