import numpy as np
import pytest

from voxelbandit.core import Design, GridShape
from voxelbandit.errors import ShapeMismatch
from voxelbandit.gol import GolEnv, gol_payoff, gol_step


def _naive_step(grid: np.ndarray) -> np.ndarray:
    h, w = grid.shape
    out = np.zeros_like(grid)
    for y in range(h):
        for x in range(w):
            live = 0
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if (dy or dx) and 0 <= y + dy < h and 0 <= x + dx < w:
                        live += grid[y + dy, x + dx]
            if grid[y, x]:
                out[y, x] = live in (2, 3)
            else:
                out[y, x] = live == 3
    return out


def test_block_is_still_life() -> None:
    grid = np.zeros((6, 6), dtype=np.int8)
    grid[2:4, 2:4] = 1
    assert np.array_equal(gol_step(grid), grid)


def test_blinker_oscillates() -> None:
    grid = np.zeros((5, 5), dtype=np.int8)
    grid[2, 1:4] = 1
    nxt = gol_step(grid)
    expected = np.zeros_like(grid)
    expected[1:4, 2] = 1
    assert np.array_equal(nxt, expected)
    assert np.array_equal(gol_step(nxt), grid)


def test_border_counts_as_dead() -> None:
    # A full 3x3 grid: only corners keep 3 neighbours, edges have 5, centre has 8.
    nxt = gol_step(np.ones((3, 3), dtype=np.int8))
    assert nxt.tolist() == [[1, 0, 1], [0, 0, 0], [1, 0, 1]]


def test_payoff_examples() -> None:
    env = GolEnv(10, 10)
    grid = np.zeros((10, 10), dtype=np.int8)
    grid[4:6, 4:6] = 1
    assert env.evaluate(Design.from_grid(grid)) == pytest.approx(0.04)
    assert env.evaluate(Design.zeros(env.shape)) == 0.0
    # A lone cell dies: alive 1/100, changed 1/100.
    lone = np.zeros((10, 10), dtype=np.int8)
    lone[5, 5] = 1
    assert env.evaluate(Design.from_grid(lone)) == 0.0


def test_payoff_can_be_negative() -> None:
    # Full grid: 100 alive, 96 die (only the corners survive).
    env = GolEnv(10, 10)
    assert env.evaluate(Design.ones(env.shape)) == pytest.approx(1.0 - 0.96)
    # A blinker: 3 alive, 2 die and 2 are born.
    blinker = np.zeros((10, 10), dtype=np.int8)
    blinker[5, 4:7] = 1
    assert env.evaluate(Design.from_grid(blinker)) == pytest.approx(-0.01)


def test_vertical_stripes_payoff() -> None:
    # 512 alive; the top and bottom cell of each of the 16 live columns dies,
    # and column 31 gains 30 births from column 30.
    grid = np.zeros((32, 32), dtype=np.int8)
    grid[:, ::2] = 1
    assert GolEnv(32, 32).evaluate(Design.from_grid(grid)) == pytest.approx(450 / 1024, abs=1e-12)


def test_matches_naive_oracle() -> None:
    rng = np.random.default_rng(0)
    for _ in range(1000):
        h, w = rng.integers(1, 9, size=2)
        grid = rng.integers(0, 2, size=(h, w)).astype(np.int8)
        assert np.array_equal(gol_step(grid), _naive_step(grid))


def test_payoff_invariant_under_mirror_and_rotation() -> None:
    rng = np.random.default_rng(1)
    for _ in range(50):
        grid = rng.integers(0, 2, size=(8, 8)).astype(np.int8)
        base = gol_payoff(Design.from_grid(grid))
        for variant in (grid[::-1], grid[:, ::-1], np.rot90(grid), grid.T):
            assert gol_payoff(Design.from_grid(np.ascontiguousarray(variant))) == \
                pytest.approx(base)


def test_random_designs_score_near_zero() -> None:
    env = GolEnv()
    rng = np.random.default_rng(2)
    scores = [env.evaluate(Design.random(env.shape, rng)) for _ in range(200)]
    assert 0.03 < float(np.mean(scores)) < 0.1


def test_shape_checks() -> None:
    with pytest.raises(ShapeMismatch):
        gol_step(np.zeros((2, 2, 2)))
    with pytest.raises(ShapeMismatch):
        GolEnv(4, 4).evaluate(Design.zeros(GridShape(5, 4)))
