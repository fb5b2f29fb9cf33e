# src/voxelbandit/gol.py
"""
Game-of-Life stability environment.

Payoff = alive_ratio(design) - changed_ratio(step(design), design) after one
Conway step with dead cells beyond the border.
"""

from __future__ import annotations

from typing import ClassVar

import numpy as np
from scipy.signal import convolve2d

from .core import Design, GridShape, PayoffEnvironment
from .errors import ShapeMismatch

_NEIGHBOURS = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]], dtype=np.int64)


def neighbour_counts(grid: np.ndarray) -> np.ndarray:
    """Live 8-neighbour count of every cell; outside the grid counts as dead."""
    g = np.asarray(grid, dtype=np.int64)
    return convolve2d(g, _NEIGHBOURS, mode="same", boundary="fill", fillvalue=0)


def gol_step(grid: np.ndarray) -> np.ndarray:
    """One Conway step: survive on 2 or 3 neighbours, birth on exactly 3."""
    g = np.asarray(grid).astype(bool)
    if g.ndim != 2:
        raise ShapeMismatch(f"gol_step expects a 2D grid, got shape {g.shape}")
    if g.size == 0:
        return g.astype(np.int8)
    counts = neighbour_counts(g)
    alive = (g & ((counts == 2) | (counts == 3))) | (~g & (counts == 3))
    return alive.astype(np.int8)


class GolEnv(PayoffEnvironment):
    """Rewards many live cells that stay unchanged after one step."""
    differentiable: ClassVar[bool] = False

    def __init__(self, width: int = 32, height: int = 32) -> None:
        if width < 1 or height < 1:
            raise ShapeMismatch(f"grid must be at least 1x1, got {width}x{height}")
        self.width = int(width)
        self.height = int(height)
        self.shape = GridShape(self.width, self.height, 1)

    def evaluate(self, design: Design) -> float:
        return gol_payoff(design, self)


def gol_payoff(design: Design, env: GolEnv | None = None) -> float:
    """alive/N - changed/N; negative values are returned as-is."""
    if env is not None:
        env.check_design(design)
    elif not design.shape.is_2d:
        raise ShapeMismatch(f"Game-of-Life designs are 2D, got {design.shape}")
    grid = design.grid2d()
    nxt = gol_step(grid)
    n = grid.size
    alive = int(grid.sum())
    changed = int(np.count_nonzero(nxt != grid))
    return alive / n - changed / n
