# src/voxelbandit/posenc.py
"""
Sin/cos positional encoding of agent grid positions.

Every agent n is encoded as concat(f(x(n)), f(y(n)), f(z(n))) where each axis
coordinate is normalized to [-1, 1] and

    f(a) = [a, sin(2^0 pi a), ..., sin(2^(b-1) pi a),
               cos(2^0 pi a), ..., cos(2^(b-1) pi a)].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import GridShape
from .errors import ConfigError, IndexOutOfRange


def normalize_axis(index: np.ndarray | int, length: int) -> np.ndarray:
    """Grid index i on an axis of length L -> -1 + 2 i / (L - 1); 0 when L == 1."""
    idx = np.asarray(index, dtype=float)
    if length == 1:
        return np.zeros_like(idx)
    return -1.0 + 2.0 * idx / (length - 1)


def band_features(a: np.ndarray, bands: int) -> np.ndarray:
    """f(a) for each entry of a; returns shape a.shape + (2b+1,)."""
    a = np.asarray(a, dtype=float)
    freqs = (2.0 ** np.arange(bands)) * np.pi
    phase = a[..., None] * freqs
    return np.concatenate([a[..., None], np.sin(phase), np.cos(phase)], axis=-1)


@dataclass
class PositionalEncoder:
    shape: GridShape
    bands: int = 8
    _table: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.bands < 1:
            raise ConfigError(f"bands must be >= 1, got {self.bands}")

    @property
    def dim(self) -> int:
        return 3 * (2 * self.bands + 1)

    def encode(self, n: int) -> np.ndarray:
        if not 0 <= n < self.shape.size:
            raise IndexOutOfRange(f"Agent index {n} outside [0, {self.shape.size})")
        x, y, z = self.shape.unravel(int(n))
        return np.concatenate([
            band_features(normalize_axis(x, self.shape.nx), self.bands),
            band_features(normalize_axis(y, self.shape.ny), self.bands),
            band_features(normalize_axis(z, self.shape.nz), self.bands),
        ])

    def matrix(self) -> np.ndarray:
        """(N, dim) encodings for all agents, computed once."""
        if self._table is None:
            n = np.arange(self.shape.size)
            x = n % self.shape.nx
            y = (n // self.shape.nx) % self.shape.ny
            z = n // (self.shape.nx * self.shape.ny)
            self._table = np.concatenate([
                band_features(normalize_axis(x, self.shape.nx), self.bands),
                band_features(normalize_axis(y, self.shape.ny), self.bands),
                band_features(normalize_axis(z, self.shape.nz), self.bands),
            ], axis=1)
            self._table.setflags(write=False)
        return self._table


def encode(enc: PositionalEncoder, n: int) -> np.ndarray:
    return enc.encode(n)
