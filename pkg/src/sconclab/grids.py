"""Uniform tensor grids on boxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Tensor grid with ``shape[i]`` nodes from ``lower[i]`` to ``upper[i]`` inclusive."""

    lower: tuple
    upper: tuple
    shape: tuple

    @classmethod
    def uniform(cls, lower, upper, h) -> "Grid":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        h = np.broadcast_to(np.asarray(h, dtype=float), lower.shape)
        if np.any(upper < lower) or np.any(h <= 0):
            raise ValueError("need lower <= upper and h > 0")
        counts = np.rint((upper - lower) / h).astype(int) + 1
        # keep the requested spacing; the upper corner moves onto the lattice
        upper = lower + (counts - 1) * h
        return cls(tuple(lower.tolist()), tuple(upper.tolist()), tuple(counts.tolist()))

    @classmethod
    def centered(cls, center, half_width, h) -> "Grid":
        center = np.atleast_1d(np.asarray(center, dtype=float))
        n = int(np.rint(half_width / h))
        return cls.uniform(center - n * h, center + n * h, h)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> np.ndarray:
        lo, hi, n = np.array(self.lower), np.array(self.upper), np.array(self.shape)
        return np.where(n > 1, (hi - lo) / np.maximum(n - 1, 1), 1.0)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axes(self) -> list:
        return [self.lower[i] + np.arange(self.shape[i]) * self.spacing[i] for i in range(self.dim)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def reshape(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        return values.reshape(self.shape + values.shape[1:])

    def expanded(self, margin) -> "Grid":
        """Grow by whole cells so the original nodes stay on the lattice."""
        h = self.spacing
        k = np.ceil(np.broadcast_to(margin, h.shape) / h - 1e-9).astype(int)
        return Grid.uniform(np.array(self.lower) - k * h, np.array(self.upper) + k * h, h)
