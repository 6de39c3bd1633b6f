"""Discrete optimization domains: a finite grid of values per variable."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Domain:
    """Cartesian product of finite per-variable value grids.

    ``values[k]`` holds the admissible values of variable ``k`` in a fixed
    order; the first entry is the variable's default value.  Points are
    represented either as index tuples into these grids or as float vectors.
    """

    values: tuple = field()

    def __post_init__(self):
        vals = tuple(np.asarray(v, dtype=float) for v in self.values)
        if len(vals) < 1:
            raise ValueError("domain needs at least one variable")
        for k, v in enumerate(vals):
            if v.ndim != 1 or v.size == 0:
                raise ValueError(f"variable {k}: value grid must be a nonempty 1-d list")
            if np.unique(v).size != v.size:
                raise ValueError(f"variable {k}: grid values must be distinct")
            v.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def uniform(cls, dim: int, grid_size: int, low: float = 0.0, high: float = 1.0) -> "Domain":
        """Same evenly spaced grid of ``grid_size`` values for every variable."""
        grid = np.linspace(low, high, grid_size)
        return cls(tuple(grid.copy() for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.values)

    @cached_property
    def sizes(self) -> tuple:
        return tuple(v.size for v in self.values)

    @cached_property
    def size(self) -> int:
        """Total number of grid points (python int, never overflows)."""
        total = 1
        for s in self.sizes:
            total *= int(s)
        return total

    @cached_property
    def _index_maps(self):
        return tuple({float(x): i for i, x in enumerate(v)} for v in self.values)

    def point(self, indices) -> np.ndarray:
        """Float vector for an index tuple."""
        return np.array([self.values[k][i] for k, i in enumerate(indices)], dtype=float)

    def points(self, index_array: np.ndarray) -> np.ndarray:
        """Float matrix for an ``(m, D)`` integer index array."""
        index_array = np.asarray(index_array)
        out = np.empty(index_array.shape, dtype=float)
        for k in range(self.dim):
            out[:, k] = self.values[k][index_array[:, k]]
        return out

    def indices_of(self, point) -> tuple:
        """Index tuple of a float vector; each entry must be a grid value."""
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            raise ValueError(f"expected a point of dimension {self.dim}, got shape {point.shape}")
        try:
            return tuple(self._index_maps[k][float(point[k])] for k in range(self.dim))
        except KeyError as exc:
            raise ValueError(f"point component {exc} is not a grid value") from None

    def group_grid(self, group) -> np.ndarray:
        """All configurations of a variable subset, shape ``(prod(sizes), d)``.

        Rows are in lexicographic order over the group's variables (last
        variable fastest), matching a row-major reshape of a per-group table.
        """
        axes = [self.values[v] for v in group]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def group_shape(self, group) -> tuple:
        return tuple(self.values[v].size for v in group)

    def random_indices(self, rng: np.random.Generator, count: int = 1) -> np.ndarray:
        """Uniform index samples with replacement, shape ``(count, D)``."""
        cols = [rng.integers(0, s, size=count) for s in self.sizes]
        return np.stack(cols, axis=-1)

    def sample_indices_without_replacement(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Uniform distinct index samples; falls back to replacement if the
        domain has fewer than ``count`` points."""
        if self.size <= count:
            return self.random_indices(rng, count)
        if self.size <= 4 * count:
            flat = rng.permutation(self.size)[:count]
            return np.stack(np.unravel_index(flat, self.sizes), axis=-1)
        # rejection sampling; collisions are rare for large domains
        seen = {}
        rows = []
        while len(rows) < count:
            cand = tuple(int(rng.integers(0, s)) for s in self.sizes)
            if cand not in seen:
                seen[cand] = True
                rows.append(cand)
        return np.array(rows, dtype=np.int64)
