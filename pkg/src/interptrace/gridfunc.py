"""Sampled functions of time."""

from dataclasses import dataclass

import numpy as np

from .errors import GridError

__all__ = ["GridFunction", "log_time_grid", "uniform_time_grid"]


@dataclass(frozen=True)
class GridFunction:
    """Values on a strictly increasing time grid.

    ``values`` has the grid along its first axis; trailing axes hold the
    coordinates of vector-valued samples.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.size < 2:
            raise GridError("a grid needs at least two points")
        if not np.all(np.diff(g) > 0):
            raise GridError("grid points must be strictly increasing")
        if v.shape[0] != g.size:
            raise GridError(f"{v.shape[0]} values for {g.size} grid points")
        if not np.all(np.isfinite(v)):
            raise GridError("grid function values must be finite")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, f, grid):
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.asarray(f(grid), dtype=float))

    def __len__(self):
        return self.grid.size

    @property
    def is_scalar(self):
        return self.values.ndim == 1

    def pointwise_norm(self, norm=None):
        """Scalar samples; vector samples are reduced by ``norm`` (default
        the Euclidean norm) along the trailing axes."""
        if self.is_scalar:
            return np.abs(self.values)
        if norm is None:
            return np.linalg.norm(self.values.reshape(len(self), -1), axis=1)
        return np.asarray(norm(self.values), dtype=float)

    def interpolate(self, t):
        """Piecewise linear interpolation, zero outside the grid."""
        t = np.asarray(t, dtype=float)
        if self.is_scalar:
            return np.interp(t, self.grid, self.values, left=0.0, right=0.0)
        flat = self.values.reshape(len(self), -1)
        cols = [np.interp(t, self.grid, flat[:, c], left=0.0, right=0.0)
                for c in range(flat.shape[1])]
        return np.stack(cols, axis=-1).reshape(t.shape + self.values.shape[1:])

    def scaled(self, c):
        return GridFunction(self.grid, c * self.values)


def log_time_grid(t_min=1e-4, t_max=1e4, n=512, include_zero=False):
    """Log-spaced grid, optionally with a leading 0."""
    g = np.geomspace(t_min, t_max, n)
    return np.concatenate([[0.0], g]) if include_zero else g


def uniform_time_grid(T, M=2048):
    """``M + 1`` uniform points on ``[0, T]``."""
    return np.linspace(0.0, float(T), int(M) + 1)
