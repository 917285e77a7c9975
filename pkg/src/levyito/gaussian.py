"""Q-Wiener process sampling and the covariance identity check."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .charfn import z_score
from .paths import CadlagPath
from .space import DimensionError


def psd_sqrt(Q, clamp: float = 1e-10) -> np.ndarray:
    """Symmetric square root ``L`` with ``L @ L.T == Q``.

    Negative eigenvalues down to ``-clamp`` are treated as round-off and set
    to zero; anything more negative is an error.
    """
    Q = np.asarray(Q, dtype=float)
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    if w.size and w.min() < -clamp:
        raise ValueError(f"Q has eigenvalue {w.min():.3g} < -{clamp:g}")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


@dataclass(frozen=True)
class WienerSampler:
    Q: np.ndarray
    time_grid: np.ndarray
    factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError(f"Q must be square, got {Q.shape}")
        grid = np.asarray(self.time_grid, dtype=float).reshape(-1)
        if grid.size < 1 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise ValueError("time grid must start at 0 and increase strictly")
        L = psd_sqrt(Q)
        if np.max(np.abs(L @ L.T - Q), initial=0.0) > 1e-10:
            raise ValueError("square root of Q is not accurate to 1e-10")
        for name, arr in (("Q", Q), ("time_grid", grid), ("factor", L)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    def sample_values(self, rng: np.random.Generator, n_paths: int | None = None) -> np.ndarray:
        """Grid values of shape (G, d), or (n_paths, G, d)."""
        G, d = self.time_grid.size, self.dim
        m = 1 if n_paths is None else n_paths
        dt = np.diff(self.time_grid)
        z = rng.standard_normal((m, G - 1, d))
        inc = (z @ self.factor.T) * np.sqrt(dt)[None, :, None]
        out = np.zeros((m, G, d))
        np.cumsum(inc, axis=1, out=out[:, 1:, :])
        return out[0] if n_paths is None else out


def sample_wiener_path(s: WienerSampler, rng: np.random.Generator) -> CadlagPath:
    """Continuous path with ``W_0 = 0`` and independent ``N(0, dt Q)`` increments."""
    return CadlagPath(s.time_grid, s.sample_values(rng))


def _grid_index(grid: np.ndarray, t: float) -> int:
    i = int(np.searchsorted(grid, t))
    for j in (i - 1, i):
        if 0 <= j < grid.size and abs(grid[j] - t) <= 1e-12 * max(1.0, abs(t)):
            return j
    raise ValueError(f"time {t} is not on the grid")


def wiener_cov_check(paths: Sequence[CadlagPath] | np.ndarray, a, b, s: float, t: float,
                     *, Q, grid=None) -> tuple[float, float, float]:
    """Estimate ``E <W_t, a><W_s, b>`` and compare with ``<Qa, b> min(s, t)``.

    ``paths`` is a sequence of :class:`CadlagPath` or an array of grid values
    of shape (M, G, d) together with ``grid``.
    Returns ``(estimate, target, z_score)``.
    """
    if isinstance(paths, np.ndarray):
        if grid is None:
            raise ValueError("grid is required with array input")
        vals, grid = paths, np.asarray(grid, dtype=float)
    else:
        if len(paths) < 2:
            raise ValueError("at least 2 paths are required")
        grid = paths[0].grid
        vals = np.stack([p.values for p in paths])
    if vals.shape[0] < 2:
        raise ValueError("at least 2 paths are required")
    it, is_ = _grid_index(grid, t), _grid_index(grid, s)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    prod = (vals[:, it, :] @ a) * (vals[:, is_, :] @ b)
    est = float(prod.mean())
    Q = np.asarray(Q, dtype=float)
    # symmetrised so that swapping (a, b) gives a bit-identical target
    target = 0.5 * (float(a @ Q @ b) + float(b @ Q @ a)) * min(s, t)
    se = 0.0 if np.ptp(prod) == 0 else float(prod.std(ddof=1) / np.sqrt(prod.size))
    diff = est - target
    if se == 0 and abs(diff) < 1e-12:
        diff = 0.0
    return est, target, z_score(diff, se)
