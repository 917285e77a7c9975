"""Coordinate model of the state space.

The state space is realised as R^d.  Continuous linear functionals are
coordinate combinations ``<x, a> = x @ a``; the compact disk ``K`` is a
weighted sup-ball and its Minkowski functional is the operative norm on
``E_K``.  The weak metric is built from the coordinate functionals.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DimensionError(ValueError):
    """Raised when vectors, disks or models disagree on the dimension."""


def _as_vector(x, dim: int | None = None, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be a 1-d vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"{name} has dimension {v.shape[0]}, expected {dim}")
    return v


@dataclass(frozen=True)
class SpaceModel:
    """R^d with weights for the separating coordinate functionals.

    Weights default to ``2**-i`` normalised to sum 1.  User weights whose sum
    exceeds 1 are rescaled to sum 1; smaller sums are kept as given.
    """

    dim: int
    functional_weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        if self.functional_weights is None:
            w = 2.0 ** -np.arange(1, self.dim + 1)
            w = w / w.sum()
        else:
            w = _as_vector(self.functional_weights, self.dim, "functional_weights").copy()
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("functional weights must be finite and positive")
            if w.sum() > 1.0:
                w = w / w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "functional_weights", w)

    @property
    def weights(self) -> np.ndarray:
        return self.functional_weights


@dataclass(frozen=True)
class BanachDisk:
    """The disk ``K = {x : max_i |x_i| / k_i <= 1}``."""

    radii: np.ndarray

    def __post_init__(self):
        r = _as_vector(self.radii, name="radii").copy()
        if r.size == 0 or not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise ValueError("disk radii must be finite and positive")
        r.setflags(write=False)
        object.__setattr__(self, "radii", r)

    @property
    def dim(self) -> int:
        return self.radii.shape[0]

    def gauge(self, x) -> np.ndarray | float:
        """Vectorised gauge over the last axis of ``x``."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"expected last axis of size {self.dim}, got {x.shape}")
        return np.max(np.abs(x) / self.radii, axis=-1)

    def unit_directions(self) -> np.ndarray:
        """The 2d axis points ``+-k_i e_i`` on the boundary of K."""
        eye = np.diag(self.radii)
        return np.concatenate([eye, -eye])


def gauge_norm(x, K: BanachDisk) -> float:
    x = _as_vector(x, K.dim)
    return float(np.max(np.abs(x) / K.radii))


def weak_distance(x, y, m: SpaceModel) -> float:
    """``sum_i w_i min(1, |x_i - y_i|)``; bounded by the total weight."""
    x = _as_vector(x, m.dim)
    y = _as_vector(y, m.dim, "y")
    return float(np.sum(m.weights * np.minimum(1.0, np.abs(x - y))))


def weak_distances(x, y, m: SpaceModel) -> np.ndarray:
    """Row-wise weak distance for stacked vectors of shape (..., d)."""
    diff = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    if diff.shape[-1] != m.dim:
        raise DimensionError(f"expected last axis of size {m.dim}, got {diff.shape}")
    return np.sum(m.weights * np.minimum(1.0, diff), axis=-1)


def shell_of_gauge(g) -> np.ndarray:
    """Shell index for gauge values ``g > 0``.

    Returns 0 for ``g > 1`` and otherwise the ``n >= 1`` with
    ``1/(n+1) < g <= 1/n``.  The boundary comparisons are done against the
    floating values ``1/n`` so the classification agrees with the predicate.
    """
    g = np.asarray(g, dtype=float)
    if np.any(~(g > 0)):
        raise ValueError("the origin (and non-positive gauge values) has no shell")
    out = np.zeros(g.shape, dtype=np.int64)
    inside = g <= 1.0
    gi = g[inside]
    with np.errstate(over="ignore"):
        n = np.floor(1.0 / gi)
    n = np.clip(n, 1, 2.0**62).astype(np.int64)
    # repair floor() rounding at the shell boundaries
    too_big = gi > 1.0 / n
    n[too_big] -= 1
    too_small = gi <= 1.0 / (n + 1)
    n[too_small] += 1
    out[inside] = n
    return out


def shell_index(x, K: BanachDisk) -> int:
    """Index of the shell containing ``x``: 0 for ``K^c``, else ``n`` with
    ``x`` in ``(1/n)K \\ (1/(n+1))K``."""
    g = gauge_norm(x, K)
    if g == 0.0:
        raise ValueError("x = 0 carries no Levy mass and has no shell")
    return int(shell_of_gauge(g))


def shell_indices(xs, K: BanachDisk) -> np.ndarray:
    """Vectorised :func:`shell_index` for an array of shape (m, d)."""
    xs = np.asarray(xs, dtype=float).reshape(-1, K.dim)
    return shell_of_gauge(K.gauge(xs))


def shell_bounds(n: int) -> tuple[float, float]:
    """Gauge interval ``(lo, hi]`` of shell ``n >= 1``."""
    if n < 1:
        raise ValueError("shell bounds are defined for n >= 1")
    return 1.0 / (n + 1), 1.0 / n
