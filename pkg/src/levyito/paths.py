"""Cadlag paths on a time grid with an explicit jump list.

A path stores its right-continuous values at the grid times and every jump
``(time, delta)`` explicitly.  Between consecutive grid times the continuous
part is interpolated linearly and jumps are added as steps, so drift-plus-
jump processes are represented exactly.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .space import BanachDisk, DimensionError, SpaceModel, shell_indices, shell_of_gauge, weak_distances

INF = math.inf


class CadlagPath:
    """Right-continuous path with left limits on ``[0, horizon]``.

    Parameters
    ----------
    grid : array (G,)
        Strictly increasing times starting at 0; ``grid[-1]`` is the horizon.
    values : array (G, d)
        Right-continuous values at the grid times (jumps at a grid time are
        already included in the value there).
    jump_times, jump_deltas : arrays (J,), (J, d)
        Jumps with times in ``(0, horizon]``, sorted by time.  Deltas are
        nonzero.
    """

    __slots__ = ("grid", "values", "jump_times", "jump_deltas", "_cum")

    def __init__(self, grid, values, jump_times=None, jump_deltas=None):
        grid = np.asarray(grid, dtype=float).reshape(-1)
        values = np.asarray(values, dtype=float)
        if grid.size < 1 or grid[0] != 0.0:
            raise ValueError("grid must start at 0")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if values.ndim != 2 or values.shape[0] != grid.size:
            raise DimensionError(f"values must have shape ({grid.size}, d), got {values.shape}")
        d = values.shape[1]
        if jump_times is None:
            jump_times = np.zeros(0)
            jump_deltas = np.zeros((0, d))
        jump_times = np.asarray(jump_times, dtype=float).reshape(-1)
        jump_deltas = np.asarray(jump_deltas, dtype=float).reshape(-1, d)
        if jump_deltas.shape[0] != jump_times.size:
            raise ValueError("one delta per jump time required")
        if jump_times.size:
            if np.any(np.diff(jump_times) < 0):
                order = np.argsort(jump_times, kind="stable")
                jump_times, jump_deltas = jump_times[order], jump_deltas[order]
            if jump_times[0] <= 0 or jump_times[-1] > grid[-1]:
                raise ValueError("jump times must lie in (0, horizon]")
            if np.any(np.all(jump_deltas == 0, axis=1)):
                raise ValueError("jump deltas must be nonzero")
        for arr in (grid, values, jump_times, jump_deltas):
            arr.setflags(write=False)
        self.grid = grid
        self.values = values
        self.jump_times = jump_times
        self.jump_deltas = jump_deltas
        self._cum = np.vstack([np.zeros((1, d)), np.cumsum(jump_deltas, axis=0)])

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    @property
    def n_jumps(self) -> int:
        return self.jump_times.size

    def __repr__(self):
        return f"CadlagPath(dim={self.dim}, grid={self.grid.size} points, horizon={self.horizon}, jumps={self.n_jumps})"

    def _jumps_upto(self, t):
        return self._cum[np.searchsorted(self.jump_times, t, side="right")]

    def values_at(self, times) -> np.ndarray:
        ts = np.asarray(times, dtype=float)
        flat = ts.reshape(-1)
        if flat.size and (flat.min() < 0 or flat.max() > self.horizon):
            raise ValueError(f"times must lie in [0, {self.horizon}]")
        G = self.grid.size
        j = np.searchsorted(self.grid, flat, side="right") - 1
        out = self.values[j] + (self._jumps_upto(flat) - self._jumps_upto(self.grid[j]))
        interior = j < G - 1
        if np.any(interior):
            ji = j[interior]
            lo, hi = self.grid[ji], self.grid[ji + 1]
            step_jumps = self._jumps_upto(hi) - self._jumps_upto(lo)
            cont = self.values[ji + 1] - step_jumps - self.values[ji]
            theta = (flat[interior] - lo) / (hi - lo)
            out[interior] += theta[:, None] * cont
        return out.reshape(ts.shape + (self.dim,))

    def value_at(self, t: float) -> np.ndarray:
        return value_at(self, t)

    def jump_at(self, t: float) -> np.ndarray:
        """Total jump at time ``t`` (zero if ``t`` is not a jump time)."""
        lo = np.searchsorted(self.jump_times, t, side="left")
        hi = np.searchsorted(self.jump_times, t, side="right")
        return self._cum[hi] - self._cum[lo]

    def evaluation_times(self) -> np.ndarray:
        """Grid times together with all jump times, sorted and unique."""
        return np.union1d(self.grid, self.jump_times)

    def is_process_path(self) -> bool:
        return bool(np.all(self.values[0] == 0))

    def functional(self, a, times) -> np.ndarray:
        return self.values_at(times) @ np.asarray(a, dtype=float)

    def shells(self, K: BanachDisk) -> np.ndarray:
        return shell_indices(self.jump_deltas, K) if self.n_jumps else np.zeros(0, dtype=np.int64)

    def __add__(self, other: "CadlagPath") -> "CadlagPath":
        if not np.array_equal(self.grid, other.grid):
            raise ValueError("paths must share a grid to be added")
        t = np.concatenate([self.jump_times, other.jump_times])
        dlt = np.concatenate([self.jump_deltas, other.jump_deltas])
        order = np.argsort(t, kind="stable")
        return CadlagPath(self.grid, self.values + other.values, t[order], dlt[order])


def constant_path(grid, value) -> CadlagPath:
    grid = np.asarray(grid, dtype=float)
    v = np.asarray(value, dtype=float)
    return CadlagPath(grid, np.tile(v, (grid.size, 1)))


def value_at(p: CadlagPath, t: float) -> np.ndarray:
    """Right-continuous value ``x_t``; all jumps at times ``<= t`` included."""
    if not 0 <= t <= p.horizon:
        raise ValueError(f"t={t} outside [0, {p.horizon}]")
    return p.values_at(np.array([t]))[0]


def left_limit(p: CadlagPath, t: float) -> np.ndarray:
    """``x_{t-}``: the value at ``t`` minus the jump at ``t``."""
    if not t > 0:
        raise ValueError("left limits are defined for t > 0")
    return value_at(p, t) - p.jump_at(t)


def count_measure(p: CadlagPath, window: tuple[float, float], shell_set: Iterable[int], K: BanachDisk) -> int:
    """Number of jumps with time in ``(t1, t2]`` whose delta lies in one of the shells."""
    t1, t2 = window
    if t1 < 0 or t2 > p.horizon:
        raise ValueError("window must lie within the path horizon")
    shell_set = set(int(s) for s in shell_set)
    if t2 <= t1 or not shell_set or p.n_jumps == 0:
        return 0
    in_window = (p.jump_times > t1) & (p.jump_times <= t2)
    return int(np.count_nonzero(in_window & np.isin(p.shells(K), list(shell_set))))


def compensated_count(p: CadlagPath, window, shell_set, nu, K: BanachDisk) -> float:
    """``N(B) - (lambda x nu)(B)`` for ``B = (t1, t2] x union of shells``."""
    shell_set = [int(s) for s in shell_set]
    if not shell_set:
        return 0.0
    intensity = sum(nu.shell_mass(K, n) for n in shell_set)
    if not math.isfinite(intensity):
        raise ValueError("infinite intensity over the requested shells")
    t1, t2 = window
    return count_measure(p, window, shell_set, K) - max(t2 - t1, 0.0) * intensity


def jump_class(size: float) -> int:
    """Numbering class of a jump of weak size ``size > 0``.

    Class 1 collects every size above 1/2 (sizes above 1 and sizes in
    ``(1/2, 1]`` both go there); class ``n >= 2`` holds ``(1/(n+1), 1/n]``.
    """
    if not size > 0:
        raise ValueError("jump sizes are positive")
    return 1 if size > 0.5 else int(shell_of_gauge(size))


@dataclass(frozen=True)
class JumpNumbering:
    """Jump times ``t_{n,k}`` grouped by size class, increasing within a class."""

    classes: dict = field(default_factory=dict)

    def time(self, n: int, k: int) -> float:
        """``t_{n,k}`` (1-based ``k``); ``inf`` once the class is exhausted."""
        if n < 1 or k < 1:
            raise ValueError("class and position are 1-based")
        times = self.classes.get(n, ())
        return times[k - 1] if k <= len(times) else INF

    def count(self, n: int) -> int:
        return len(self.classes.get(n, ()))

    def total(self) -> int:
        return sum(len(v) for v in self.classes.values())


def jump_sizes(p: CadlagPath, m: SpaceModel) -> tuple[np.ndarray, np.ndarray]:
    """Unique jump times and their weak sizes ``d(x_t, x_{t-})``."""
    if p.n_jumps == 0:
        return np.zeros(0), np.zeros(0)
    times = np.unique(p.jump_times)
    after = p.values_at(times)
    before = after - np.array([p.jump_at(t) for t in times])
    return times, weak_distances(after, before, m)


def jump_numbering(p: CadlagPath, m: SpaceModel) -> JumpNumbering:
    times, sizes = jump_sizes(p, m)
    classes: dict[int, list[float]] = {}
    for t, s in zip(times, sizes):
        if s > 0:
            classes.setdefault(jump_class(s), []).append(float(t))
    return JumpNumbering({n: tuple(v) for n, v in sorted(classes.items())})


def _metric(metric) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    if isinstance(metric, BanachDisk):
        return lambda A, b: metric.gauge(np.asarray(A) - b)
    if isinstance(metric, SpaceModel):
        return lambda A, b: weak_distances(A, np.broadcast_to(b, np.shape(A)), metric)
    if callable(metric):
        return metric
    raise TypeError("metric must be a BanachDisk, a SpaceModel or a callable")


def oscillation_partition(p: CadlagPath, eps: float, metric) -> list[float]:
    """Breakpoints ``0 = t_0 < ... < t_k = horizon`` with oscillation ``< eps``
    on every ``[t_{i-1}, t_i)``.

    ``metric`` is a :class:`BanachDisk` (gauge of differences), a
    :class:`SpaceModel` (weak metric) or a callable ``dist(A, b)`` returning
    row-wise distances.  Continuous stretches are subdivided until consecutive
    samples are closer than ``eps / 2``; left limits at jump times count
    towards the interval that ends there.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    dist = _metric(metric)
    times = p.evaluation_times()
    jumps = set(np.unique(p.jump_times).tolist())
    breaks = [0.0]
    v0 = p.values_at(np.array([0.0]))[0]
    cur = [v0]
    last_t, last_v = 0.0, v0

    def push(v, prev_t, prev_v):
        nonlocal cur
        if np.max(dist(np.array(cur), v)) >= eps:
            if prev_t > breaks[-1]:
                breaks.append(prev_t)
            cur = [prev_v, v]
        else:
            cur.append(v)

    for tau in times[1:]:
        tau = float(tau)
        is_jump = tau in jumps
        target = p.values_at(np.array([tau]))[0]
        if is_jump:
            target = target - p.jump_at(tau)
        k = 1
        while True:
            fr = np.arange(1, k + 1) / k
            pts = last_v + fr[:, None] * (target - last_v)
            prev = np.vstack([last_v, pts[:-1]])
            step = np.array([dist(prev[i:i + 1], pts[i])[0] for i in range(k)])
            if np.all(step < eps / 2) or k >= 2**16:
                break
            k *= 2
        prev_times = last_t + (tau - last_t) * np.arange(0, k) / k
        for i in range(k):
            push(pts[i], float(prev_times[i]), prev[i])
        if is_jump:
            after = target + p.jump_at(tau)
            if np.max(dist(np.array(cur), after)) >= eps:
                breaks.append(tau)
                cur = [after]
            else:
                cur.append(after)
            last_v = after
        else:
            last_v = target
        last_t = tau
    if breaks[-1] < p.horizon:
        breaks.append(p.horizon)
    return breaks


def interval_oscillation(p: CadlagPath, t0: float, t1: float, metric, samples: int = 200) -> float:
    """Dense-sample estimate of ``sup d(x_s, x_u)`` over ``s, u`` in ``[t0, t1)``.

    Uses evenly spaced times, every evaluation time inside the interval and
    the left limit at ``t1``.  Independent of :func:`oscillation_partition`.
    """
    dist = _metric(metric)
    ts = np.linspace(t0, t1, samples, endpoint=False)
    inner = p.evaluation_times()
    ts = np.union1d(ts, inner[(inner >= t0) & (inner < t1)])
    vals = p.values_at(ts)
    if t1 > 0:
        vals = np.vstack([vals, left_limit(p, t1)])
    return float(max(np.max(dist(vals, v)) for v in vals))


def detect_jumps(grid, values, threshold: float, metric) -> CadlagPath:
    """Heuristic: turn grid-only data into a path with explicit jumps.

    Every grid step whose increment has distance above ``threshold`` is
    declared a jump at the right endpoint carrying the whole increment.  The
    threshold should exceed the continuous modulus expected on one step.
    """
    dist = _metric(metric)
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    inc = np.diff(values, axis=0)
    size = np.array([dist(inc[i:i + 1], np.zeros(values.shape[1]))[0] for i in range(inc.shape[0])])
    idx = np.flatnonzero(size > threshold)
    keep = idx[np.any(inc[idx] != 0, axis=1)]
    return CadlagPath(grid, values, grid[keep + 1], inc[keep])


# -- CSV ---------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def path_rows(p: CadlagPath, replica: int) -> list[list[str]]:
    """CSV rows for one path: grid rows then jump rows, merged by time."""
    d = p.dim
    zero = ["0.0"] * d
    rows = []
    for t, v in zip(p.grid, p.values):
        rows.append((float(t), 0, [str(replica), _fmt(t), "grid", *map(_fmt, v), *zero]))
    if p.n_jumps:
        after = p.values_at(p.jump_times)
        for i, (t, dl) in enumerate(zip(p.jump_times, p.jump_deltas)):
            rows.append((float(t), 1 + i, [str(replica), _fmt(t), "jump", *map(_fmt, after[i]), *map(_fmt, dl)]))
    rows.sort(key=lambda r: (r[0], r[1]))
    return [r[2] for r in rows]


def paths_header(d: int) -> list[str]:
    return ["replica", "t", "kind", *[f"value_{i}" for i in range(d)], *[f"delta_{i}" for i in range(d)]]


def write_paths_csv(fh, paths: Sequence[CadlagPath], replicas: Sequence[int] | None = None) -> None:
    """Write paths in the ``replica, t, kind, value_*, delta_*`` format."""
    if not paths:
        raise ValueError("no paths to write")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(paths_header(paths[0].dim))
    for i, p in enumerate(paths):
        w.writerows(path_rows(p, i if replicas is None else replicas[i]))


def read_paths_csv(fh) -> dict[int, CadlagPath]:
    """Inverse of :func:`write_paths_csv`; returns paths keyed by replica."""
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    r = csv.reader(fh)
    header = next(r)
    d = sum(1 for h in header if h.startswith("value_"))
    if header != paths_header(d):
        raise ValueError(f"unexpected path CSV header: {header}")
    data: dict[int, dict[str, list]] = {}
    for row in r:
        if not row:
            continue
        rep, t, kind = int(row[0]), float(row[1]), row[2]
        vals = [float(x) for x in row[3:3 + d]]
        dl = [float(x) for x in row[3 + d:3 + 2 * d]]
        slot = data.setdefault(rep, {"grid": [], "values": [], "jt": [], "jd": []})
        if kind == "grid":
            slot["grid"].append(t)
            slot["values"].append(vals)
        elif kind == "jump":
            slot["jt"].append(t)
            slot["jd"].append(dl)
        else:
            raise ValueError(f"unknown row kind {kind!r}")
    return {
        rep: CadlagPath(s["grid"], np.array(s["values"]).reshape(-1, d),
                        np.array(s["jt"]), np.array(s["jd"]).reshape(-1, d))
        for rep, s in sorted(data.items())
    }
