"""Poisson random measures on time x shells and the jump integrals built on them.

``sample_prm`` draws the atoms of a Poisson random measure with intensity
``lambda x nu`` on ``(0, T] x (C_0 u C_1 u ... u C_{N_max})``.  Shell 0 feeds
the large-jump integral ``L_t``; shells ``1..N`` feed the compensated series
``J^N_t = sum_{n<=N} (sum of marks in C_n up to t - t * int_{C_n} x dnu)``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .measure import LevyMeasure
from .space import BanachDisk, shell_indices


@dataclass(frozen=True)
class PRMSample:
    """Atoms ``(time, mark, shell)`` stored shell by shell, time-sorted within a shell."""

    horizon: float
    times: np.ndarray
    marks: np.ndarray
    shells: np.ndarray
    shell_cutoff: int

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        shells = np.asarray(self.shells, dtype=np.int64).reshape(-1)
        marks = np.asarray(self.marks, dtype=float)
        if marks.ndim != 2 or marks.shape[0] != times.size or shells.size != times.size:
            raise ValueError("times, marks and shells must describe the same atoms")
        if times.size:
            if times.min() <= 0 or times.max() > self.horizon:
                raise ValueError("atom times must lie in (0, horizon]")
            if np.any(np.all(marks == 0, axis=1)):
                raise ValueError("no atom may sit at the origin")
            if shells.max() > self.shell_cutoff or shells.min() < 0:
                raise ValueError("atom shell outside 0..shell_cutoff")
        for name, arr in (("times", times), ("marks", marks), ("shells", shells)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.marks.shape[1]

    def __len__(self):
        return self.times.size

    def validate_shells(self, K: BanachDisk) -> bool:
        """Every stored shell agrees with the shell of its mark."""
        return bool(np.array_equal(shell_indices(self.marks, K), self.shells)) if len(self) else True

    def timeline(self) -> np.ndarray:
        """Atom order by time; ties broken by shell, then insertion order."""
        return np.lexsort((np.arange(len(self)), self.shells, self.times))

    def count(self, window: tuple[float, float], shells: Iterable[int]) -> int:
        t1, t2 = window
        sel = (self.times > t1) & (self.times <= t2) & np.isin(self.shells, list(shells))
        return int(np.count_nonzero(sel))

    def select(self, shells: Iterable[int]) -> "PRMSample":
        keep = np.isin(self.shells, list(shells))
        return PRMSample(self.horizon, self.times[keep], self.marks[keep], self.shells[keep], self.shell_cutoff)


@dataclass(frozen=True)
class CompensatedSeriesResult:
    eval_times: np.ndarray
    partial_sums: dict
    sup_gaps: dict
    tail_variance_bound: dict

    @property
    def levels(self) -> list[int]:
        return sorted(self.partial_sums)


def sample_prm(nu: LevyMeasure, K: BanachDisk, T_max: float, N_max: int, rng: np.random.Generator) -> PRMSample:
    """Poisson(``T_max * nu(C_n)``) atoms per shell ``n = 0..N_max``; uniform
    times on ``(0, T_max]`` and marks from ``nu|_{C_n} / nu(C_n)``.
    Shells are drawn independently in increasing order from ``rng``."""
    if not T_max > 0:
        raise ValueError("T_max must be positive")
    if N_max < 1:
        raise ValueError("N_max must be at least 1")
    times, marks, shells = [], [], []
    for n in nu.active_shells(K, N_max):
        lam = T_max * nu.shell_mass(K, n)
        cnt = int(rng.poisson(lam))
        if cnt == 0:
            continue
        t = np.sort(T_max * (1.0 - rng.random(cnt)))
        times.append(t)
        marks.append(nu.sample_shell(K, n, rng, size=cnt))
        shells.append(np.full(cnt, n, dtype=np.int64))
    if times:
        return PRMSample(T_max, np.concatenate(times), np.concatenate(marks), np.concatenate(shells), N_max)
    return PRMSample(T_max, np.zeros(0), np.zeros((0, nu.dim)), np.zeros(0, dtype=np.int64), N_max)


def _check_time(prm: PRMSample, t):
    t_arr = np.asarray(t, dtype=float)
    if t_arr.size and (t_arr.min() < 0 or t_arr.max() > prm.horizon):
        raise ValueError(f"t outside [0, {prm.horizon}]")
    return t_arr


def _mark_sums(prm: PRMSample, mask: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """``sum of marks[mask] with time <= t`` for each t in ``ts``."""
    t = prm.times[mask]
    order = np.argsort(t, kind="stable")
    cum = np.vstack([np.zeros((1, prm.dim)), np.cumsum(prm.marks[mask][order], axis=0)])
    return cum[np.searchsorted(t[order], ts, side="right")]


def large_jump_process(prm: PRMSample, t) -> np.ndarray:
    """``L_t = int_{(0,t] x K^c} x dN``: sum of shell-0 marks up to ``t``."""
    ts = _check_time(prm, t)
    out = _mark_sums(prm, prm.shells == 0, ts.reshape(-1))
    return out.reshape(ts.shape + (prm.dim,))


def compensated_shell_term(prm: PRMSample, nu: LevyMeasure, K: BanachDisk, n: int, t) -> np.ndarray:
    """``J([0,t] x C_n)``: marks in shell ``n`` up to ``t`` minus ``t * int_{C_n} x dnu``."""
    if n < 1:
        raise ValueError("compensated terms exist for shells n >= 1")
    if n > prm.shell_cutoff:
        raise ValueError(f"shell {n} exceeds the simulated cutoff {prm.shell_cutoff}")
    ts = _check_time(prm, t)
    flat = ts.reshape(-1)
    out = _mark_sums(prm, prm.shells == n, flat) - flat[:, None] * nu.shell_compensator(K, n)[None, :]
    return out.reshape(ts.shape + (prm.dim,))


def total_compensator(nu: LevyMeasure, K: BanachDisk, N: int) -> np.ndarray:
    """``sum_{n=1}^N int_{C_n} x dnu`` (per unit time)."""
    comp = np.zeros(nu.dim)
    for n in nu.active_shells(K, N):
        if n >= 1:
            comp = comp + nu.shell_compensator(K, n)
    return comp


def small_jump_values(prm: PRMSample, nu: LevyMeasure, K: BanachDisk, N: int, t) -> np.ndarray:
    """``J^N_t`` evaluated at the times ``t``."""
    if N > prm.shell_cutoff:
        raise ValueError(f"truncation {N} exceeds the simulated cutoff {prm.shell_cutoff}")
    ts = _check_time(prm, t)
    flat = ts.reshape(-1)
    mask = (prm.shells >= 1) & (prm.shells <= N)
    out = _mark_sums(prm, mask, flat) - flat[:, None] * total_compensator(nu, K, N)[None, :]
    return out.reshape(ts.shape + (prm.dim,))


def compensated_series(prm: PRMSample, nu: LevyMeasure, K: BanachDisk, truncations: Sequence[int],
                       eval_times) -> CompensatedSeriesResult:
    """Partial sums ``J^N`` at ``eval_times`` and sup-gauge gaps between consecutive levels.

    The gaps are piecewise linear between jumps, so their supremum is attained
    at a jump time (before or after the jump) or at an endpoint; atom times
    and left limits are therefore always added to the sup computation.
    """
    levels = sorted(set(int(n) for n in truncations))
    if not levels or levels[0] < 1:
        raise ValueError("truncation levels must be >= 1")
    if levels[-1] > prm.shell_cutoff:
        raise ValueError(f"truncation {levels[-1]} exceeds the simulated cutoff {prm.shell_cutoff}")
    ev = np.unique(np.asarray(eval_times, dtype=float))
    _check_time(prm, ev)
    partial = {N: small_jump_values(prm, nu, K, N, ev) for N in levels}

    gaps = {}
    for lo, hi in zip(levels[:-1], levels[1:]):
        band = (prm.shells > lo) & (prm.shells <= hi)
        jt = prm.times[band]
        pts = np.union1d(np.union1d(ev, jt), [0.0, prm.horizon])
        comp = total_compensator(nu, K, hi) - total_compensator(nu, K, lo)
        after = _mark_sums(prm, band, pts) - pts[:, None] * comp[None, :]
        best = float(np.max(K.gauge(after))) if pts.size else 0.0
        if jt.size:
            # left limit at a jump time: value there minus every jump exactly at that time
            before = _mark_sums(prm, band, jt) - _jump_at(prm, band, jt) - jt[:, None] * comp[None, :]
            best = max(best, float(np.max(K.gauge(before))))
        gaps[(lo, hi)] = best

    tail = {N: prm.horizon * nu.tail_moment(K, N, 2.0) for N in levels}
    return CompensatedSeriesResult(ev, partial, gaps, tail)


def _jump_at(prm: PRMSample, mask: np.ndarray, ts: np.ndarray) -> np.ndarray:
    t = prm.times[mask]
    m = prm.marks[mask]
    return np.array([m[t == s].sum(axis=0) for s in ts]).reshape(-1, prm.dim)


def tail_variance_bound(nu: LevyMeasure, K: BanachDisk, N: int, horizon: float = 1.0) -> float:
    """``horizon * sum_{n>N} int_{C_n} ||x||_K^2 dnu``."""
    return horizon * nu.tail_moment(K, N, 2.0)


# -- CSV ---------------------------------------------------------------------

def prm_header(d: int) -> list[str]:
    return ["replica", "time", "shell", *[f"mark_{i}" for i in range(d)]]


def write_prm_csv(fh, prms: Sequence[PRMSample], replicas: Sequence[int] | None = None) -> None:
    """Rows ``replica, time, shell, mark_*`` in stored order."""
    if not prms:
        raise ValueError("no PRM samples to write")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(prm_header(prms[0].dim))
    for i, prm in enumerate(prms):
        rep = i if replicas is None else replicas[i]
        for t, n, x in zip(prm.times, prm.shells, prm.marks):
            w.writerow([str(rep), repr(float(t)), str(int(n)), *(repr(float(v)) for v in x)])


def read_prm_csv(fh, horizon: float, shell_cutoff: int, replicas: Iterable[int] | None = None) -> dict[int, PRMSample]:
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    r = csv.reader(fh)
    header = next(r)
    d = len(header) - 3
    if header != prm_header(d):
        raise ValueError(f"unexpected PRM CSV header: {header}")
    data: dict[int, list] = {rep: [] for rep in (replicas or [])}
    for row in r:
        if row:
            data.setdefault(int(row[0]), []).append(row)
    out = {}
    for rep, rows in sorted(data.items()):
        if rows:
            t = np.array([float(x[1]) for x in rows])
            n = np.array([int(x[2]) for x in rows], dtype=np.int64)
            m = np.array([[float(v) for v in x[3:]] for x in rows]).reshape(-1, d)
        else:
            t, n, m = np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros((0, d))
        out[rep] = PRMSample(horizon, t, m, n, shell_cutoff)
    return out
