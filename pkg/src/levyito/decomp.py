"""Levy-Ito synthesis ``X_t = gamma t + W_t + J_t + L_t``, its inverse analysis,
and the statistical checks on the summands."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .charfn import Characteristics
from .gaussian import WienerSampler, sample_wiener_path
from .jumprm import PRMSample, sample_prm, total_compensator
from .measure import AtomicMeasure, LevyMeasure, RadialShellMeasure, poisson_exponential_finite, poisson_tail_cutoff
from .paths import CadlagPath
from .space import BanachDisk, DimensionError
from .streams import component_rng


class DegenerateVarianceError(ValueError):
    """The projected samples have (numerically) zero variance."""


class ReducibilityBudgetError(RuntimeError):
    """The series or Monte Carlo budget ran out before reaching ``1 - eps``."""


@dataclass(frozen=True)
class ComponentBundle:
    X: CadlagPath
    drift: CadlagPath
    W: CadlagPath
    J: CadlagPath
    L: CadlagPath
    prm: PRMSample
    truncation: int

    def components(self) -> dict[str, CadlagPath]:
        return {"drift": self.drift, "W": self.W, "J": self.J, "L": self.L}

    def sum_defect(self, times=None) -> float:
        """Largest coordinate gap between ``X`` and the sum of its components."""
        ts = self.X.evaluation_times() if times is None else np.asarray(times, dtype=float)
        total = sum(p.values_at(ts) for p in self.components().values())
        return float(np.max(np.abs(self.X.values_at(ts) - total), initial=0.0))


def make_grid(horizon: float, grid) -> np.ndarray:
    """An explicit grid, or ``grid`` equal steps on ``[0, horizon]``."""
    if np.ndim(grid) == 0:
        steps = int(grid)
        if steps < 1:
            raise ValueError("need at least one grid step")
        return np.linspace(0.0, horizon, steps + 1)
    g = np.asarray(grid, dtype=float)
    if g[0] != 0.0 or g[-1] != horizon:
        raise ValueError("grid must run from 0 to the horizon")
    return g


def _jump_path(grid: np.ndarray, times: np.ndarray, deltas: np.ndarray, rate: np.ndarray) -> CadlagPath:
    """Path ``sum of deltas up to t - t * rate`` from time-ordered jumps."""
    cum = np.vstack([np.zeros((1, deltas.shape[1])), np.cumsum(deltas, axis=0)])
    vals = cum[np.searchsorted(times, grid, side="right")] - grid[:, None] * rate[None, :]
    return CadlagPath(grid, vals, times, deltas)


def _split_jumps(times, deltas, shells, N):
    big = shells == 0
    small = (shells >= 1) & (shells <= N)
    rest = shells > N
    return (times[big], deltas[big]), (times[small], deltas[small]), (times[rest], deltas[rest])


def synthesize(c: Characteristics, horizon: float, grid, N_max: int, rng,
               wiener: WienerSampler | None = None) -> ComponentBundle:
    """Sample one Levy-Ito bundle.

    ``rng`` is a ``numpy.random.Generator`` (two child streams are spawned,
    one for ``W`` and one for the Poisson random measure) or a pair
    ``(wiener_rng, prm_rng)``.
    """
    if N_max < 1:
        raise ValueError("N_max must be at least 1")
    grid = make_grid(horizon, grid)
    if isinstance(rng, tuple):
        w_rng, p_rng = rng
    else:
        w_rng, p_rng = rng.spawn(2)
    d = c.dim
    if wiener is None:
        wiener = WienerSampler(c.Q, grid)
    drift = CadlagPath(grid, grid[:, None] * c.gamma[None, :])
    W = sample_wiener_path(wiener, w_rng)
    prm = sample_prm(c.nu, c.K, horizon, N_max, p_rng)
    order = prm.timeline()
    times, deltas, shells = prm.times[order], prm.marks[order], prm.shells[order]
    (bt, bd), (st, sd), _ = _split_jumps(times, deltas, shells, N_max)
    L = _jump_path(grid, bt, bd, np.zeros(d))
    J = _jump_path(grid, st, sd, total_compensator(c.nu, c.K, N_max))
    X = CadlagPath(grid, drift.values + W.values + J.values + L.values, times, deltas)
    return ComponentBundle(X, drift, W, J, L, prm, N_max)


def synthesize_replica(c: Characteristics, horizon: float, grid, N_max: int, seed: int, replica: int,
                       wiener: WienerSampler | None = None) -> ComponentBundle:
    """Bundle for one replica with streams keyed by ``(seed, replica, component)``."""
    return synthesize(c, horizon, grid, N_max,
                      (component_rng(seed, replica, "wiener"), component_rng(seed, replica, "prm")),
                      wiener=wiener)


def synthesize_many(c: Characteristics, horizon: float, grid, N_max: int, seed: int,
                    replicas: int | Sequence[int]) -> list[ComponentBundle]:
    grid = make_grid(horizon, grid)
    wiener = WienerSampler(c.Q, grid)
    reps = range(replicas) if isinstance(replicas, int) else replicas
    return [synthesize_replica(c, horizon, grid, N_max, seed, r, wiener) for r in reps]


def analyze(X: CadlagPath, K: BanachDisk, nu: LevyMeasure, N: int) -> tuple[CadlagPath, CadlagPath, CadlagPath]:
    """Split ``X`` into ``L`` (jumps outside K), ``J`` (compensated jumps in
    shells ``1..N``) and the residual ``Y = X - L - J``."""
    if X.dim != K.dim or nu.dim != K.dim:
        raise DimensionError("path, disk and measure must share one dimension")
    shells = X.shells(K)
    (bt, bd), (st, sd), (rt, rd) = _split_jumps(X.jump_times, X.jump_deltas, shells, N)
    L = _jump_path(X.grid, bt, bd, np.zeros(X.dim))
    J = _jump_path(X.grid, st, sd, total_compensator(nu, K, N))
    Y = CadlagPath(X.grid, X.values - L.values - J.values, rt, rd)
    return L, J, Y


# -- independence -------------------------------------------------------------

TRANSFORMS = {
    "linear": lambda v: v,
    "cos": np.cos,
    "sin": np.sin,
}
DEFAULT_PAIRS = (("J", "L"), ("J", "Y"), ("L", "Y"))


@dataclass(frozen=True)
class IndependenceStat:
    pair: tuple[str, str]
    transform: str
    functional: int
    correlation: float
    z_score: float
    degenerate: bool = False

    def passed(self, z_tol: float) -> bool:
        return self.degenerate or abs(self.z_score) <= z_tol

    def to_dict(self) -> dict:
        return {"pair": list(self.pair), "transform": self.transform, "functional": self.functional,
                "correlation": self.correlation, "z_score": self.z_score, "degenerate": self.degenerate}


def correlation_z(u: np.ndarray, v: np.ndarray) -> tuple[float, float, bool]:
    """Sample correlation and ``r * sqrt(M)``; flags zero variance."""
    su, sv = u.std(), v.std()
    scale_u = max(1.0, float(np.abs(u).max(initial=0.0)))
    scale_v = max(1.0, float(np.abs(v).max(initial=0.0)))
    if su <= 1e-12 * scale_u or sv <= 1e-12 * scale_v:
        return 0.0, 0.0, True
    r = float(np.mean((u - u.mean()) * (v - v.mean())) / (su * sv))
    return r, r * math.sqrt(u.size), False


def independence_stats(samples: dict[str, np.ndarray], functionals, pairs=DEFAULT_PAIRS,
                       transforms=("linear", "cos", "sin")) -> list[IndependenceStat]:
    """Correlation z-scores of transformed projections for each pair of components."""
    out = []
    for k, a in enumerate(np.atleast_2d(np.asarray(functionals, dtype=float))):
        proj = {name: np.asarray(s) @ a for name, s in samples.items()}
        for p, q in pairs:
            for tr in transforms:
                r, z, deg = correlation_z(TRANSFORMS[tr](proj[p]), TRANSFORMS[tr](proj[q]))
                out.append(IndependenceStat((p, q), tr, k, r, z, deg))
    return out


def component_samples(bundles: Sequence[ComponentBundle], t: float, K: BanachDisk | None = None,
                      nu: LevyMeasure | None = None) -> dict[str, np.ndarray]:
    """``J_t, L_t, Y_t`` across bundles.  ``Y`` comes from re-analysing ``X``
    when ``K`` and ``nu`` are given, otherwise from ``X - L - J``."""
    J, L, Y = [], [], []
    for b in bundles:
        if K is not None and nu is not None:
            l, j, y = analyze(b.X, K, nu, b.truncation)
        else:
            l, j = b.L, b.J
            y = None
        jt, lt = j.value_at(t), l.value_at(t)
        J.append(jt)
        L.append(lt)
        Y.append(y.value_at(t) if y is not None else b.X.value_at(t) - lt - jt)
    return {"J": np.array(J), "L": np.array(L), "Y": np.array(Y)}


def independence_check(bundles: Sequence[ComponentBundle], functionals, t: float, pairs=DEFAULT_PAIRS,
                       transforms=("linear", "cos", "sin")) -> list[IndependenceStat]:
    if len(bundles) < 100:
        raise ValueError("independence_check needs at least 100 replicas")
    return independence_stats(component_samples(bundles, t), functionals, pairs, transforms)


# -- Gaussianity ----------------------------------------------------------------

@dataclass(frozen=True)
class GaussianityResult:
    skewness: float
    excess_kurtosis: float
    z_skewness: float
    z_kurtosis: float
    n: int

    def passed(self, z_tol: float) -> bool:
        return abs(self.z_skewness) <= z_tol and abs(self.z_kurtosis) <= z_tol

    def to_dict(self) -> dict:
        return {"skewness": self.skewness, "excess_kurtosis": self.excess_kurtosis,
                "z_skewness": self.z_skewness, "z_kurtosis": self.z_kurtosis, "n": self.n}


def gaussianity_check(samples, a, min_samples: int = 1000) -> GaussianityResult:
    """Sample skewness and excess kurtosis of ``<Y - mean, a>`` with z-scores
    against the Gaussian values 0 using the normal-theory standard errors
    ``sqrt(6/M)`` and ``sqrt(24/M)``."""
    X = np.asarray(samples, dtype=float)
    v = X @ np.asarray(a, dtype=float) if X.ndim == 2 else X.reshape(-1)
    M = v.size
    if M < min_samples:
        raise ValueError(f"gaussianity_check needs at least {min_samples} samples, got {M}")
    c = v - v.mean()
    m2 = float(np.mean(c**2))
    if m2 <= (1e-12 * max(1.0, float(np.abs(v).max())))**2:
        raise DegenerateVarianceError("projected samples have zero variance")
    skew = float(np.mean(c**3) / m2**1.5)
    kurt = float(np.mean(c**4) / m2**2 - 3.0)
    return GaussianityResult(skew, kurt, skew / math.sqrt(6.0 / M), kurt / math.sqrt(24.0 / M), M)


def compound_poisson_excess_kurtosis(nu: AtomicMeasure, a, t: float = 1.0) -> float:
    """Excess kurtosis of ``<P_t, a>`` for ``P_t ~ e(t nu)``: ``int y^4 / (t (int y^2)^2)``."""
    y = nu.atoms @ np.asarray(a, dtype=float)
    m2 = float(nu.masses @ y**2)
    if m2 == 0:
        raise DegenerateVarianceError("functional annihilates every atom")
    return float(nu.masses @ y**4) / (t * m2**2)


# -- local reducibility ---------------------------------------------------------

@dataclass(frozen=True)
class ReducibilityReport:
    epsilon: float
    results: dict  # level -> (shift vector, m)
    monotone_flag: bool
    method: str = "series"

    def m_values(self) -> list[int]:
        return [self.results[k][1] for k in sorted(self.results)]

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "method": self.method,
            "monotone_flag": self.monotone_flag,
            "levels": [
                {"level": int(k), "shift": [float(x) for x in self.results[k][0]], "m": int(self.results[k][1])}
                for k in sorted(self.results)
            ],
        }


def _smallest_multiple(gauges: np.ndarray, probs: np.ndarray, eps: float) -> int:
    """Smallest integer ``m >= 1`` with ``sum probs[gauges <= m] > 1 - eps``."""
    order = np.argsort(gauges)
    g, cp = gauges[order], np.cumsum(probs[order])
    if cp.size == 0 or cp[-1] <= 1 - eps:
        raise ReducibilityBudgetError("available mass never exceeds 1 - eps")
    m = 1
    while True:
        # closed disk: boundary points count, with a relative slack for rounding
        k = np.searchsorted(g, m * (1 + 1e-12), side="right")
        if k and cp[k - 1] > 1 - eps:
            return m
        m += 1


def _wilson_lower(p_hat: float, n: int, z: float) -> float:
    denom = 1 + z * z / n
    centre = p_hat + z * z / (2 * n)
    half = z * math.sqrt(p_hat * (1 - p_hat) / n + z * z / (4 * n * n))
    return (centre - half) / denom


def _mc_multiple(norms: np.ndarray, eps: float, z: float) -> int:
    n = norms.size
    s = np.sort(norms)
    m = 1
    top = max(1, int(math.ceil(s[-1])) if n else 1)
    while m <= top:
        k = np.searchsorted(s, m * (1 + 1e-12), side="right")
        if _wilson_lower(k / n, n, z) > 1 - eps:
            return m
        m += 1
    raise ReducibilityBudgetError(f"{n} Monte Carlo samples cannot certify mass > {1 - eps} at z={z}")


def reducibility_check(nu: LevyMeasure, K: BanachDisk, eps: float, truncation_levels: Sequence[int],
                       rng: np.random.Generator | None = None, mc_samples: int = 20_000,
                       confidence_z: float = 3.0, series_tol: float = 1e-12) -> ReducibilityReport:
    """For ``rho`` = ``nu`` restricted to shells ``1..level``, shift by
    ``-int x drho`` and find the least integer ``m`` with
    ``e(rho) * delta_shift (m K) > 1 - eps``.

    Atomic measures use the exact Poisson series; radial-shell measures use
    Monte Carlo with a Wilson lower confidence bound.  ``monotone_flag``
    records whether ``m`` has stabilised over the last two levels.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    levels = sorted(set(int(n) for n in truncation_levels))
    if not levels or levels[0] < 1:
        raise ValueError("truncation levels must be >= 1")
    results = {}
    if isinstance(nu, AtomicMeasure):
        method = "series"
        for lvl in levels:
            rho = nu.restrict(K, range(1, lvl + 1))
            shift = -total_compensator(rho, K, lvl)
            if rho.total_mass() == 0:
                results[lvl] = (shift, 1)
                continue
            try:
                cutoff = poisson_tail_cutoff(rho.total_mass(), series_tol, max_cutoff=400)
            except ValueError as exc:
                raise ReducibilityBudgetError(str(exc)) from exc
            law = poisson_exponential_finite(rho, cutoff, tol=series_tol)
            results[lvl] = (shift, _smallest_multiple(K.gauge(law.points + shift), law.probabilities, eps))
    elif isinstance(nu, RadialShellMeasure):
        method = "monte_carlo"
        if rng is None:
            raise ValueError("Monte Carlo reducibility check needs an rng")
        for lvl in levels:
            shift = -total_compensator(nu, K, lvl)
            S = np.tile(shift, (mc_samples, 1))
            for n in range(1, lvl + 1):
                counts = rng.poisson(nu.shell_mass(K, n), size=mc_samples)
                total = int(counts.sum())
                if total:
                    marks = nu.sample_shell(K, n, rng, size=total)
                    np.add.at(S, np.repeat(np.arange(mc_samples), counts), marks)
            results[lvl] = (shift, _mc_multiple(K.gauge(S), eps, confidence_z))
    else:
        raise TypeError(f"unsupported measure {type(nu).__name__}")
    ms = [results[k][1] for k in levels]
    return ReducibilityReport(float(eps), results, len(ms) < 2 or ms[-1] == ms[-2], method)
