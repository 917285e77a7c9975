"""Levy measures with exact shell masses and compensators.

Two kinds are provided.  :class:`AtomicMeasure` is a finite sum of point
masses and supports exact arithmetic everywhere.  :class:`RadialShellMeasure`
puts mass ``c * n**(alpha - 1)`` on shell ``C_n``, spread uniformly in the
gauge interval ``(1/(n+1), 1/n]`` along a finite set of boundary directions
of the disk; for ``alpha >= 0`` it has infinite activity.

Shells refer to the partition ``C_0 = K^c``, ``C_n = (1/n)K \\ (1/(n+1))K``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import integrate, stats

from .space import BanachDisk, DimensionError, shell_bounds, shell_indices

# 16-point Gauss-Legendre rule on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
GL_NODES = 0.5 * (_GL_X + 1.0)
GL_WEIGHTS = 0.5 * _GL_W

QUAD_TOL = 1e-10
MAX_QUAD_SHELLS = 2**22


class QuadratureError(RuntimeError):
    """The tail of a shell series could not be pushed below tolerance."""


class EmptyShellError(ValueError):
    """Sampling was requested from a shell that carries no mass."""


@dataclass(frozen=True)
class FiniteDistribution:
    """A probability distribution with finitely many atoms."""

    points: np.ndarray
    probabilities: np.ndarray
    tolerance: float = 1e-10

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] != p.shape[0]:
            raise ValueError("points must be (k, d) with one probability per point")
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > self.tolerance:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1 within {self.tolerance}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probabilities", p)

    def cf(self, a) -> complex:
        a = np.asarray(a, dtype=float)
        return complex(np.sum(self.probabilities * np.exp(1j * (self.points @ a))))

    def mass_where(self, mask) -> float:
        return float(np.sum(self.probabilities[np.asarray(mask, dtype=bool)]))


class LevyMeasure:
    """Common interface.  Subclasses are immutable after construction."""

    dim: int

    def shell_mass(self, K: BanachDisk, n: int) -> float:
        raise NotImplementedError

    def shell_compensator(self, K: BanachDisk, n: int) -> np.ndarray:
        raise NotImplementedError

    def sample_shell(self, K: BanachDisk, n: int, rng: np.random.Generator, size: int | None = None):
        raise NotImplementedError

    def active_shells(self, K: BanachDisk, n_max: int) -> list[int]:
        """Shells in ``0..n_max`` with positive mass."""
        return [n for n in range(n_max + 1) if self.shell_mass(K, n) > 0]

    def shell_moment(self, K: BanachDisk, n: int, p: float = 2.0) -> float:
        """``int_{C_n} ||x||_K^p dnu``."""
        raise NotImplementedError

    def tail_moment(self, K: BanachDisk, N: int, p: float = 2.0) -> float:
        """``sum_{n > N} int_{C_n} ||x||_K^p dnu``."""
        raise NotImplementedError

    def total_mass(self, K: BanachDisk | None = None) -> float:
        raise NotImplementedError

    def exponent_integral(self, K: BanachDisk, A, compensate: bool = True, tol: float = QUAD_TOL) -> np.ndarray:
        """``int (e^{i<x,a>} - 1 - i<x,a> 1_K(x)) dnu`` for each row of ``A``.

        With ``compensate=False`` the linear term is dropped everywhere, which
        requires finite total mass.
        """
        raise NotImplementedError

    def _check_disk(self, K: BanachDisk):
        if K.dim != self.dim:
            raise DimensionError(f"disk has dimension {K.dim}, measure has {self.dim}")


class AtomicMeasure(LevyMeasure):
    """``nu = sum_j m_j delta_{x_j}`` with ``x_j != 0`` and ``m_j > 0``."""

    kind = "atomic"

    def __init__(self, atoms, masses, dim: int | None = None):
        atoms = np.asarray(atoms, dtype=float)
        masses = np.asarray(masses, dtype=float).reshape(-1)
        if atoms.size == 0:
            if dim is None:
                raise ValueError("an empty atomic measure needs an explicit dim")
            atoms = np.zeros((0, dim))
        if atoms.ndim == 1:
            atoms = atoms.reshape(1, -1)
        if atoms.shape[0] != masses.shape[0]:
            raise ValueError("one mass per atom required")
        if dim is not None and atoms.shape[1] != dim:
            raise DimensionError(f"atoms have dimension {atoms.shape[1]}, expected {dim}")
        if np.any(~np.isfinite(atoms)) or np.any(~np.isfinite(masses)):
            raise ValueError("atoms and masses must be finite")
        if np.any(masses <= 0):
            raise ValueError("atom masses must be positive")
        if np.any(np.all(atoms == 0, axis=1)):
            raise ValueError("a Levy measure carries no mass at the origin")
        atoms.setflags(write=False)
        masses.setflags(write=False)
        self.atoms = atoms
        self.masses = masses
        self.dim = atoms.shape[1]
        self._shell_cache: dict[bytes, np.ndarray] = {}

    @classmethod
    def zero(cls, dim: int) -> "AtomicMeasure":
        return cls(np.zeros((0, dim)), np.zeros(0), dim=dim)

    def __repr__(self):
        return f"AtomicMeasure(atoms={self.atoms.tolist()}, masses={self.masses.tolist()})"

    def shells(self, K: BanachDisk) -> np.ndarray:
        """Shell index of every atom (cached per disk)."""
        self._check_disk(K)
        key = K.radii.tobytes()
        s = self._shell_cache.get(key)
        if s is None:
            s = shell_indices(self.atoms, K) if len(self.masses) else np.zeros(0, dtype=np.int64)
            s.setflags(write=False)
            self._shell_cache[key] = s
        return s

    def shell_mass(self, K, n):
        return float(self.masses[self.shells(K) == n].sum())

    def shell_compensator(self, K, n):
        if n < 1:
            raise ValueError("no compensation outside K (shell 0)")
        sel = self.shells(K) == n
        if not sel.any():
            return np.zeros(self.dim)
        # fsum makes mirrored atom pairs cancel exactly
        terms = self.masses[sel, None] * self.atoms[sel]
        return np.array([math.fsum(col) for col in terms.T])

    def active_shells(self, K, n_max):
        s = self.shells(K)
        return sorted(int(n) for n in np.unique(s) if n <= n_max)

    def sample_shell(self, K, n, rng, size=None):
        sel = np.flatnonzero(self.shells(K) == n)
        if sel.size == 0:
            raise EmptyShellError(f"shell {n} has no mass")
        p = self.masses[sel] / self.masses[sel].sum()
        k = 1 if size is None else size
        idx = sel[rng.choice(sel.size, size=k, p=p)] if sel.size > 1 else np.full(k, sel[0])
        out = self.atoms[idx].copy()
        return out[0] if size is None else out

    def shell_moment(self, K, n, p=2.0):
        sel = self.shells(K) == n
        return float(self.masses[sel] @ K.gauge(self.atoms[sel]) ** p) if sel.any() else 0.0

    def tail_moment(self, K, N, p=2.0):
        sel = self.shells(K) > N
        return float(self.masses[sel] @ K.gauge(self.atoms[sel]) ** p) if sel.any() else 0.0

    def total_mass(self, K=None):
        return float(self.masses.sum())

    def restrict(self, K: BanachDisk, shells: Iterable[int]) -> "AtomicMeasure":
        """``nu`` restricted to the union of the given shells."""
        keep = np.isin(self.shells(K), list(shells))
        return AtomicMeasure(self.atoms[keep], self.masses[keep], dim=self.dim)

    def exponent_integral(self, K, A, compensate=True, tol=QUAD_TOL):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if len(self.masses) == 0:
            return np.zeros(A.shape[0], dtype=complex)
        y = A @ self.atoms.T  # (k, atoms)
        inside = (self.shells(K) >= 1) if compensate else np.zeros(len(self.masses), dtype=bool)
        integrand = np.expm1(1j * y) - 1j * y * inside
        return integrand @ self.masses


class RadialShellMeasure(LevyMeasure):
    """Shell masses ``m(n) = c * n**(alpha - 1)`` plus ``tail_mass`` on ``K^c``.

    Inside shell ``n`` the gauge radius is uniform on ``(1/(n+1), 1/n]``;
    outside ``K`` it is uniform on ``(1, outer_radius]``.  The direction is
    drawn from ``directions`` (rescaled to gauge 1) with ``direction_weights``.
    The default directions are the symmetric axis points ``+-k_i e_i``.
    ``alpha < 2`` keeps the small-jump second moment finite.
    """

    kind = "radial_shell"

    def __init__(self, disk: BanachDisk, c: float = 1.0, alpha: float = 0.0, tail_mass: float = 0.0,
                 outer_radius: float = 2.0, directions=None, direction_weights=None):
        if not c > 0:
            raise ValueError("c must be positive")
        if not alpha < 2:
            raise ValueError("alpha must be < 2 for a finite small-jump second moment")
        if tail_mass < 0:
            raise ValueError("tail_mass must be nonnegative")
        if not outer_radius > 1:
            raise ValueError("outer_radius must exceed 1")
        self.disk = disk
        self.dim = disk.dim
        self.c = float(c)
        self.alpha = float(alpha)
        self.tail_mass = float(tail_mass)
        self.outer_radius = float(outer_radius)
        u = disk.unit_directions() if directions is None else np.atleast_2d(np.asarray(directions, dtype=float))
        if u.shape[1] != self.dim:
            raise DimensionError(f"directions have dimension {u.shape[1]}, expected {self.dim}")
        g = disk.gauge(u)
        if np.any(g <= 0):
            raise ValueError("directions must be nonzero")
        u = u / g[:, None]
        if direction_weights is None:
            p = np.full(u.shape[0], 1.0 / u.shape[0])
        else:
            p = np.asarray(direction_weights, dtype=float)
            if p.shape != (u.shape[0],) or np.any(p < 0) or p.sum() <= 0:
                raise ValueError("one nonnegative weight per direction required")
            p = p / p.sum()
        u.setflags(write=False)
        p.setflags(write=False)
        self.directions = u
        self.direction_weights = p
        self.mean_direction = p @ u

    def __repr__(self):
        return (f"RadialShellMeasure(c={self.c}, alpha={self.alpha}, tail_mass={self.tail_mass}, "
                f"outer_radius={self.outer_radius}, directions={len(self.directions)})")

    def _check_disk(self, K):
        super()._check_disk(K)
        if K is not self.disk and not np.array_equal(K.radii, self.disk.radii):
            raise ValueError("RadialShellMeasure is defined relative to a different disk")

    def m(self, n):
        n = np.asarray(n, dtype=float)
        return self.c * n ** (self.alpha - 1.0)

    def _interval(self, n: int) -> tuple[float, float]:
        return (1.0, self.outer_radius) if n == 0 else shell_bounds(n)

    def shell_mass(self, K, n):
        self._check_disk(K)
        if n < 0:
            raise ValueError("shell index must be nonnegative")
        return self.tail_mass if n == 0 else float(self.m(n))

    def shell_compensator(self, K, n):
        self._check_disk(K)
        if n < 1:
            raise ValueError("no compensation outside K (shell 0)")
        lo, hi = shell_bounds(n)
        return float(self.m(n)) * 0.5 * (lo + hi) * self.mean_direction

    def active_shells(self, K, n_max):
        self._check_disk(K)
        return ([0] if self.tail_mass > 0 else []) + list(range(1, n_max + 1))

    def sample_shell(self, K, n, rng, size=None):
        if self.shell_mass(K, n) <= 0:
            raise EmptyShellError(f"shell {n} has no mass")
        k = 1 if size is None else size
        lo, hi = self._interval(n)
        out = np.empty((k, self.dim))
        todo = np.arange(k)
        while todo.size:
            r = hi - (hi - lo) * rng.random(todo.size)
            j = rng.choice(len(self.direction_weights), size=todo.size, p=self.direction_weights)
            out[todo] = r[:, None] * self.directions[j]
            # rounding can push r*u across a shell boundary; redraw those
            todo = todo[shell_indices(out[todo], K) != n]
        return out[0] if size is None else out

    def _radial_moment(self, lo, hi, p):
        return (hi ** (p + 1) - lo ** (p + 1)) / ((p + 1) * (hi - lo))

    def shell_moment(self, K, n, p=2.0):
        self._check_disk(K)
        lo, hi = self._interval(n)
        return self.shell_mass(K, n) * self._radial_moment(lo, hi, p)

    def _moment_terms(self, n, p):
        n = np.asarray(n, dtype=float)
        lo, hi = 1.0 / (n + 1.0), 1.0 / n
        return self.m(n) * self._radial_moment(lo, hi, p)

    def tail_moment(self, K, N, p=2.0):
        """Explicit sum over ``2**16`` shells plus an Euler-Maclaurin remainder."""
        self._check_disk(K)
        if p + 1 - self.alpha <= 1:
            return float("inf")
        L = 2**16
        n = np.arange(N + 1, N + L + 1, dtype=float)
        head = float(np.sum(self._moment_terms(n, p)[::-1]))
        M = float(N + L + 1)
        f = lambda x: float(self._moment_terms(x, p))
        # x = M / u maps the infinite tail onto (0, 1]
        rest, _ = integrate.quad(lambda u: f(M / u) * M / (u * u) if u > 0 else 0.0, 0.0, 1.0,
                                 epsabs=1e-14 * head, epsrel=1e-12, limit=200)
        h = 1e-3 * M
        fprime = (f(M + h) - f(M - h)) / (2 * h)
        return head + rest + 0.5 * f(M) - fprime / 12.0

    def total_mass(self, K=None):
        if self.alpha >= 0:
            return float("inf")
        from scipy.special import zeta
        return float(self.c * zeta(1.0 - self.alpha) + self.tail_mass)

    def _shell_integral(self, A, lo, hi, mass, compensate):
        # GL radial rule x exact sum over the finite direction set
        r = lo + (hi - lo) * GL_NODES
        y = (A @ self.directions.T)[:, :, None] * r[None, None, :]  # (k, dirs, 16)
        f = np.expm1(1j * y)
        if compensate:
            f = f - 1j * y
        return mass * np.einsum("kjq,j,q->k", f, self.direction_weights, GL_WEIGHTS)

    def exponent_integral(self, K, A, compensate=True, tol=QUAD_TOL):
        self._check_disk(K)
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if not compensate and not np.isfinite(self.total_mass()):
            raise ValueError("uncompensated integral needs finite total mass")
        proj = A @ self.directions.T  # (k, dirs)
        amax = float(np.max(np.abs(proj))) if proj.size else 0.0
        out = np.zeros(A.shape[0], dtype=complex)
        if self.tail_mass > 0:
            out += self._shell_integral(A, 1.0, self.outer_radius, self.tail_mass, False)
        if amax == 0.0:
            return out
        # Taylor terms for shells beyond N are summed analytically; the
        # Lagrange remainder of the next order bounds the error.
        if compensate:
            orders, rem_p = (2, 3), 4
        else:
            orders, rem_p = (1, 2, 3), 4
        N = 64
        while True:
            bound = amax ** rem_p / 24.0 * self.tail_moment(K, N, rem_p)
            if bound < tol:
                break
            N *= 2
            if N > MAX_QUAD_SHELLS:
                raise QuadratureError(f"tail bound {bound:.3g} still above {tol:g} at {N // 2} shells")
        ns = np.arange(1, N + 1, dtype=float)
        lo, hi = 1.0 / (ns + 1.0), 1.0 / ns
        masses = self.m(ns)
        for s in range(0, N, 512):
            sl = slice(s, min(N, s + 512))
            r = lo[sl, None] + (hi[sl] - lo[sl])[:, None] * GL_NODES[None, :]  # (shells, 16)
            y = proj[:, :, None, None] * r[None, None, :, :]
            f = np.expm1(1j * y)
            if compensate:
                f = f - 1j * y
            out += np.einsum("kjsq,j,s,q->k", f, self.direction_weights, masses[sl], GL_WEIGHTS)
        for p in orders:
            coeff = (1j) ** p / float(np.prod(np.arange(1, p + 1)))
            out += coeff * (proj ** p @ self.direction_weights) * self.tail_moment(K, N, p)
        return out


def shell_mass(nu: LevyMeasure, K: BanachDisk, n: int) -> float:
    return nu.shell_mass(K, n)


def shell_compensator(nu: LevyMeasure, K: BanachDisk, n: int) -> np.ndarray:
    """``int_{C_n} x dnu`` for ``n >= 1``."""
    return nu.shell_compensator(K, n)


def sample_shell(nu: LevyMeasure, K: BanachDisk, n: int, rng: np.random.Generator, size: int | None = None):
    """Draw from ``nu|_{C_n} / nu(C_n)``."""
    return nu.sample_shell(K, n, rng, size)


def poisson_exponential_cf(nu: LevyMeasure, a, K: BanachDisk | None = None) -> complex:
    """Fourier transform ``exp(int (e^{i<x,a>} - 1) dnu)`` of ``e(nu)``."""
    if not np.isfinite(nu.total_mass(K)):
        raise ValueError("Poisson exponential needs a finite measure")
    a = np.asarray(a, dtype=float)
    if a.shape != (nu.dim,):
        raise DimensionError(f"functional has shape {a.shape}, expected ({nu.dim},)")
    if K is None:
        if isinstance(nu, RadialShellMeasure):
            K = nu.disk
        else:
            K = BanachDisk(np.ones(nu.dim))
    return complex(np.exp(nu.exponent_integral(K, a, compensate=False)[0]))


def poisson_tail_cutoff(total_mass: float, tol: float, max_cutoff: int = 10_000) -> int:
    """Smallest ``k`` with ``P(Poisson(total_mass) > k) <= tol``."""
    k = int(total_mass)
    while stats.poisson.sf(k, total_mass) > tol:
        k += 1
        if k > max_cutoff:
            raise ValueError("Poisson series tail does not reach tolerance within the cutoff budget")
    return k


def poisson_exponential_finite(nu: AtomicMeasure, series_cutoff: int, tol: float = 1e-10) -> FiniteDistribution:
    """``e(nu) = e^{-nu(E)} sum_k nu^{*k} / k!`` by explicit convolution powers.

    The series is truncated after ``series_cutoff`` terms; the omitted Poisson
    tail must not exceed ``tol``.  Points are tracked by their atom-count
    vectors so coinciding sums merge exactly.
    """
    if not isinstance(nu, AtomicMeasure):
        raise TypeError("brute-force Poisson exponential needs an atomic measure")
    total = nu.total_mass()
    tail = float(stats.poisson.sf(series_cutoff, total)) if total > 0 else 0.0
    if tail > tol:
        raise ValueError(f"cutoff {series_cutoff} leaves Poisson tail {tail:.3g} > {tol:g}")
    k = len(nu.masses)
    if k == 0:
        return FiniteDistribution(np.zeros((1, nu.dim)), np.ones(1), tol)

    scale = np.exp(-total)
    acc: dict[tuple[int, ...], float] = {}
    power = {(0,) * k: 1.0}  # nu^{*j} / j! in count coordinates
    for j in range(series_cutoff + 1):
        if j > 0:
            nxt: dict[tuple[int, ...], float] = {}
            for key, w in power.items():
                for i in range(k):
                    key2 = key[:i] + (key[i] + 1,) + key[i + 1:]
                    nxt[key2] = nxt.get(key2, 0.0) + w * nu.masses[i] / j
            power = nxt
        for key, w in power.items():
            acc[key] = acc.get(key, 0.0) + scale * w

    counts = np.array(list(acc.keys()), dtype=float)
    probs = np.array(list(acc.values()))
    points = counts @ nu.atoms
    keys = np.round(points, 12) + 0.0  # +0.0 folds -0.0 into 0.0
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    merged = np.zeros(uniq.shape[0])
    np.add.at(merged, inverse.reshape(-1), probs)
    first = np.zeros(uniq.shape[0], dtype=int)
    first[inverse.reshape(-1)[::-1]] = np.arange(len(probs))[::-1]
    return FiniteDistribution(points[first], merged, tolerance=max(tol * 10, 1e-12))
