"""Levy-Khintchine exponents and empirical characteristic functionals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measure import QUAD_TOL, LevyMeasure
from .space import BanachDisk, DimensionError


@dataclass(frozen=True)
class Characteristics:
    """The quadruple ``(gamma, Q, nu, K)``."""

    gamma: np.ndarray
    Q: np.ndarray
    nu: LevyMeasure
    K: BanachDisk

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float).reshape(-1)
        d = gamma.shape[0]
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (d, d):
            raise DimensionError(f"Q has shape {Q.shape}, expected ({d}, {d})")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12:
            raise ValueError("Q must be symmetric")
        if d and np.min(np.linalg.eigvalsh(Q)) < -1e-10:
            raise ValueError("Q must be positive semidefinite")
        if self.nu.dim != d or self.K.dim != d:
            raise DimensionError("gamma, Q, nu and K must share one dimension")
        gamma.setflags(write=False)
        Q = Q.copy()
        Q.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "Q", Q)

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]


@dataclass(frozen=True)
class CFReport:
    functional: np.ndarray
    t: float
    analytic: complex
    empirical: complex
    stderr: float
    z_score: float

    def to_dict(self) -> dict:
        return {
            "functional": [float(v) for v in self.functional],
            "t": float(self.t),
            "analytic": [self.analytic.real, self.analytic.imag],
            "empirical": [self.empirical.real, self.empirical.imag],
            "stderr": self.stderr,
            "z_score": self.z_score,
        }


def levy_exponents(c: Characteristics, A, tol: float = QUAD_TOL) -> np.ndarray:
    """Vectorised :func:`levy_exponent` over the rows of ``A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] != c.dim:
        raise DimensionError(f"functionals have dimension {A.shape[1]}, expected {c.dim}")
    drift = 1j * (A @ c.gamma)
    gauss = -0.5 * np.einsum("ki,ij,kj->k", A, c.Q, A)
    return drift + gauss + c.nu.exponent_integral(c.K, A, compensate=True, tol=tol)


def levy_exponent(c: Characteristics, a, tol: float = QUAD_TOL) -> complex:
    """``eta(a) = i<gamma,a> - <Qa,a>/2 + int (e^{i<x,a>} - 1 - i<x,a> 1_K(x)) dnu``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (c.dim,):
        raise DimensionError(f"functional has shape {a.shape}, expected ({c.dim},)")
    return complex(levy_exponents(c, a[None, :], tol)[0])


def cf_at_time(c: Characteristics, a, t: float) -> complex:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return complex(np.exp(t * levy_exponent(c, a)))


def empirical_cf(samples, a) -> tuple[complex, float]:
    """Sample mean of ``exp(i<x_j, a>)`` and the standard error of that mean.

    The real and imaginary standard errors are combined in quadrature.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("empirical_cf needs at least 2 samples of shape (M, d)")
    a = np.asarray(a, dtype=float)
    if a.shape != (X.shape[1],):
        raise DimensionError(f"functional has shape {a.shape}, expected ({X.shape[1]},)")
    phase = X @ a
    re, im = np.cos(phase), np.sin(phase)
    M = X.shape[0]
    mean = complex(re.mean(), im.mean())
    if np.ptp(phase) == 0:
        # identical samples: skip the rounding noise of var()
        return mean, 0.0
    se = np.sqrt(re.var(ddof=1) / M + im.var(ddof=1) / M)
    return mean, float(se)


def z_score(diff: float, stderr: float) -> float:
    if stderr > 0:
        return float(diff / stderr)
    return 0.0 if diff == 0 else float("inf")


def cf_compare(c: Characteristics, samples, functionals, t: float) -> list[CFReport]:
    functionals = [np.asarray(a, dtype=float) for a in functionals]
    if not functionals:
        raise ValueError("at least one functional is required")
    etas = levy_exponents(c, np.stack(functionals))
    reports = []
    for a, eta in zip(functionals, etas):
        emp, se = empirical_cf(samples, a)
        ana = complex(np.exp(t * eta))
        # deterministic samples give a zero stderr; tiny rounding is not a mismatch
        diff = abs(emp - ana)
        if se == 0 and diff < 1e-12:
            diff = 0.0
        reports.append(CFReport(a, float(t), ana, emp, se, z_score(diff, se)))
    return reports


def random_functionals(count: int, dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Standard normal functionals times ``scale``; rows are functionals."""
    return scale * rng.standard_normal((count, dim))
