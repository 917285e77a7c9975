"""Experiment orchestration shared by the command-line commands.

Replicas are simulated independently from streams keyed by
``(seed, replica, component)`` and always collected in replica order, so the
number of worker processes never changes the output.
"""
from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .charfn import cf_compare, z_score
from .config import ExperimentConfig, functional_rng, parse_config
from .decomp import (DegenerateVarianceError, analyze, correlation_z, gaussianity_check, independence_stats,
                     reducibility_check, synthesize_many)
from .gaussian import wiener_cov_check
from .jumprm import PRMSample, compensated_series, write_prm_csv
from .paths import CadlagPath, count_measure, write_paths_csv


@dataclass
class Dataset:
    paths: list[CadlagPath]
    prms: list[PRMSample] | None


def _simulate_chunk(raw: dict, reps: list[int]):
    cfg = parse_config(raw)
    bundles = synthesize_many(cfg.characteristics, cfg.horizon, cfg.grid, cfg.shell_cutoff, cfg.seed, reps)
    return [b.X for b in bundles], [b.prm for b in bundles]


def _chunks(n: int, jobs: int) -> list[list[int]]:
    size = max(1, math.ceil(n / max(1, jobs * 4)))
    return [list(range(i, min(n, i + size))) for i in range(0, n, size)]


def simulate(cfg: ExperimentConfig, jobs: int = 1) -> Dataset:
    reps = list(range(cfg.replicas))
    if jobs <= 1 or cfg.replicas < 2:
        X, P = _simulate_chunk(cfg.raw, reps)
        return Dataset(X, P)
    X, P = [], []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for xs, ps in pool.map(_simulate_chunk, [cfg.raw] * len(_chunks(len(reps), jobs)), _chunks(len(reps), jobs)):
            X.extend(xs)
            P.extend(ps)
    return Dataset(X, P)


def paths_csv_text(paths: list[CadlagPath]) -> str:
    buf = io.StringIO()
    write_paths_csv(buf, paths)
    return buf.getvalue()


def prm_csv_text(prms: list[PRMSample]) -> str:
    buf = io.StringIO()
    write_prm_csv(buf, prms)
    return buf.getvalue()


# -- verification ------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    skipped: bool = False
    detail: str = ""

    def to_dict(self):
        return {"passed": self.passed, "skipped": self.skipped, "detail": self.detail}


@dataclass
class VerificationReport:
    config_hash: str
    seed: int
    replicas: int
    checks: list[Check] = field(default_factory=list)
    cf_reports: list = field(default_factory=list)
    wiener: list = field(default_factory=list)
    counts: list = field(default_factory=list)
    independence: list = field(default_factory=list)
    gaussianity: list = field(default_factory=list)
    reducibility: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed or c.skipped for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "replicas": self.replicas,
            "passed": self.passed,
            "checks": {c.name: c.to_dict() for c in self.checks},
            "cf_reports": self.cf_reports,
            "wiener": self.wiener,
            "counts": self.counts,
            "independence": self.independence,
            "gaussianity": self.gaussianity,
            "reducibility": self.reducibility,
            "convergence": self.convergence,
        }


def _enough(passes: int, total: int, frac: float) -> bool:
    return passes >= math.ceil(frac * total - 1e-9)


def verify(cfg: ExperimentConfig, data: Dataset) -> VerificationReport:
    """Run every statistical check of the verification block on ``data``."""
    ver = cfg.verification
    if ver is None:
        raise ValueError("config has no [verification] block")
    c, K, nu = cfg.characteristics, cfg.disk, cfg.nu
    tol, frac = ver.tolerance_z, ver.pass_fraction
    rep = VerificationReport(cfg.config_hash(), cfg.seed, len(data.paths))
    M = len(data.paths)
    grid = data.paths[0].grid
    if not np.allclose(grid, cfg.grid, rtol=0, atol=1e-12):
        raise ValueError("stored paths use a different time grid than the config")
    N = cfg.shell_cutoff
    parts = [analyze(X, K, nu, N) for X in data.paths]
    T = cfg.horizon

    # characteristic functional of X_t
    if M >= 2:
        ok = True
        for t in ver.cf_times:
            samples = np.array([X.value_at(t) for X in data.paths])
            reports = cf_compare(c, samples, ver.functionals, t)
            rep.cf_reports += [r.to_dict() for r in reports]
            ok &= _enough(sum(r.z_score <= tol for r in reports), len(reports), frac)
        rep.checks.append(Check("cf", bool(ok), detail=f"z <= {tol} for >= {frac:.0%} of functionals per time"))
    else:
        rep.checks.append(Check("cf", True, True, "fewer than 2 replicas"))

    # Wiener covariance on W = Y - gamma t
    if M >= 2:
        W = np.stack([y.values - grid[:, None] * c.gamma[None, :] for _, _, y in parts])
        F = ver.functionals
        s = float(grid[max(1, (grid.size - 1) // 2)])
        n_tuples = min(10, F.shape[0])
        zs = []
        for i in range(n_tuples):
            a, b = F[i], F[(i + 1) % F.shape[0]]
            est, target, z = wiener_cov_check(W, a, b, s, T, Q=c.Q, grid=grid)
            rep.wiener.append({"a": a.tolist(), "b": b.tolist(), "s": s, "t": T,
                               "estimate": est, "target": target, "z_score": z})
            zs.append(abs(z))
        rep.checks.append(Check("wiener", _enough(sum(z <= tol for z in zs), len(zs), frac),
                                detail="E<W_t,a><W_s,b> vs <Qa,b>min(s,t)"))
    else:
        rep.checks.append(Check("wiener", True, True, "fewer than 2 replicas"))

    # Poisson counts per simulated shell
    shells = nu.active_shells(K, N)
    if M >= 2 and shells:
        counts = np.array([[count_measure(X, (0.0, T), [n], K) for n in shells] for X in data.paths], dtype=float)
        ok = True
        for j, n in enumerate(shells):
            lam = T * nu.shell_mass(K, n)
            mean, var = counts[:, j].mean(), counts[:, j].var(ddof=1)
            z_mean = z_score(mean - lam, math.sqrt(lam / M))
            z_var = z_score(var - lam, math.sqrt((lam + 2 * lam * lam) / M))
            rep.counts.append({"shell": n, "intensity": lam, "mean": mean, "variance": var,
                               "z_mean": z_mean, "z_variance": z_var})
            ok &= abs(z_mean) <= tol and abs(z_var) <= tol
        for j in range(len(shells) - 1):
            r, z, deg = correlation_z(counts[:, j], counts[:, j + 1])
            rep.counts.append({"shells": [shells[j], shells[j + 1]], "correlation": r, "z_score": z,
                               "degenerate": deg})
            ok &= deg or abs(z) <= tol
        rep.checks.append(Check("counts", bool(ok), detail="N([0,T] x C_n) ~ Poisson(T nu(C_n))"))
    else:
        rep.checks.append(Check("counts", True, True, "no active shells or too few replicas"))

    # independence of J, L, Y
    if M >= 100:
        samples = {"J": np.array([j.value_at(T) for _, j, _ in parts]),
                   "L": np.array([l.value_at(T) for l, _, _ in parts]),
                   "Y": np.array([y.value_at(T) for _, _, y in parts])}
        stats = independence_stats(samples, ver.functionals)
        rep.independence = [s.to_dict() for s in stats]
        ok = True
        for tr in ("linear", "cos", "sin"):
            fam = [s for s in stats if s.transform == tr]
            ok &= _enough(sum(s.passed(tol) for s in fam), len(fam), frac)
        rep.checks.append(Check("independence", bool(ok), detail="pairwise correlations of J_T, L_T, Y_T"))
    else:
        rep.checks.append(Check("independence", True, True, "needs at least 100 replicas"))

    # Gaussianity of the residual
    if M >= 1000:
        Y = np.array([y.value_at(T) for _, _, y in parts])
        ok = True
        for a in ver.functionals[:5]:
            try:
                g = gaussianity_check(Y, a)
            except DegenerateVarianceError:
                rep.gaussianity.append({"functional": a.tolist(), "degenerate": True})
                continue
            rep.gaussianity.append({"functional": a.tolist(), **g.to_dict()})
            ok &= g.passed(tol)
        rep.checks.append(Check("gaussianity", bool(ok), detail="skewness and excess kurtosis of <Y_T, a>"))
    else:
        rep.checks.append(Check("gaussianity", True, True, "needs at least 1000 replicas"))

    # uniform convergence of the compensated series
    levels = sorted(set(ver.truncation_levels))
    if data.prms is not None and len(levels) >= 2:
        sq = {(lo, hi): [] for lo, hi in zip(levels[:-1], levels[1:])}
        tails = None
        for prm in data.prms:
            res = compensated_series(prm, nu, K, levels, grid)
            tails = res.tail_variance_bound
            for key, g in res.sup_gaps.items():
                sq[key].append(g * g)
        mean_sq = [float(np.mean(sq[k])) for k in sq]
        bounds = [tails[lo] for lo, _ in sq]
        rep.convergence = {"levels": levels, "pairs": [list(k) for k in sq], "sup_gaps": mean_sq,
                           "tail_bounds": bounds}
        ok = all(m <= 4 * b or m == 0 for m, b in zip(mean_sq, bounds))
        rep.checks.append(Check("convergence", ok, detail="mean sup gap^2 <= 4 x tail second moment"))
    else:
        rep.checks.append(Check("convergence", True, True, "needs PRM data and two truncation levels"))

    if ver.epsilon is not None and ver.truncation_levels:
        r = reducibility_check(nu, K, ver.epsilon, ver.truncation_levels, rng=functional_rng(cfg.seed + 1),
                               mc_samples=ver.mc_samples)
        rep.reducibility = r.to_dict()
    return rep


def reduce_check(cfg: ExperimentConfig) -> dict:
    ver = cfg.verification
    if ver is None or ver.epsilon is None or not ver.truncation_levels:
        raise ValueError("reduce-check needs verification.epsilon and verification.truncation_levels")
    r = reducibility_check(cfg.nu, cfg.disk, ver.epsilon, ver.truncation_levels,
                           rng=functional_rng(cfg.seed + 1), mc_samples=ver.mc_samples)
    return {"config_hash": cfg.config_hash(), "seed": cfg.seed, "reducibility": r.to_dict()}
