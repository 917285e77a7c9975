"""Experiment configuration: YAML with a fixed schema and strict key checking.

Schema (``?`` marks optional keys)::

    space:           {dim, weights?}
    disk:            {radii}
    characteristics:
      gamma: [d floats]
      Q: [[d x d floats]]
      levy:
        kind: zero | atomic | radial_shell
        atoms?, masses?                              # atomic
        c?, alpha?, tail_mass?, outer_radius?,
        directions?, direction_weights?              # radial_shell
    time:            {horizon, grid_steps}
    simulation:      {replicas, seed, shell_cutoff}
    verification?:
      functionals: count or list of d-vectors
      functional_scale?, epsilon?, truncation_levels?, tolerance_z?,
      pass_fraction?, cf_times?, mc_samples?
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .charfn import Characteristics
from .measure import AtomicMeasure, LevyMeasure, RadialShellMeasure
from .space import BanachDisk, SpaceModel


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "space": ({"dim"}, {"weights"}),
    "disk": ({"radii"}, set()),
    "characteristics": ({"gamma", "Q", "levy"}, set()),
    "time": ({"horizon", "grid_steps"}, set()),
    "simulation": ({"replicas", "seed", "shell_cutoff"}, set()),
    "verification": ({"functionals"}, {"functional_scale", "epsilon", "truncation_levels", "tolerance_z",
                                       "pass_fraction", "cf_times", "mc_samples"}),
}
_LEVY_KEYS = {
    "zero": set(),
    "atomic": {"atoms", "masses"},
    "radial_shell": {"c", "alpha", "tail_mass", "outer_radius", "directions", "direction_weights"},
}
_DATA_SECTIONS = ("space", "disk", "characteristics", "time", "simulation")


def _check_keys(section: str, got: dict, required: set, optional: set):
    if not isinstance(got, dict):
        raise ConfigError(f"[{section}] must be a mapping")
    unknown = set(got) - required - optional
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {sorted(unknown)}")
    missing = required - set(got)
    if missing:
        raise ConfigError(f"[{section}] missing keys: {sorted(missing)}")


def _vec(x, d: int, what: str) -> np.ndarray:
    try:
        v = np.asarray(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: not numeric") from exc
    if v.shape != (d,):
        raise ConfigError(f"{what}: expected {d} entries, got shape {v.shape}")
    return v


@dataclass
class Verification:
    functionals: np.ndarray
    epsilon: float | None
    truncation_levels: list[int]
    tolerance_z: float
    pass_fraction: float
    cf_times: list[float]
    mc_samples: int


@dataclass
class ExperimentConfig:
    raw: dict
    space: SpaceModel
    disk: BanachDisk
    characteristics: Characteristics
    horizon: float
    grid_steps: int
    replicas: int
    seed: int
    shell_cutoff: int
    verification: Verification | None

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def nu(self) -> LevyMeasure:
        return self.characteristics.nu

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.grid_steps + 1)

    def config_hash(self) -> str:
        """SHA-256 over the sections that determine the simulated data."""
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    payload = {k: raw[k] for k in _DATA_SECTIONS if k in raw}
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _build_measure(levy: dict, d: int, disk: BanachDisk) -> LevyMeasure:
    if not isinstance(levy, dict) or "kind" not in levy:
        raise ConfigError("[characteristics.levy] needs a 'kind'")
    kind = levy["kind"]
    if kind not in _LEVY_KEYS:
        raise ConfigError(f"[characteristics.levy] unknown kind {kind!r}")
    params = {k: v for k, v in levy.items() if k != "kind"}
    unknown = set(params) - _LEVY_KEYS[kind]
    if unknown:
        raise ConfigError(f"[characteristics.levy] unknown keys for {kind}: {sorted(unknown)}")
    try:
        if kind == "zero":
            return AtomicMeasure.zero(d)
        if kind == "atomic":
            atoms = np.asarray(params.get("atoms", []), dtype=float).reshape(-1, d)
            masses = np.asarray(params.get("masses", []), dtype=float)
            return AtomicMeasure(atoms, masses, dim=d)
        return RadialShellMeasure(disk, **params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[characteristics.levy] {exc}") from exc


def parse_config(raw: dict, seed: int | None = None, replicas: int | None = None) -> ExperimentConfig:
    """Validate a raw mapping; ``seed``/``replicas`` override the file."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    raw = copy.deepcopy(raw)
    unknown = set(raw) - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown top-level sections: {sorted(unknown)}")
    for section in _DATA_SECTIONS:
        if section not in raw:
            raise ConfigError(f"missing section [{section}]")
    for section, body in raw.items():
        _check_keys(section, body, *_SCHEMA[section])
    if seed is not None:
        raw["simulation"]["seed"] = int(seed)
    if replicas is not None:
        raw["simulation"]["replicas"] = int(replicas)

    d = raw["space"]["dim"]
    if not isinstance(d, int) or d < 1:
        raise ConfigError("[space] dim must be a positive integer")
    try:
        space = SpaceModel(d, raw["space"].get("weights"))
        disk = BanachDisk(_vec(raw["disk"]["radii"], d, "[disk] radii"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    ch = raw["characteristics"]
    gamma = _vec(ch["gamma"], d, "[characteristics] gamma")
    Q = np.asarray(ch["Q"], dtype=float)
    nu = _build_measure(ch["levy"], d, disk)
    try:
        chars = Characteristics(gamma, Q, nu, disk)
    except ValueError as exc:
        raise ConfigError(f"[characteristics] {exc}") from exc

    tm = raw["time"]
    horizon = float(tm["horizon"])
    if not horizon > 0:
        raise ConfigError("[time] horizon must be positive")
    if not isinstance(tm["grid_steps"], int) or tm["grid_steps"] < 1:
        raise ConfigError("[time] grid_steps must be a positive integer")
    sim = raw["simulation"]
    for key in ("replicas", "seed", "shell_cutoff"):
        if not isinstance(sim[key], int) or isinstance(sim[key], bool):
            raise ConfigError(f"[simulation] {key} must be an integer")
    if sim["replicas"] < 1:
        raise ConfigError("[simulation] replicas must be at least 1")
    if sim["seed"] < 0:
        raise ConfigError("[simulation] seed must be nonnegative")
    if sim["shell_cutoff"] < 1:
        raise ConfigError("[simulation] shell_cutoff must be at least 1")

    ver = None
    if "verification" in raw:
        ver = _parse_verification(raw["verification"], d, horizon, tm["grid_steps"], sim["seed"], sim["shell_cutoff"])
    return ExperimentConfig(raw, space, disk, chars, horizon, tm["grid_steps"], sim["replicas"], sim["seed"],
                            sim["shell_cutoff"], ver)


def functional_rng(seed: int) -> np.random.Generator:
    # spawn key length differs from the replica streams, so no collision
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0xF0,)))


def _parse_verification(v: dict, d: int, horizon: float, steps: int, seed: int, cutoff: int) -> Verification:
    f = v["functionals"]
    scale = float(v.get("functional_scale", 1.0))
    if isinstance(f, int) and not isinstance(f, bool):
        if f < 1:
            raise ConfigError("[verification] functional count must be positive")
        funcs = scale * functional_rng(seed).standard_normal((f, d))
    else:
        funcs = np.asarray(f, dtype=float)
        if funcs.ndim != 2 or funcs.shape[1] != d or funcs.shape[0] < 1:
            raise ConfigError(f"[verification] functionals must be a count or a list of {d}-vectors")
    eps = v.get("epsilon")
    if eps is not None and not 0 < float(eps) < 1:
        raise ConfigError("[verification] epsilon must lie in (0, 1)")
    levels = [int(x) for x in v.get("truncation_levels", [])]
    if any(n < 1 or n > cutoff for n in levels):
        raise ConfigError(f"[verification] truncation levels must lie in 1..{cutoff}")
    tol = float(v.get("tolerance_z", 4.0))
    frac = float(v.get("pass_fraction", 0.9))
    if not tol > 0 or not 0 < frac <= 1:
        raise ConfigError("[verification] tolerance_z > 0 and pass_fraction in (0, 1] required")
    grid = np.linspace(0.0, horizon, steps + 1)
    times = [float(t) for t in v.get("cf_times", [horizon])]
    for t in times:
        if not np.any(np.isclose(grid, t, rtol=0, atol=1e-12)) or t <= 0:
            raise ConfigError(f"[verification] cf time {t} is not a positive grid time")
    mc = int(v.get("mc_samples", 20_000))
    return Verification(funcs, None if eps is None else float(eps), levels, tol, frac, times, mc)


def load_config(path, seed: int | None = None, replicas: int | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    return parse_config(raw, seed=seed, replicas=replicas)
