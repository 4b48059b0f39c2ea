"""Experiment configuration: JSON schema, fixtures, and model construction."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List

import numpy as np

from . import linalg as la
from .errors import ConfigError, UnknownFixture
from .semigroup import DbcLindbladian, JumpTerm, build_from_jumps, depolarizing, random_dbc

DEFAULT_P_GRID = [1.05, 1.1, 1.25, 1.5, 1.75, 2.0]
DEFAULT_Q_GRID = [1.2, 1.5, 1.8]
DEFAULT_TOLERANCES = {
    "hard": 1e-4,
    "soft": 1e-3,
    "w_discretization": 0.02,
}
ALL_TASKS = ["constants", "decay", "mixing", "transport", "ricci", "verify"]


@dataclass
class ExperimentConfig:
    dimension: int = 2
    sigma: Dict = field(default_factory=lambda: {"eigenvalues": [0.75, 0.25]})
    generator: Dict = field(default_factory=lambda: {"kind": "depolarizing", "gamma": 1.0})
    p_grid: List[float] = field(default_factory=lambda: list(DEFAULT_P_GRID))
    q_grid: List[float] = field(default_factory=lambda: list(DEFAULT_Q_GRID))
    tolerances: Dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seeds: Dict = field(default_factory=lambda: {"master": 7, "starts": 0})
    tasks: List[str] = field(default_factory=lambda: ["constants"])
    num_starts: int = 32
    transport_steps: int = 20
    transport_tol: float = 1e-7
    ricci_samples: int = 16
    epsilons: List[float] = field(default_factory=lambda: [0.1, 0.01])

    def to_dict(self) -> Dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_FIELDS = set(ExperimentConfig().to_dict().keys())


def config_from_dict(data: Dict) -> ExperimentConfig:
    unknown = set(data.keys()) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**data)
    if cfg.dimension < 1:
        raise ConfigError("dimension must be >= 1")
    for t in cfg.tasks:
        if t not in ALL_TASKS:
            raise ConfigError(f"unknown task {t!r} (choose from {ALL_TASKS})")
    for p in cfg.p_grid:
        if not 1.0 < p <= 2.0:
            raise ConfigError(f"p_grid entry {p} outside (1, 2]")
    for q in cfg.q_grid:
        if not 1.0 <= q < 2.0:
            raise ConfigError(f"q_grid entry {q} outside [1, 2)")
    return cfg


def config_from_json(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: line {exc.lineno}: {exc.msg}")
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(data)


def build_sigma(cfg: ExperimentConfig) -> np.ndarray:
    spec = cfg.sigma
    eigs = np.asarray(spec.get("eigenvalues", []), dtype=float)
    if eigs.size != cfg.dimension:
        raise ConfigError(
            f"sigma has {eigs.size} eigenvalues for dimension {cfg.dimension}")
    if abs(eigs.sum() - 1.0) > 1e-10 or np.min(eigs) <= 0:
        raise ConfigError("sigma eigenvalues must be positive and sum to 1")
    sigma = np.diag(eigs.astype(complex))
    if "basis" in spec and spec["basis"] is not None:
        U = la.matrix_from_json(spec["basis"])
        if la.frob(U @ U.conj().T - np.eye(cfg.dimension)) > 1e-10:
            raise ConfigError("sigma basis must be unitary")
        sigma = U @ sigma @ U.conj().T
    return sigma


def build_generator(cfg: ExperimentConfig) -> DbcLindbladian:
    sigma = build_sigma(cfg)
    spec = cfg.generator
    kind = spec.get("kind")
    if kind == "depolarizing":
        return depolarizing(sigma, float(spec.get("gamma", 1.0)))
    if kind == "jumps":
        jumps = [JumpTerm(la.matrix_from_json(j["V"]), float(j["omega"]))
                 for j in spec.get("list", [])]
        return build_from_jumps(sigma, jumps)
    if kind == "random_dbc":
        return random_dbc(sigma, int(spec.get("pairs", cfg.dimension)),
                          int(spec.get("diag", 1)), int(spec.get("seed", 0)))
    raise ConfigError(f"unknown generator kind {kind!r}")


def fixtures(name: str) -> ExperimentConfig:
    """Canonical configurations used by the acceptance suite."""
    if name == "depol2":
        return ExperimentConfig(
            dimension=2, sigma={"eigenvalues": [0.75, 0.25]},
            generator={"kind": "depolarizing", "gamma": 1.0},
            tasks=list(ALL_TASKS))
    if name == "depol3":
        return ExperimentConfig(
            dimension=3, sigma={"eigenvalues": [0.5, 1.0 / 3.0, 1.0 / 6.0]},
            generator={"kind": "depolarizing", "gamma": 1.0},
            tasks=list(ALL_TASKS))
    if name == "random_dbc_seeded":
        return ExperimentConfig(
            dimension=3, sigma={"eigenvalues": [0.5, 0.3, 0.2]},
            generator={"kind": "random_dbc", "pairs": 3, "diag": 1, "seed": 42},
            tasks=["constants", "verify"])
    if name == "classical_embed":
        # the flat qubit depolarizing semigroup realizes the symmetric
        # two-point chain (theta = 1/2) through the classical reduction
        return ExperimentConfig(
            dimension=2, sigma={"eigenvalues": [0.5, 0.5]},
            generator={"kind": "depolarizing", "gamma": 1.0},
            tasks=["constants"])
    raise UnknownFixture(name)
