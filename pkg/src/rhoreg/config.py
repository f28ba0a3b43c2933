"""Experiment configuration: a single human-editable YAML file."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .risk import ESTIMATOR_IDS
from .scenarios import SCENARIO_IDS

DEFAULT_ESTIMATORS = ["rho", "mle", "median"]


@dataclass
class ExperimentConfig:
    """Validated contents of a simulation config file.

    ``overrides`` tunes the stack: keys ``n``, ``max_evals``, ``population``,
    ``sigma0``, ``restarts``, ``early_stop``, ``max_iters``, ``holder_alpha``,
    ``holder_M``.  ``parallelism`` 0 means all cores; the RHOREG_JOBS
    environment variable overrides it.
    """

    master_seed: int = 20_260_809
    output_dir: str = "reports"
    replications: int = 100
    quadrature_n: int = 10_000
    parallelism: int = 1
    scenarios: list[str] = field(default_factory=lambda: list(SCENARIO_IDS[:-1]))
    estimators: list[str] = field(default_factory=lambda: list(DEFAULT_ESTIMATORS))
    overrides: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        for sid in self.scenarios:
            if sid not in SCENARIO_IDS:
                raise ConfigError(
                    f"unknown scenario '{sid}'; expected one of {SCENARIO_IDS}"
                )
        for est in self.estimators:
            if est not in ESTIMATOR_IDS:
                raise ConfigError(
                    f"unknown estimator '{est}'; expected one of {ESTIMATOR_IDS}"
                )
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.quadrature_n < 1:
            raise ConfigError("quadrature_n must be >= 1")
        known = {
            "n", "max_evals", "population", "sigma0", "restarts",
            "early_stop", "max_iters", "holder_alpha", "holder_M",
        }
        unknown = set(self.overrides) - known
        if unknown:
            raise ConfigError(f"unknown override keys: {sorted(unknown)}")
        return self


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    allowed = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    try:
        cfg = ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg.validate()
