"""Runtime configuration.

Environment variables (a ``.env`` file in the working directory is loaded
first):

- ``TYPEDCRF_SEED``: fallback seed for every command (default ``0``).
- ``TYPEDCRF_WORKERS``: default number of worker processes (default ``1``).
- ``TYPEDCRF_EXPERIMENTS``: YAML file with experiment presets.
"""

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml
from dotenv import load_dotenv

from .errors import InvalidArgumentError
from .factor_graph import AdmmSettings
from .learner import SsvmSettings

load_dotenv()

# -----------------------------------------------------------------------------
# Config variables
# -----------------------------------------------------------------------------
SEED_ENV_VAR = "TYPEDCRF_SEED"
WORKERS_ENV_VAR = "TYPEDCRF_WORKERS"
EXPERIMENTS_ENV_VAR = "TYPEDCRF_EXPERIMENTS"
DEFAULT_EXPERIMENTS_FILE = Path("app_data") / "experiments.yaml"


def _int_from_env(name, default):
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise InvalidArgumentError(f"{name} must be an integer, got {raw!r}") from exc


def default_seed():
    """Seed used when no ``--seed`` is given."""
    return _int_from_env(SEED_ENV_VAR, 0)


def default_workers():
    """Worker count used when no ``--workers`` is given."""
    return max(1, _int_from_env(WORKERS_ENV_VAR, 1))


@dataclass(frozen=True)
class LogisticSettings:
    """Hyper-parameters of the image-level logistic baseline."""

    epochs: int = 500
    rate: float = 0.5
    batch_size: int | None = None


@dataclass(frozen=True)
class ExperimentSettings:
    """Everything an experiment series needs besides its seed."""

    train_snakes: int = 200
    test_snakes: int = 100
    ssvm: SsvmSettings = field(default_factory=SsvmSettings)
    admm: AdmmSettings = field(default_factory=AdmmSettings)
    logistic: LogisticSettings = field(default_factory=LogisticSettings)
    scaling_sizes: tuple[int, ...] = (200, 400, 600, 800)
    scaling_runs: int = 10
    workers: int = 1
    snake_only_test: bool = False

    def with_seed(self, seed):
        """Return a copy whose SSVM and ADMM settings use ``seed``."""
        return replace(
            self,
            ssvm=replace(self.ssvm, seed=seed),
            admm=replace(self.admm, seed=seed),
        )


_NESTED = {"ssvm": SsvmSettings, "admm": AdmmSettings, "logistic": LogisticSettings}


def _build(cls, values, where):
    if not isinstance(values, dict):
        raise InvalidArgumentError(f"{where}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise InvalidArgumentError(f"{where}: unknown keys {', '.join(unknown)}")
    kwargs = {}
    for key, value in values.items():
        if key in _NESTED and cls is ExperimentSettings:
            value = _build(_NESTED[key], value, f"{where}.{key}")
        elif key == "scaling_sizes":
            value = tuple(int(v) for v in value)
        kwargs[key] = value
    return cls(**kwargs)


def experiments_file():
    """Preset file selected by the environment, if any exists."""
    configured = os.getenv(EXPERIMENTS_ENV_VAR)
    if configured:
        return Path(configured)
    if DEFAULT_EXPERIMENTS_FILE.exists():
        return DEFAULT_EXPERIMENTS_FILE
    return None


def load_experiment_settings(path=None, preset="default"):
    """Read ``preset`` from a YAML preset file.

    Without a file the dataclass defaults are returned.
    """
    path = Path(path) if path is not None else experiments_file()
    settings = ExperimentSettings(workers=default_workers())
    if path is None:
        return settings
    with path.open(encoding="utf-8") as f:
        raw = yaml.safe_load(f) or {}
    if preset not in raw:
        raise InvalidArgumentError(f"{path}: no preset named {preset!r}")
    values = dict(raw[preset] or {})
    values.setdefault("workers", settings.workers)
    return _build(ExperimentSettings, values, f"{path}:{preset}")
