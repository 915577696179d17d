import os
from dataclasses import dataclass, replace
from typing import Optional

from dotenv import load_dotenv

from beliefnet.errors import ConfigError


@dataclass(frozen=True)
class SimulationSettings:
    """Numeric tolerances and runtime settings."""

    construction_tol: float = 1e-12
    belief_tol: float = 1e-9
    belief_floor: float = 1e-300
    classify_tol: float = 1e-9
    max_retries: int = 1000
    eig_tol: float = 1e-12
    eig_max_iter: int = 100_000
    bisection_tol: float = 1e-9
    replicates: int = 10
    workers: int = 1
    log_level: str = "INFO"
    seed: Optional[int] = None


# Default configuration
DEFAULT_SETTINGS = SimulationSettings()


def load_settings(base: SimulationSettings = DEFAULT_SETTINGS) -> SimulationSettings:
    """
    Applies environment overrides on top of the given settings.

    A local .env file is loaded first, so BELIEFNET_* variables can live there.

    Returns:
        SimulationSettings: settings with BELIEFNET_SEED, BELIEFNET_WORKERS,
        BELIEFNET_LOG_LEVEL and BELIEFNET_MAX_RETRIES applied.
    """
    load_dotenv()

    overrides = {}
    try:
        if seed := os.getenv("BELIEFNET_SEED"):
            overrides["seed"] = int(seed)
        if workers := os.getenv("BELIEFNET_WORKERS"):
            overrides["workers"] = max(1, int(workers))
        if retries := os.getenv("BELIEFNET_MAX_RETRIES"):
            overrides["max_retries"] = int(retries)
    except ValueError as e:
        raise ConfigError(f"invalid BELIEFNET_* environment value: {e}") from e
    if level := os.getenv("BELIEFNET_LOG_LEVEL"):
        overrides["log_level"] = level.upper()
    if overrides.get("seed", 0) < 0:
        raise ConfigError(f"BELIEFNET_SEED must be non-negative, got {overrides['seed']}")
    return replace(base, **overrides)
