"""Small input-validation helpers used by the public entry points."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import ConfigError


def check_rng(seed) -> np.random.Generator:
    """Turn ``None``, an int, a SeedSequence or a Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    if isinstance(seed, (list, tuple)):
        return np.random.default_rng(list(seed))
    raise ConfigError(f"cannot build a random generator from {seed!r}")


def check_probability(value, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_nonnegative(value, name: str) -> float:
    if value < 0:
        raise ConfigError(f"{name} must be non-negative, got {value}")
    return value


def derive_seed(base_seed: int, *index: int) -> int:
    """Child seed for sweep point ``index`` of a run seeded with ``base_seed``."""
    seq = np.random.SeedSequence([int(base_seed), *map(int, index)])
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
