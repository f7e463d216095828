"""Small input-validation helpers shared by configs and estimators."""

import numbers

import numpy as np


class ConfigError(ValueError):
    """Raised for invalid or unparsable configuration values."""


def check_probability(name, value):
    if not isinstance(value, numbers.Real) or not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name}={value!r} out of range; legal range is [0, 1]")
    return float(value)


def check_nonnegative(name, value):
    if not isinstance(value, numbers.Real) or value < 0:
        raise ConfigError(f"{name}={value!r} out of range; legal range is [0, inf)")
    return value


def check_positive(name, value):
    if not isinstance(value, numbers.Real) or value <= 0:
        raise ConfigError(f"{name}={value!r} out of range; legal range is (0, inf)")
    return value


def check_int(name, value, low=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < low:
        raise ConfigError(f"{name}={value!r} out of range; legal range is integers >= {low}")
    return int(value)


def check_open_unit(name, value, closed_right=False):
    ok = isinstance(value, numbers.Real) and 0.0 < value and (
        value <= 1.0 if closed_right else value < 1.0)
    if not ok:
        rng = "(0, 1]" if closed_right else "(0, 1)"
        raise ConfigError(f"{name}={value!r} out of range; legal range is {rng}")
    return float(value)


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``.

    Accepts None, an int, a ``SeedSequence`` or an existing Generator (returned as is).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
