import json
import os
from dataclasses import dataclass

from dotenv import load_dotenv

"""
DEFAULT MAX STATES: states retained by one exploration
"""
DEFAULT_MAX_STATES = 100000
"""
DEFAULT MAX DEPTH: breadth-first layers explored
"""
DEFAULT_MAX_DEPTH = 10000
"""
DEFAULT MAX STEPS: transitions taken by one scheduled run
"""
DEFAULT_MAX_STEPS = 10000
"""
DEFAULT MAX BLOCKS: states accepted by one partition refinement
"""
DEFAULT_MAX_BLOCKS = 1000000


class DefcalError(Exception):
    """Base class for every error raised by defcal."""

    pass


class ParseFailure(DefcalError):
    """Raised when a source text does not parse. Carries every ParseError found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


class TypeCheckFailure(DefcalError):
    """Raised when a program is ill-typed. Carries the aggregated TypeErrors."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


class IntegrityError(DefcalError):
    """Exception raised for malformed runtime configurations."""

    pass


class InternalError(DefcalError):
    """Exception raised when an invariant that typing guarantees is broken at runtime."""

    pass


class TranslationError(DefcalError):
    """Exception raised when fwdElim cannot translate a program."""

    pass


class BisimulationError(DefcalError):
    """Exception raised when a bisimulation check exceeds its configured limits."""

    pass


@dataclass(frozen=True)
class Settings:
    max_states: int = DEFAULT_MAX_STATES
    max_depth: int = DEFAULT_MAX_DEPTH
    max_steps: int = DEFAULT_MAX_STEPS
    max_blocks: int = DEFAULT_MAX_BLOCKS


def _positive_int(name, raw, default):
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}")
    if value < 1:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def load_settings(dotenv_path=None):
    """
    Resolve exploration bounds from a .env file and the environment.

    Args:
        dotenv_path (str, optional):
            Path of the .env file to read. By default python-dotenv searches upwards from the working directory.

    Raises:
        ValueError: Raised if a DEFCAL_* variable is not a positive integer.

    Returns:
        Settings: the resolved bounds, falling back to the module defaults.
    """
    load_dotenv(dotenv_path=dotenv_path)
    return Settings(
        max_states=_positive_int("DEFCAL_MAX_STATES", os.environ.get("DEFCAL_MAX_STATES"), DEFAULT_MAX_STATES),
        max_depth=_positive_int("DEFCAL_MAX_DEPTH", os.environ.get("DEFCAL_MAX_DEPTH"), DEFAULT_MAX_DEPTH),
        max_steps=_positive_int("DEFCAL_MAX_STEPS", os.environ.get("DEFCAL_MAX_STEPS"), DEFAULT_MAX_STEPS),
        max_blocks=_positive_int("DEFCAL_MAX_BLOCKS", os.environ.get("DEFCAL_MAX_BLOCKS"), DEFAULT_MAX_BLOCKS),
    )


def canonical_dumps(data):
    """Serialize to the compact, key-sorted JSON form that digests are computed over."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))
