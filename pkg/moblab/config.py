import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Mapping, Optional

from loguru import logger

from moblab import utils
from moblab.constants import (
    BUDGET_TERMS,
    DEFAULT_SEGMENT_SIZE,
    EPS,
    MAX_SEGMENT_ENTRIES,
    MIN_PREC_BITS,
    default_c1,
)
from moblab.exceptions import ConfigError
from moblab.phase import PhaseReal

ENV_PREFIX = "MOBLAB_"
ENV_KEYS = ("threads", "prec_bits")


@dataclass(frozen=True)
class GlobalConfig:
    """
    Settings shared by every subcommand.

    Sources apply in increasing priority: the defaults below, a JSON
    or YAML file, the MOBLAB_THREADS / MOBLAB_PREC_BITS environment
    variables, and finally explicit overrides (the CLI flags).

    Parameters
    ----------
    prec_bits : int, optional
        Fractional bits kept for irrational phases; None means the
        smallest value meeting the precision contract for each call
    budget_terms : int
        Largest number of terms any single sum or sweep may touch
    c1 : float, optional
        Exponent in P = (log x)^c1; None means 8(k + 1)
    eps : float
        Exponent slack in the twisted-sum bound
    threads : int
        Worker processes for sieving, character sums and sweeps
    """
    prec_bits: Optional[int] = None
    budget_terms: int = BUDGET_TERMS
    c1: Optional[float] = None
    eps: float = EPS
    threads: int = 1
    segment_size: int = DEFAULT_SEGMENT_SIZE
    max_segment_entries: int = MAX_SEGMENT_ENTRIES

    def __post_init__(self):
        if self.prec_bits is not None and self.prec_bits < MIN_PREC_BITS:
            raise ConfigError(f"prec_bits must be >= {MIN_PREC_BITS}, got {self.prec_bits}.")
        if self.budget_terms < 1:
            raise ConfigError(f"budget_terms must be >= 1, got {self.budget_terms}.")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}.")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}.")
        if self.c1 is not None and self.c1 < 0:
            raise ConfigError(f"c1 must be non-negative, got {self.c1}.")
        if self.segment_size < 1 or self.max_segment_entries < 1:
            raise ConfigError("Segment sizes must be positive.")

    @classmethod
    def from_dict(cls, data: Mapping) -> "GlobalConfig":
        known = {field.name: field.type for field in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys {sorted(unknown)}.")
        try:
            return cls(**{key: _coerce(key, value) for key, value in data.items()})
        except (TypeError, ValueError) as error:
            if isinstance(error, ConfigError):
                raise
            raise ConfigError(f"Invalid configuration: {error}")

    @classmethod
    def from_file(cls, path: str) -> "GlobalConfig":
        return cls.from_dict(utils.load_mapping(path))

    @classmethod
    def load(cls, path: Optional[str] = None, environ: Optional[Mapping] = None,
             **overrides) -> "GlobalConfig":
        """
        Assemble a configuration from every source; overrides that are
        None are ignored so unset CLI flags fall through.
        """
        config = cls.from_file(path) if path else cls()
        environ = os.environ if environ is None else environ
        from_env = {
            key: environ[ENV_PREFIX + key.upper()]
            for key in ENV_KEYS
            if environ.get(ENV_PREFIX + key.upper())
        }
        if from_env:
            logger.debug(f"Configuration from environment: {from_env}")
        config = config.updated(**from_env)
        return config.updated(**{key: value for key, value in overrides.items() if value is not None})

    def updated(self, **changes) -> "GlobalConfig":
        if not changes:
            return self
        merged = {**asdict(self), **changes}
        return type(self).from_dict(merged)

    def c1_for(self, k: int) -> float:
        return default_c1(k) if self.c1 is None else float(self.c1)

    def prec_bits_for(self, x, y, k: int) -> int:
        """ Configured precision, raised to the contract minimum for (x, y, k). """
        required = PhaseReal.required_bits(x, y, k)
        if self.prec_bits is None:
            return required
        return max(int(self.prec_bits), required)

    def to_dict(self) -> dict:
        return asdict(self)


def _coerce(key: str, value):
    if value is None:
        return None
    if key in ("c1", "eps"):
        return float(value)
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}.")
