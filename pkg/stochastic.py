"""
Service Time Models and Seeded Samplers

Distribution specs for node service times, their exact moments, and a
reproducible sampler that draws the per-cycle service vector τ(k):
- Constant, Exponential and ScaledErlang per-node models
- CorrelatedExponential network-level model (mixed i.i.d. exponentials)
- One random stream per (replica, node), derived from a master seed
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, ClassVar, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special, stats

import config


logger = logging.getLogger(__name__)


def _unit_exponentials(rng: np.random.Generator, size) -> np.ndarray:
    """Inverse-CDF draws of mean-1 exponentials: -ln(1 - u)."""
    return -np.log1p(-rng.random(size))


def _check_keys(record: Dict[str, Any], allowed: Sequence[str]) -> None:
    unknown = sorted(set(record) - set(allowed))
    if unknown:
        raise ValueError(f"unknown keys {unknown} for type '{record.get('type')}'")
    missing = [key for key in allowed if key not in record]
    if missing:
        raise ValueError(f"missing keys {missing} for type '{record.get('type')}'")


def _as_number(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"'{key}' must be a number, got {value!r}")
    return float(value)


# ==============================================================================
# Per-node Distributions
# ==============================================================================

@dataclass(frozen=True)
class Constant:
    """Deterministic service time c >= 0."""
    value: float
    kind: ClassVar[str] = "constant"

    @property
    def mean(self) -> float:
        return self.value

    @property
    def variance(self) -> float:
        return 0.0

    def validate(self) -> None:
        if not np.isfinite(self.value) or self.value < 0:
            raise ValueError(f"constant service time must be >= 0, got {self.value}")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, float(self.value))

    def cdf(self, t: float) -> float:
        return 1.0 if t >= self.value else 0.0

    def isf(self, p: float) -> float:
        return float(self.value)

    def to_record(self) -> Dict[str, Any]:
        return {"type": self.kind, "value": self.value}


@dataclass(frozen=True)
class Exponential:
    """Exponential service time with the given mean."""
    mean: float
    kind: ClassVar[str] = "exponential"

    @property
    def variance(self) -> float:
        return self.mean ** 2

    def validate(self) -> None:
        if not np.isfinite(self.mean) or self.mean <= 0:
            raise ValueError(f"exponential mean must be > 0, got {self.mean}")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.mean * _unit_exponentials(rng, size)

    def frozen(self):
        return stats.expon(scale=self.mean)

    def cdf(self, t: float) -> float:
        return -math.expm1(-t / self.mean) if t > 0 else 0.0

    def isf(self, p: float) -> float:
        return float(self.frozen().isf(p))

    def to_record(self) -> Dict[str, Any]:
        return {"type": self.kind, "mean": self.mean}


@dataclass(frozen=True)
class ScaledErlang:
    """Erlang-r of unit rate divided by r: mean 1, variance 1/r."""
    shape: int
    kind: ClassVar[str] = "scaled-erlang"

    @property
    def mean(self) -> float:
        return 1.0

    @property
    def variance(self) -> float:
        return 1.0 / self.shape

    def validate(self) -> None:
        if isinstance(self.shape, bool) or not isinstance(self.shape, int) or self.shape < 1:
            raise ValueError(f"Erlang shape must be an integer >= 1, got {self.shape!r}")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return _unit_exponentials(rng, (size, self.shape)).sum(axis=1) / self.shape

    def frozen(self):
        return stats.gamma(a=self.shape, scale=1.0 / self.shape)

    def cdf(self, t: float) -> float:
        return float(special.gammainc(self.shape, self.shape * t)) if t > 0 else 0.0

    def isf(self, p: float) -> float:
        return float(self.frozen().isf(p))

    def to_record(self) -> Dict[str, Any]:
        return {"type": self.kind, "shape": self.shape}


Distribution = Union[Constant, Exponential, ScaledErlang]


# ==============================================================================
# Network-level Correlated Model
# ==============================================================================

@dataclass(frozen=True)
class CorrelatedExponential:
    """
    τ_i = Σ_j a_ij ξ_j with ξ_j i.i.d. exponential of mean 1,
    a_ii = a and a_ij = (1 - a)/(n - 1) otherwise, 1/n <= a <= 1.
    """
    a: float
    kind: ClassVar[str] = "correlated-exponential"

    def validate(self, n: int) -> None:
        if n < 2:
            if self.a != 1.0:
                raise ValueError(f"a single node admits only a = 1, got {self.a}")
            return
        if not (1.0 / n - 1e-12 <= self.a <= 1.0 + 1e-12):
            raise ValueError(f"mixing parameter a must lie in [1/{n}, 1], got {self.a}")

    def weights(self, n: int) -> Tuple[float, float]:
        """
        Decompose τ_i = c·ξ_i + d·(ξ_1 + ... + ξ_n).

        Returns:
            Tuple (c, d) with d = (1 - a)/(n - 1) and c = (n·a - 1)/(n - 1)
        """
        if n < 2:
            return 1.0, 0.0
        d = (1.0 - self.a) / (n - 1)
        # c = a - d, written so that a = 1/n gives c = 0 exactly
        c = max((n * self.a - 1.0) / (n - 1), 0.0)
        return c, d

    def mixing_matrix(self, n: int) -> np.ndarray:
        c, d = self.weights(n)
        return np.full((n, n), d) + np.eye(n) * c

    def to_record(self) -> Dict[str, Any]:
        return {"type": self.kind, "a": self.a}


_DISTRIBUTION_KEYS = {
    Constant.kind: ("type", "value"),
    Exponential.kind: ("type", "mean"),
    ScaledErlang.kind: ("type", "shape"),
}


def distribution_from_record(record: Dict[str, Any]) -> Distribution:
    """
    Parse a tagged record such as {"type": "exponential", "mean": 1.0}.

    Raises:
        ValueError: On unknown type, unknown or missing keys, or bad parameters
    """
    if not isinstance(record, dict):
        raise ValueError(f"service must be an object, got {record!r}")

    kind = record.get("type")
    if kind not in _DISTRIBUTION_KEYS:
        raise ValueError(f"unknown service type {kind!r}; expected one of "
                         f"{sorted(_DISTRIBUTION_KEYS)}")
    _check_keys(record, _DISTRIBUTION_KEYS[kind])

    if kind == Constant.kind:
        dist = Constant(_as_number(record["value"], "value"))
    elif kind == Exponential.kind:
        dist = Exponential(_as_number(record["mean"], "mean"))
    else:
        shape = record["shape"]
        if isinstance(shape, float) and shape.is_integer():
            shape = int(shape)
        dist = ScaledErlang(shape)

    dist.validate()
    return dist


def correlation_from_record(record: Dict[str, Any]) -> CorrelatedExponential:
    if not isinstance(record, dict) or record.get("type") != CorrelatedExponential.kind:
        raise ValueError(f"correlation block must have type '{CorrelatedExponential.kind}'")
    _check_keys(record, ("type", "a"))
    return CorrelatedExponential(_as_number(record["a"], "a"))


# ==============================================================================
# Moments
# ==============================================================================

def moments(spec) -> List[Tuple[float, float]]:
    """
    Exact (mean, variance) of each node's service time.

    Args:
        spec: Network spec (uses n, services and correlation)

    Returns:
        List of (mean, variance), one per node
    """
    if spec.correlation is not None:
        n = spec.n
        weights = spec.correlation.mixing_matrix(n)
        return [(float(weights[i].sum()), float((weights[i] ** 2).sum())) for i in range(n)]

    return [(float(d.mean), float(d.variance)) for d in spec.services]


# ==============================================================================
# Sampler
# ==============================================================================

class ServiceSampler:
    """
    Seeded source of per-cycle service vectors.

    Node i of replica r draws from its own PCG64 stream seeded by
    SeedSequence(seed, spawn_key=(r, i)); adding replicas or nodes never
    changes an existing stream. Under the correlated model stream j carries ξ_j.
    """

    def __init__(self, spec, seed: int, replica: int = 0, block_size: Optional[int] = None):
        """
        Initialize the sampler.

        Args:
            spec: Validated network spec
            seed: Master seed (nonnegative)
            replica: Replica index selecting the stream family
            block_size: Cycles drawn per refill (default from config)
        """
        if seed < 0:
            raise ValueError(f"seed must be nonnegative, got {seed}")

        self.spec = spec
        self.n = spec.n
        self.seed = seed
        self.replica = replica
        self.block_size = block_size or config.SIMULATION["block_size"]

        self._streams = [
            np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replica, node))))
            for node in range(self.n)
        ]
        self._block: List[List[float]] = []
        self._position = 0
        self._cycle = 0

    def with_replica(self, replica: int) -> "ServiceSampler":
        """Fresh sampler on another stream family of the same seed."""
        return ServiceSampler(self.spec, self.seed, replica, self.block_size)

    def sample_block(self, size: int) -> np.ndarray:
        """
        Draw service vectors for `size` cycles at once.

        Returns:
            Array of shape (size, n)
        """
        if self.spec.correlation is not None:
            xi = np.column_stack([_unit_exponentials(rng, size) for rng in self._streams])
            c, d = self.spec.correlation.weights(self.n)
            return c * xi + d * xi.sum(axis=1, keepdims=True)

        return np.column_stack([dist.draw(rng, size)
                                for dist, rng in zip(self.spec.services, self._streams)])

    def sample_cycle(self, k: int) -> List[float]:
        """
        Service vector τ(k) for cycle k.

        Args:
            k: Cycle number; cycles must be requested in order 1, 2, ...

        Returns:
            List of n nonnegative service times
        """
        if k != self._cycle + 1:
            raise ValueError(f"cycles must be drawn in order: expected {self._cycle + 1}, got {k}")

        if self._position >= len(self._block):
            self._block = self.sample_block(self.block_size).tolist()
            self._position = 0

        tau = self._block[self._position]
        self._position += 1
        self._cycle = k
        return tau
