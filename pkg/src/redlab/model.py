"""Core model objects: system configuration, type enumeration, service laws, RNG plumbing.

A job arriving to the K-server system draws a type uniformly at random among
all d-subsets of servers and places one copy on each server of the type.
Everything downstream (simulation engine, saturated throughput, fluid drifts)
builds on the enumeration and bookkeeping defined here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DimensionError, ValidationError

# Hard cap on K for exhaustive type enumeration. comb(20, 10) = 184756 types
# is still fine; beyond that the dense per-type bookkeeping stops being honest.
MAX_SERVERS = 20

# Stable integer codes for named RNG substreams. Changing these changes every
# seeded result, so they are append-only.
_STREAM_CATEGORIES = {
    "arrivals": 0,
    "types": 1,
    "services": 2,
    "ros": 3,
    "lb": 4,
}


class CopyMode(str, Enum):
    """How the d copies of one job relate to each other."""

    IID = "iid"
    IDENTICAL = "identical"


class ServiceDist:
    """Base class for service requirement distributions."""

    def mean(self) -> float:
        raise NotImplementedError

    def scv(self) -> float:
        """Squared coefficient of variation, var / mean^2."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(ServiceDist):
    rate: float = 1.0

    def __post_init__(self):
        if self.rate <= 0:
            raise ValidationError(f"exponential rate must be positive, got {self.rate}")

    def mean(self) -> float:
        return 1.0 / self.rate

    def scv(self) -> float:
        return 1.0

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class Deterministic(ServiceDist):
    value: float = 1.0

    def __post_init__(self):
        if self.value <= 0:
            raise ValidationError(f"deterministic service must be positive, got {self.value}")

    def mean(self) -> float:
        return self.value

    def scv(self) -> float:
        return 0.0

    def sample(self, rng, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)


@dataclass(frozen=True)
class DegenerateHyperExp(ServiceDist):
    """Zero requirement with probability 1-p, else exponential with rate p*rate.

    Mean is 1/rate regardless of p; the squared coefficient of variation is
    2/p - 1, so small p makes the law extremely variable while keeping the
    load fixed. p = 1 recovers the plain exponential.
    """

    rate: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        if self.rate <= 0:
            raise ValidationError(f"rate must be positive, got {self.rate}")
        if not 0.0 < self.p <= 1.0:
            raise ValidationError(f"branch probability must lie in (0, 1], got {self.p}")

    def mean(self) -> float:
        return 1.0 / self.rate

    def scv(self) -> float:
        return 2.0 / self.p - 1.0

    def sample(self, rng, size=None):
        scale = 1.0 / (self.rate * self.p)
        if size is None:
            return rng.exponential(scale) if rng.random() < self.p else 0.0
        draws = rng.exponential(scale, size)
        keep = rng.random(size) < self.p
        return np.where(keep, draws, 0.0)


def sample_service(dist: ServiceDist, rng: np.random.Generator, size=None):
    """Draw service requirements from ``dist`` using ``rng``."""
    return dist.sample(rng, size)


@dataclass(frozen=True)
class TypeTable:
    """Exhaustive enumeration of the d-subsets of K servers, in lexicographic order.

    ``types[i]`` is the i-th subset as a sorted tuple of server indices,
    ``masks[i]`` the same subset as a bitmask, and ``types_of_server[s]``
    the ids of all types containing server s.
    """

    K: int
    d: int
    types: tuple[tuple[int, ...], ...]
    masks: tuple[int, ...]
    types_of_server: tuple[tuple[int, ...], ...]
    index: dict[tuple[int, ...], int] = field(repr=False)

    @property
    def n_types(self) -> int:
        return len(self.types)

    @property
    def types_per_server(self) -> int:
        return math.comb(self.K - 1, self.d - 1)

    def type_arrival_rate(self, lam: float) -> float:
        """Poisson rate seen by each individual type."""
        return lam / self.n_types

    def id_of(self, servers: Sequence[int]) -> int:
        return self.index[tuple(sorted(servers))]


def build_type_table(K: int, d: int) -> TypeTable:
    """Enumerate all d-subsets of {0, ..., K-1} and index them both ways.

    Raises DimensionError when K exceeds the enumeration cap, ValidationError
    when d is out of range.
    """
    if K < 1:
        raise ValidationError(f"need at least one server, got K={K}")
    if K > MAX_SERVERS:
        raise DimensionError(
            f"exhaustive type enumeration is capped at K={MAX_SERVERS}, got K={K}"
        )
    if not 1 <= d <= K:
        raise ValidationError(f"copy count requires 1 <= d <= K, got d={d}, K={K}")
    types = tuple(itertools.combinations(range(K), d))
    masks = tuple(sum(1 << s for s in t) for t in types)
    by_server: list[list[int]] = [[] for _ in range(K)]
    for i, t in enumerate(types):
        for s in t:
            by_server[s].append(i)
    return TypeTable(
        K=K,
        d=d,
        types=types,
        masks=masks,
        types_of_server=tuple(tuple(v) for v in by_server),
        index={t: i for i, t in enumerate(types)},
    )


@dataclass(frozen=True)
class SystemConfig:
    """Full description of one redundancy-d system.

    Speeds are per-server service speeds; a copy with requirement b completes
    after b / speed units of dedicated service. ``seed`` and ``replications``
    ride along so a parsed experiment file is self-contained.
    """

    K: int
    d: int
    lam: float
    mu: float = 1.0
    speeds: tuple[float, ...] | None = None
    copy_mode: CopyMode = CopyMode.IID
    policy: str = "fcfs"
    service: ServiceDist | None = None
    seed: int = 12345
    replications: int = 1

    def __post_init__(self):
        if self.K < 1 or self.K > MAX_SERVERS:
            raise ValidationError(f"server count must lie in 1..{MAX_SERVERS}, got {self.K}")
        if not 1 <= self.d <= self.K:
            raise ValidationError(f"copy count requires 1 <= d <= K, got d={self.d}, K={self.K}")
        if self.lam <= 0:
            raise ValidationError(f"arrival rate must be positive, got {self.lam}")
        if self.mu <= 0:
            raise ValidationError(f"service rate must be positive, got {self.mu}")
        if self.speeds is None:
            object.__setattr__(self, "speeds", tuple(1.0 for _ in range(self.K)))
        else:
            object.__setattr__(self, "speeds", tuple(float(v) for v in self.speeds))
        if len(self.speeds) != self.K:
            raise ValidationError(
                f"need one speed per server: got {len(self.speeds)} for K={self.K}"
            )
        if any(v <= 0 for v in self.speeds):
            raise ValidationError("server speeds must be positive")
        if self.service is None:
            object.__setattr__(self, "service", Exponential(self.mu))
        if self.replications < 1:
            raise ValidationError(f"replications must be >= 1, got {self.replications}")

    @property
    def homogeneous(self) -> bool:
        return len(set(self.speeds)) == 1

    def type_table(self) -> TypeTable:
        return build_type_table(self.K, self.d)


def effective_load(config: SystemConfig) -> float:
    """Arrival rate over total service capacity, lam / (mu * sum of speeds)."""
    return config.lam / (config.mu * sum(config.speeds))


@dataclass(frozen=True)
class RngSpec:
    """Names one reproducible random stream: (master seed, replication stream id).

    Each consumer category gets its own child generator so that, e.g., adding
    an extra service draw never shifts the arrival process.
    """

    master_seed: int = 12345
    stream_id: int = 0

    def substream(self, category: str) -> np.random.Generator:
        try:
            code = _STREAM_CATEGORIES[category]
        except KeyError:
            raise ValidationError(
                f"unknown stream category {category!r}; known: {sorted(_STREAM_CATEGORIES)}"
            ) from None
        seq = np.random.SeedSequence((self.master_seed, self.stream_id, code))
        return np.random.Generator(np.random.PCG64(seq))
