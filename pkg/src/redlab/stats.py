"""Regenerative output analysis: cycle accumulation, ratio estimator, growth slope.

Long-run means are estimated over busy cycles (regeneration at arrivals to an
empty system), with a jackknife confidence interval over cycles. Runs that
never empty are judged by the least-squares growth slope of the total job
count instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import TooFewCycles, ValidationError

MIN_CYCLES = 30
WARMUP_FRACTION = 0.10
Z95 = 1.96


class Cycle(NamedTuple):
    """One busy cycle: integral of the job count over the cycle, and its length."""

    area: float
    duration: float


@dataclass
class CycleAccumulator:
    """Collects busy cycles from independent replications, keyed by stream id.

    Each replication writes only under its own stream id, so merging is a
    disjoint dict union: associative, commutative, and deterministic however
    replications finish.
    """

    cycles_by_stream: dict[int, list[Cycle]] = field(default_factory=dict)

    def add_cycle(self, stream_id: int, area: float, duration: float) -> None:
        if duration <= 0:
            raise ValidationError(f"cycle duration must be positive, got {duration}")
        self.cycles_by_stream.setdefault(stream_id, []).append(Cycle(area, duration))

    def merge(self, other: "CycleAccumulator") -> "CycleAccumulator":
        overlap = self.cycles_by_stream.keys() & other.cycles_by_stream.keys()
        if overlap:
            raise ValidationError(f"stream ids collected twice: {sorted(overlap)}")
        merged = dict(self.cycles_by_stream)
        merged.update(other.cycles_by_stream)
        return CycleAccumulator(merged)

    def cycles(self) -> list[Cycle]:
        """All cycles in canonical order (by stream id, then collection order)."""
        out: list[Cycle] = []
        for sid in sorted(self.cycles_by_stream):
            out.extend(self.cycles_by_stream[sid])
        return out

    def __len__(self) -> int:
        return sum(len(v) for v in self.cycles_by_stream.values())


def drop_warmup_cycles(cycles: Sequence[Cycle], fraction: float = WARMUP_FRACTION) -> list[Cycle]:
    """Discard the leading ``fraction`` of cycles (transient burn-in)."""
    skip = int(len(cycles) * fraction)
    return list(cycles[skip:])


def regenerative_mean(cycles: Iterable[Cycle | tuple[float, float]]) -> tuple[float, float]:
    """Ratio estimate of the long-run time average, with a 95% jackknife interval.

    The point estimate is total area / total duration. Leaving out one cycle
    at a time gives n resampled ratios; their spread yields the variance
    estimate (n-1)/n * sum((R_i - Rbar)^2).
    """
    cyc = [Cycle(*c) for c in cycles]
    n = len(cyc)
    if n < MIN_CYCLES:
        raise TooFewCycles(f"need at least {MIN_CYCLES} busy cycles, got {n}")
    areas = np.array([c.area for c in cyc])
    durs = np.array([c.duration for c in cyc])
    total_a = areas.sum()
    total_d = durs.sum()
    mean = total_a / total_d
    loo = (total_a - areas) / (total_d - durs)
    var = (n - 1) / n * float(np.sum((loo - loo.mean()) ** 2))
    return float(mean), Z95 * math.sqrt(max(var, 0.0))


def divergence_slope(samples: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of job count against time over the given samples."""
    if len(samples) < 2:
        return 0.0
    t = np.array([s[0] for s in samples])
    y = np.array([s[1] for s in samples])
    tc = t - t.mean()
    denom = float(np.dot(tc, tc))
    if denom == 0.0:
        return 0.0
    return float(np.dot(tc, y) / denom)


def batch_mean_ci(estimates: Sequence[float]) -> tuple[float, float]:
    """Mean and 95% halfwidth over independent batch estimates."""
    arr = np.asarray(estimates, dtype=float)
    n = arr.size
    if n < 2:
        return (float(arr.mean()) if n else math.nan, math.inf)
    return float(arr.mean()), Z95 * float(arr.std(ddof=1)) / math.sqrt(n)
