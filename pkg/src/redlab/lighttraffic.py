"""Low-load expansions of the mean job count, and an independent integral oracle.

The closed forms expand E|N| to second order in the arrival rate for FCFS,
ROS and PS with identical copies. The oracle re-derives the quadratic
coefficient numerically from the conditional-sojourn case analysis (tagged
job plus at most one interfering job of the same type), so the two routes
check each other rather than sharing algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .policies import PolicyId

MIN_ORACLE_SAMPLES = 1_000_000


@dataclass(frozen=True)
class LtResult:
    policy: PolicyId
    K: int
    d: int
    lam: float
    mu: float
    mean_jobs_lt: float
    optimal_d: int


def _check_kd(K: int, d: int) -> None:
    if K < 1 or not 1 <= d <= K:
        raise ValidationError(f"need 1 <= d <= K, got d={d}, K={K}")


def lt_mean_jobs(policy: PolicyId, K: int, d: int, lam: float, mu: float) -> float:
    """Second-order low-load approximation of the mean number of jobs.

    FCFS and ROS share one quadratic coefficient, PS has a smaller one; both
    shrink with the number of distinct types since only a same-type arrival
    can interfere at low load.
    """
    _check_kd(K, d)
    if lam <= 0 or mu <= 0:
        raise ValidationError("rates must be positive")
    base = lam / mu
    quad = (lam / mu) ** 2 / math.comb(K, d)
    if policy in (PolicyId.FCFS, PolicyId.ROS):
        return base + 1.5 * quad
    if policy is PolicyId.PS:
        return base + quad
    raise ValidationError(f"no low-load expansion for policy {policy}")


def lt_result(policy: PolicyId, K: int, d: int, lam: float, mu: float) -> LtResult:
    return LtResult(
        policy=policy,
        K=K,
        d=d,
        lam=lam,
        mu=mu,
        mean_jobs_lt=lt_mean_jobs(policy, K, d, lam, mu),
        optimal_d=optimal_redundancy(K),
    )


def _sojourn_fcfs(t, b, b1):
    """Tagged job's sojourn given one same-type job arriving at time t.

    Before -b1 the other job is gone by time 0; in [-b1, 0] its remainder
    t + b1 must drain first; after 0 it queues behind the tagged job.
    """
    mid = (t >= -b1) & (t <= 0.0)
    return np.where(mid, t + b1 + b, b)


def _sojourn_ps(t, b, b1):
    """Same-type interference under processor sharing, from the case split on
    arrival order and which job exits first. Outside [-b1, b] there is no
    overlap and the sojourn is just b."""
    out = np.full_like(t, np.nan)
    small = b <= b1

    c1 = t <= -b1
    c2 = small & (t >= -b1) & (t <= -b1 + b)
    c3 = small & (t >= -b1 + b) & (t <= 0.0)
    c4 = ~small & (t >= -b1) & (t <= 0.0)
    c5 = ~small & (t >= 0.0) & (t <= b - b1)
    c6 = ~small & (t >= b - b1) & (t <= b)
    c7 = small & (t >= 0.0) & (t <= b)
    c8 = t >= b

    out = np.where(c1, b, out)
    out = np.where(c2, b + b1 + t, out)
    out = np.where(c3, 2.0 * b, out)
    out = np.where(c4, b + b1 + t, out)
    out = np.where(c5, b + b1, out)
    out = np.where(c6, 2.0 * b - t, out)
    out = np.where(c7, 2.0 * b - t, out)
    out = np.where(c8, b, out)
    assert not np.any(np.isnan(out)), "case tables must cover every arrival offset"
    return out


def lt_first_derivative_oracle(
    policy: PolicyId,
    mu: float = 1.0,
    samples: int = MIN_ORACLE_SAMPLES,
    K: int = 1,
    d: int = 1,
    seed: int = 20260817,
) -> float:
    """Numerically evaluate the quadratic sojourn coefficient (per unit lam).

    Monte Carlo over the interfering job's arrival offset t and the two
    exponential requirements (b, b1): the extra delay D(t) - b vanishes
    outside a finite t-window, so t is drawn uniformly on that window and
    reweighted by its length. Returns the coefficient of lam in the mean
    sojourn expansion, including the same-type probability 1/C(K, d).
    """
    _check_kd(K, d)
    if samples < MIN_ORACLE_SAMPLES:
        raise ValidationError(f"oracle needs at least {MIN_ORACLE_SAMPLES} samples")
    if mu <= 0:
        raise ValidationError("mu must be positive")
    rng = np.random.default_rng(seed)
    b = rng.exponential(1.0 / mu, samples)
    b1 = rng.exponential(1.0 / mu, samples)
    if policy in (PolicyId.FCFS, PolicyId.ROS):
        lo, hi = -b1, np.zeros(samples)
        sojourn = _sojourn_fcfs
    elif policy is PolicyId.PS:
        lo, hi = -b1, b
        sojourn = _sojourn_ps
    else:
        raise ValidationError(f"no oracle for policy {policy}")
    width = hi - lo
    t = lo + rng.random(samples) * width
    extra = sojourn(t, b, b1) - b
    integral = float(np.mean(width * extra))
    return integral / math.comb(K, d)


def optimal_redundancy(K: int) -> int:
    """Copy count minimizing the low-load mean job count: floor(K/2), at least 1."""
    if K < 1:
        raise ValidationError(f"need K >= 1, got {K}")
    return max(1, K // 2)


def redundancy_ties(K: int) -> tuple[int, ...]:
    """All d achieving the minimal quadratic term (odd K ties floor with ceil)."""
    if K < 1:
        raise ValidationError(f"need K >= 1, got {K}")
    if K == 1:
        return (1,)
    lo = K // 2
    return (lo,) if K % 2 == 0 else (lo, lo + 1)
