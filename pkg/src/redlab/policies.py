"""Scheduling policies and the priority counterexample's analytic drift.

Three symmetric policies (FCFS, PS, ROS) plus one deliberately asymmetric
priority policy on the K=3, d=2 system that shrinks the stability region
below the nominal load boundary. The priority policy gives the two types
that share server 1 preemptive priority at servers 2 and 3 respectively,
starving the third type.
"""

from __future__ import annotations

import math
from enum import Enum

from .errors import DomainError, ValidationError


class PolicyId(str, Enum):
    FCFS = "fcfs"
    PS = "ps"
    ROS = "ros"
    PRIORITY_EXAMPLE = "priority_example"


# The priority policy is defined only on K=3, d=2 with lexicographic type ids
# 0={1,2}, 1={1,3}, 2={2,3}. Server 1 (index 0) runs plain FCFS; servers 2 and 3
# (indices 1, 2) each serve their listed high-priority type first, preemptively.
PRIORITY_HIGH_TYPE = {1: 0, 2: 1}
PRIORITY_LOW_TYPE = 2


def validate_policy(policy: PolicyId, K: int, d: int) -> None:
    """Reject configurations the policy is not defined for."""
    if policy is PolicyId.PRIORITY_EXAMPLE and (K, d) != (3, 2):
        raise ValidationError(
            f"priority_example is defined only for K=3, d=2 (got K={K}, d={d})"
        )


def service_rates(policy: PolicyId, state, server: int) -> dict[int, float]:
    """Per-copy service rates at one server, keyed by job id.

    ``state`` must expose ``queued_copies(server)`` (live copies in arrival
    order), ``speed(server)``, ``selected_copy(server)`` (ROS and priority
    bookkeeping: the copy currently holding the server, or None). Rates sum
    to the server speed whenever the queue is nonempty, except under the
    priority policy where only the winning class is served.
    """
    copies = state.queued_copies(server)
    if not copies:
        return {}
    nu = state.speed(server)
    if policy is PolicyId.PS:
        share = nu / len(copies)
        return {c.job.id: share for c in copies}
    if policy is PolicyId.FCFS:
        return {copies[0].job.id: nu}
    if policy is PolicyId.ROS:
        chosen = state.selected_copy(server)
        if chosen is None or not chosen.alive:
            return {}
        return {chosen.job.id: nu}
    if policy is PolicyId.PRIORITY_EXAMPLE:
        if server == 0:
            return {copies[0].job.id: nu}
        high = PRIORITY_HIGH_TYPE[server]
        winners = [c for c in copies if c.job.type_id == high]
        pool = winners if winners else copies
        return {pool[0].job.id: nu}
    raise ValueError(f"unknown policy {policy!r}")


def priority_drift(lam: float, mu: float) -> float:
    """Mean growth rate of the starved type's job count under the priority policy.

    Evaluates the closed form obtained from the product-form steady state of
    the two prioritized types (a two-class system on servers {1,2} and {1,3},
    which the starved type never influences). Positive drift means the starved
    type's queue grows without bound even though the nominal load is below 1.

    Valid while the two-class subsystem itself is stable, i.e. lam/(3 mu) < 3/2.
    """
    if lam <= 0 or mu <= 0:
        raise DomainError("arrival and service rates must be positive")
    if lam / (3.0 * mu) >= 1.5:
        raise DomainError(
            "the prioritized two-class subsystem has no steady state for lam/(3 mu) >= 3/2"
        )
    r = lam / 3.0
    p_both_empty = ((2 * mu - r) ** 2 * (3 * mu - 2 * r)) / (
        4 * mu**2 * (3 * mu - 2 * r) + r**2 * mu
    )
    return r - 2 * mu * p_both_empty * (2 * mu / (2 * mu - r))


def priority_drift_root(mu: float = 1.0) -> float:
    """Load level (as a fraction of total capacity) where the starved type's drift changes sign.

    The drift reduces to x - 4(3-2x)/(6-x) in x = lam/(3 mu), whose root is
    7 - sqrt(37) ~= 0.9172. Returned in load units rho = lam/(3 mu).
    """
    del mu  # scale-free in rho
    return 7.0 - math.sqrt(37.0)
