"""Fluid-limit drift fields for the redundancy-d system, and a trajectory integrator.

Three per-server drift fields are exposed: the shared PS/ROS field for
i.i.d. copies, and the lower-bound system's field for identical copies. Each
gives d(m_s)/dt as arrival inflow lam*d/K minus a state-dependent service
term. The integrator advances per-type masses with explicit Euler, stopping
at kinks (mass hitting zero, server loads crossing) so the piecewise-affine
pieces are followed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateState, StepTooLarge, ValidationError
from .model import SystemConfig, TypeTable

_ZERO = 1e-12


class FluidState:
    """Nonnegative fluid mass per job type, with per-server aggregates."""

    def __init__(self, table: TypeTable, n: Mapping | Sequence[float] | np.ndarray):
        self.table = table
        if isinstance(n, Mapping):
            arr = np.zeros(table.n_types)
            for key, val in n.items():
                idx = key if isinstance(key, int) else table.id_of(key)
                arr[idx] = val
        else:
            arr = np.asarray(n, dtype=float).copy()
            if arr.shape != (table.n_types,):
                raise ValidationError(
                    f"need one mass per type ({table.n_types}), got shape {arr.shape}"
                )
        if np.any(arr < 0):
            raise ValidationError("fluid masses must be nonnegative")
        self.n = arr

    def server_masses(self) -> np.ndarray:
        """m_s = total mass over types containing server s."""
        m = np.zeros(self.table.K)
        for i, t in enumerate(self.table.types):
            for s in t:
                m[s] += self.n[i]
        return m

    def total(self) -> float:
        return float(self.n.sum())


def _min_copy_server(table: TypeTable, m: np.ndarray, type_id: int) -> int:
    """Least-loaded server of a type; ties go to the smallest server index."""
    members = table.types[type_id]
    best = members[0]
    for s in members[1:]:
        if m[s] < m[best] - _ZERO:
            best = s
    return best


def drift_iid_server(config: SystemConfig, state: FluidState, s: int) -> float:
    """Per-server mass drift under PS with i.i.d. copies.

    lam*d/K - mu * sum over types c containing s, over servers l in c, of
    n_c/m_l. Every copy of a type-c job advances at rate mu/m_l on server l,
    and any copy finishing removes the whole job from all its servers.
    """
    table = state.table
    m = state.server_masses()
    touched = {l for c in table.types_of_server[s] for l in table.types[c]}
    if any(m[l] <= _ZERO for l in touched):
        raise DegenerateState(
            f"drift is set-valued when a touched server has zero mass (server {s})"
        )
    service = sum(
        state.n[c] / m[l] for c in table.types_of_server[s] for l in table.types[c]
    )
    return config.lam * config.d / config.K - config.mu * service


def drift_ros_server(config: SystemConfig, state: FluidState, s: int) -> float:
    """Per-server mass drift under ROS with i.i.d. copies: same field as PS i.i.d."""
    return drift_iid_server(config, state, s)


def drift_lb_server(config: SystemConfig, state: FluidState, s: int) -> float:
    """Per-server mass drift in the lower-bound system for identical-copy PS.

    Each type is served only at its least-loaded server (ties to the smallest
    index), at rate mu*n_c/m_that_server. Grouped by that server the service
    rate at s rewrites as mu*(1 + sum over l with m_s >= m_l of
    (m_s - m_l) * (mass routed to l) / (m_s * m_l)).
    """
    table = state.table
    m = state.server_masses()
    if m[s] <= _ZERO:
        raise DegenerateState(f"server {s} holds no mass; drift is set-valued at zero")
    routed = np.zeros(table.K)
    for c in table.types_of_server[s]:
        if state.n[c] > 0:
            routed[_min_copy_server(table, m, c)] += state.n[c]
    total = 1.0
    for l in range(table.K):
        if routed[l] == 0.0 or m[s] < m[l]:
            continue
        if m[l] <= _ZERO:
            raise DegenerateState(f"min-copy server {l} has zero mass")
        total += (m[s] - m[l]) * routed[l] / (m[s] * m[l])
    return config.lam * config.d / config.K - config.mu * total


def _type_rates(config: SystemConfig, table: TypeTable, n: np.ndarray, kind: str) -> np.ndarray:
    """dn_c/dt for every type, with sticky behavior at zero mass.

    Flow arriving to a type whose servers hold no other mass is served the
    instant it lands (the service rate does not vanish with the mass), so a
    zero-mass type only lifts off with the inflow left over after that
    instant capacity. At the all-empty state the per-type caps would count
    shared servers twice, so the joint capacity decides there instead.
    """
    K, lam, mu = config.K, config.lam, config.mu
    speeds = config.speeds
    inflow = lam / table.n_types
    m = np.zeros(K)
    for i, t in enumerate(table.types):
        for s in t:
            m[s] += n[i]
    if not np.any(n > 0.0):
        surplus = max(lam - mu * sum(speeds), 0.0) / table.n_types
        return np.full(table.n_types, surplus)
    rates = np.full(table.n_types, inflow)
    for c in range(table.n_types):
        if n[c] <= 0.0:
            if kind == "lb":
                at = _min_copy_server(table, m, c)
                cap = mu * speeds[at] if m[at] <= _ZERO else 0.0
            else:
                cap = mu * sum(speeds[l] for l in table.types[c] if m[l] <= _ZERO)
            rates[c] = max(inflow - cap, 0.0)
            continue
        if kind == "lb":
            rates[c] -= mu * n[c] / m[_min_copy_server(table, m, c)]
        else:
            rates[c] -= mu * n[c] * sum(1.0 / m[l] for l in table.types[c])
    return rates


@dataclass
class FluidTrajectory:
    times: np.ndarray
    masses: np.ndarray  # steps x n_types
    server_masses: np.ndarray  # steps x K
    totals: np.ndarray

    def empty_time(self, tol: float = 1e-9) -> float:
        """First recorded time with no mass left; inf if never empties."""
        hits = np.nonzero(self.totals <= tol)[0]
        return float(self.times[hits[0]]) if hits.size else math.inf


_FIELD_KINDS = ("iid", "lb", "ros")


def integrate_fluid(
    config: SystemConfig,
    initial: FluidState,
    field: str,
    t_end: float,
    dt: float,
) -> FluidTrajectory:
    """Integrate per-type fluid masses from ``initial`` to ``t_end``.

    Explicit Euler on the per-type equations; within each dt the step is cut
    at the earliest kink (a type mass reaching zero, or, for the lb field,
    two server loads crossing, which changes the routing), so the affine
    pieces are never overshot. Raises StepTooLarge if kinks pile up faster
    than the step can resolve (dt far too coarse for the field).
    """
    kind = field.lower()
    if kind not in _FIELD_KINDS:
        raise ValidationError(f"unknown fluid field {field!r}; expected one of {_FIELD_KINDS}")
    if dt <= 0 or t_end <= 0:
        raise ValidationError("t_end and dt must be positive")
    if not np.all(np.isfinite(initial.n)):
        raise ValidationError("initial masses must be finite")

    table = initial.table
    n = initial.n.copy()
    max_cuts = 10 * (table.n_types + table.K * table.K)

    def record(ts, ns, t):
        ts.append(t)
        ns.append(n.copy())

    times: list[float] = []
    snaps: list[np.ndarray] = []
    record(times, snaps, 0.0)
    steps = int(round(t_end / dt))
    t = 0.0
    for _ in range(steps):
        remaining = dt
        cuts = 0
        while remaining > _ZERO:
            rates = _type_rates(config, table, n, kind)
            h = remaining
            # earliest mass hitting zero
            for c in range(table.n_types):
                if rates[c] < 0 and n[c] > 0:
                    hit = n[c] / -rates[c]
                    if hit < h:
                        h = hit
            # earliest pair of server loads crossing; only the lb field
            # reroutes there, the iid field is smooth across crossings
            if kind == "lb":
                m = np.zeros(table.K)
                dm = np.zeros(table.K)
                for i, typ in enumerate(table.types):
                    for s in typ:
                        m[s] += n[i]
                        dm[s] += rates[i]
                for a in range(table.K):
                    for b in range(a + 1, table.K):
                        gap = m[a] - m[b]
                        vel = dm[a] - dm[b]
                        if gap * vel < 0:
                            cross = -gap / vel
                            if _ZERO < cross < h:
                                h = cross
            n = np.maximum(n + h * rates, 0.0)
            remaining -= h
            cuts += 1
            if cuts > max_cuts:
                raise StepTooLarge(
                    f"more than {max_cuts} kinks inside one step of dt={dt}; reduce dt"
                )
        t += dt
        record(times, snaps, t)

    arr = np.array(snaps)
    server = np.zeros((arr.shape[0], table.K))
    for i, typ in enumerate(table.types):
        for s in typ:
            server[:, s] += arr[:, i]
    return FluidTrajectory(
        times=np.array(times),
        masses=arr,
        server_masses=server,
        totals=arr.sum(axis=1),
    )
