"""Event-driven simulation of the redundancy-d system.

One event loop covers FCFS, PS, ROS and the fixed priority policy, with
exact cancel-on-complete semantics, plus two comparison systems for PS with
identical copies: a lower-bound chain where each job is served only at its
least-loaded server, and an upper bound where siblings are never cancelled
and a job leaves only after every copy finishes.

Service bookkeeping is exact: attained service advances lazily between
events (rates are piecewise constant there), and PS completions use
per-server virtual time with static finish thresholds in a heap, so event
cost stays logarithmic in the queue length even on diverging runs.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import TooFewCycles, ValidationError
from .model import CopyMode, Exponential, RngSpec, SystemConfig
from .policies import PRIORITY_HIGH_TYPE, PolicyId, validate_policy
from .stats import (
    MIN_CYCLES,
    CycleAccumulator,
    divergence_slope,
    drop_warmup_cycles,
    regenerative_mean,
)

SLOPE_THRESHOLD_FACTOR = 0.01  # slope > factor * lam counts as growth
DIVERGENCE_FLOOR = 10.0  # final job count must also clear max(10x initial, this)
DRAIN_FRACTION = 0.5  # seeded run counts as stable once below this fraction of its seed
MIN_CYCLES_FOR_STABLE = 5
GRID_SLOTS = 2048


class BoundingMode(str, Enum):
    EXACT = "exact"
    PS_LOWER_BOUND = "ps_lower_bound"
    PS_UPPER_BOUND = "ps_upper_bound"


@dataclass(frozen=True)
class StopRule:
    """When to end a run: after n busy periods, at a time horizon, or both.

    With busy-period stopping, a horizon acts as a safety net: hitting it
    without the requested cycles marks the run as never-regenerated instead
    of spinning forever.
    """

    busy_periods: int | None = None
    horizon: float | None = None
    max_events: int | None = None
    max_jobs: int | None = None  # stop once the job count reaches this (divergence caught)

    def __post_init__(self):
        if self.busy_periods is None and self.horizon is None and self.max_events is None:
            raise ValidationError("stop rule needs busy_periods, horizon, or max_events")
        for name in ("busy_periods", "horizon", "max_events", "max_jobs"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValidationError(f"{name} must be positive, got {v}")


def _as_stop(stop) -> StopRule:
    if isinstance(stop, StopRule):
        return stop
    if isinstance(stop, dict):
        return StopRule(**stop)
    raise ValidationError(f"cannot interpret stop rule {stop!r}")


@dataclass(frozen=True)
class EventRecord:
    time: float
    kind: str  # arrival | departure | copy_done | horizon
    job_id: int
    type_id: int
    server: int  # completing server for departures, -1 otherwise
    n_total: int
    zero_sojourn: bool = False  # arrival that departed immediately (zero requirement)


@dataclass(frozen=True)
class RunMetrics:
    time_avg_jobs: float
    ci_halfwidth: float
    busy_periods_completed: int
    divergence_slope: float
    verdict: str  # Stable-like | Diverging | Inconclusive
    clock_end: float
    jobs_arrived: int
    jobs_departed: int
    never_regenerated: bool = False
    time_avg_copies_by_server: tuple[float, ...] = ()
    copies_ci_by_server: tuple[float, ...] = ()
    type_slopes: tuple[float, ...] | None = None
    type_peaks: tuple[int, ...] | None = None


class Copy:
    __slots__ = ("job", "server", "need", "attained", "alive", "finish_v")

    def __init__(self, job: "Job", server: int, need: float):
        self.job = job
        self.server = server
        self.need = need
        self.attained = 0.0
        self.alive = True
        self.finish_v = 0.0  # PS only: virtual time at which this copy completes

    @property
    def remaining(self) -> float:
        return self.need - self.attained


class Job:
    __slots__ = ("id", "type_id", "arrival", "copies", "pending")

    def __init__(self, job_id: int, type_id: int, arrival: float):
        self.id = job_id
        self.type_id = type_id
        self.arrival = arrival
        self.copies: dict[int, Copy] = {}
        self.pending = 0  # live copies, used by the upper-bound departure rule

    def requirements(self) -> dict[int, float]:
        return {s: c.need for s, c in self.copies.items()}

    def attained(self) -> dict[int, float]:
        return {s: c.attained for s, c in self.copies.items()}


class _PsServer:
    """Virtual-time bookkeeping: every live copy advances at speed/count."""

    __slots__ = ("v", "count", "heap", "order", "seq")

    def __init__(self):
        self.v = 0.0
        self.count = 0
        self.heap: list[tuple[float, int, Copy]] = []
        self.order: deque[Copy] = deque()  # arrival order, pruned lazily
        self.seq = 0

    def add(self, copy: Copy) -> None:
        copy.finish_v = self.v + copy.remaining
        self.seq += 1
        heapq.heappush(self.heap, (copy.finish_v, self.seq, copy))
        self.order.append(copy)
        self.count += 1

    def peek(self) -> Copy | None:
        while self.heap and not self.heap[0][2].alive:
            heapq.heappop(self.heap)
        return self.heap[0][2] if self.heap else None


class SimState:
    """Mutable simulation state; drive it with the module-level functions."""

    def __init__(
        self,
        config: SystemConfig,
        rng_spec: RngSpec,
        mode: BoundingMode = BoundingMode.EXACT,
        track_types: bool = False,
    ):
        validate_policy(PolicyId(config.policy), config.K, config.d)
        if mode is not BoundingMode.EXACT:
            if (
                PolicyId(config.policy) is not PolicyId.PS
                or config.copy_mode is not CopyMode.IDENTICAL
                or not isinstance(config.service, Exponential)
            ):
                raise ValidationError(
                    "bounding systems are defined for PS, identical copies, exponential service"
                )
        self.config = config
        self.mode = mode
        self.policy = PolicyId(config.policy)
        self.table = config.type_table()
        self.track_types = track_types

        self.rng_arrivals = rng_spec.substream("arrivals")
        self.rng_types = rng_spec.substream("types")
        self.rng_services = rng_spec.substream("services")
        self.rng_ros = rng_spec.substream("ros")
        self.rng_lb = rng_spec.substream("lb")

        self.clock = 0.0
        self.next_arrival = self.rng_arrivals.exponential(1.0 / config.lam)
        self.n_total = 0
        self.n_by_type = [0] * self.table.n_types
        self.m_by_server = [0] * config.K
        self.jobs_arrived = 0
        self.jobs_departed = 0
        self.next_job_id = 0

        self.area_jobs = 0.0
        self.area_copies = [0.0] * config.K

        K = config.K
        pol = self.policy
        if mode is BoundingMode.PS_LOWER_BOUND:
            self.lb_counts = [0] * self.table.n_types
        elif pol is PolicyId.PS or mode is BoundingMode.PS_UPPER_BOUND:
            self.ps = [_PsServer() for _ in range(K)]
        elif pol in (PolicyId.FCFS, PolicyId.PRIORITY_EXAMPLE):
            # priority servers keep one queue per class; plain FCFS keeps one
            self.queues = [
                [deque()] if (pol is PolicyId.FCFS or s == 0) else [deque(), deque()]
                for s in range(K)
            ]
        elif pol is PolicyId.ROS:
            self.ros_pool: list[list[Copy]] = [[] for _ in range(K)]
            self.ros_active: list[Copy | None] = [None] * K

    # -- views used by policies.service_rates and by tests -------------------

    def speed(self, server: int) -> float:
        return self.config.speeds[server]

    def queued_copies(self, server: int) -> list[Copy]:
        if self.mode is BoundingMode.PS_LOWER_BOUND:
            raise ValidationError("the lower-bound chain does not track individual copies")
        pol = self.policy
        if pol is PolicyId.PS or self.mode is BoundingMode.PS_UPPER_BOUND:
            srv = self.ps[server]
            while srv.order and not srv.order[0].alive:
                srv.order.popleft()
            return [c for c in srv.order if c.alive]
        if pol in (PolicyId.FCFS, PolicyId.PRIORITY_EXAMPLE):
            out = [c for q in self.queues[server] for c in q if c.alive]
            out.sort(key=lambda c: c.job.id)
            return out
        return sorted((c for c in self.ros_pool[server] if c.alive), key=lambda c: c.job.id)

    def selected_copy(self, server: int) -> Copy | None:
        if self.policy is PolicyId.ROS:
            c = self.ros_active[server]
            return c if c is not None and c.alive else None
        if self.policy in (PolicyId.FCFS, PolicyId.PRIORITY_EXAMPLE):
            return self._head(server)
        return None

    # -- internals ------------------------------------------------------------

    def _head(self, server: int) -> Copy | None:
        """Copy holding a FCFS or priority server right now."""
        for q in self.queues[server]:
            while q and not q[0].alive:
                q.popleft()
            if q:
                return q[0]
        return None

    def _advance_work(self, dt: float) -> None:
        """Push attained service forward across an event-free interval."""
        if dt <= 0.0 or self.mode is BoundingMode.PS_LOWER_BOUND:
            return
        cfg = self.config
        if self.policy is PolicyId.PS or self.mode is BoundingMode.PS_UPPER_BOUND:
            for s, srv in enumerate(self.ps):
                if srv.count > 0:
                    srv.v += dt * cfg.speeds[s] / srv.count
        elif self.policy is PolicyId.ROS:
            for s in range(cfg.K):
                c = self.ros_active[s]
                if c is not None and c.alive:
                    c.attained += dt * cfg.speeds[s]
        else:
            for s in range(cfg.K):
                c = self._head(s)
                if c is not None:
                    c.attained += dt * cfg.speeds[s]

    def _completion_candidate(self, server: int) -> tuple[float, int, int] | None:
        """(finish time, job id, server) of the next completion at one server."""
        cfg = self.config
        if self.policy is PolicyId.PS or self.mode is BoundingMode.PS_UPPER_BOUND:
            srv = self.ps[server]
            c = srv.peek()
            if c is None:
                return None
            t = self.clock + (c.finish_v - srv.v) * srv.count / cfg.speeds[server]
            return (t, c.job.id, server)
        if self.policy is PolicyId.ROS:
            c = self.ros_active[server]
            if c is None or not c.alive:
                return None
            return (self.clock + c.remaining / cfg.speeds[server], c.job.id, server)
        c = self._head(server)
        if c is None:
            return None
        return (self.clock + c.remaining / cfg.speeds[server], c.job.id, server)

    def _enqueue(self, copy: Copy) -> None:
        s = copy.server
        if self.policy is PolicyId.PS or self.mode is BoundingMode.PS_UPPER_BOUND:
            self.ps[s].add(copy)
        elif self.policy is PolicyId.ROS:
            self.ros_pool[s].append(copy)
            if self.ros_active[s] is None or not self.ros_active[s].alive:
                self._ros_pick(s)
        elif self.policy is PolicyId.FCFS or s == 0:
            self.queues[s][0].append(copy)
        else:
            cls = 0 if copy.job.type_id == PRIORITY_HIGH_TYPE[s] else 1
            self.queues[s][cls].append(copy)

    def _ros_pick(self, server: int) -> None:
        pool = self.ros_pool[server]
        i = 0
        while i < len(pool):  # drop dead copies by swap-remove before drawing
            if pool[i].alive:
                i += 1
            else:
                pool[i] = pool[-1]
                pool.pop()
        if pool:
            k = int(self.rng_ros.random() * len(pool))
            self.ros_active[server] = pool[min(k, len(pool) - 1)]
        else:
            self.ros_active[server] = None

    def _remove_copy(self, copy: Copy) -> None:
        copy.alive = False
        s = copy.server
        self.m_by_server[s] -= 1
        if self.policy is PolicyId.PS or self.mode is BoundingMode.PS_UPPER_BOUND:
            self.ps[s].count -= 1
        elif self.policy is PolicyId.ROS:
            if self.ros_active[s] is copy:
                self._ros_pick(s)
        # FCFS/priority deques prune lazily via _head

    def _depart_job(self, job: Job) -> None:
        for c in job.copies.values():
            if c.alive:
                self._remove_copy(c)
        self.n_total -= 1
        self.n_by_type[job.type_id] -= 1
        self.jobs_departed += 1


def inject_workload(state: SimState, job: Job) -> bool:
    """Enqueue one copy of ``job`` at each server of its type.

    Returns True if the job departed immediately: a zero service requirement
    completes the moment it would enter service, so the job never occupies
    the system.
    """
    state.jobs_arrived += 1
    if any(c.need <= 0.0 for c in job.copies.values()):
        state.jobs_departed += 1
        return True
    state.n_total += 1
    state.n_by_type[job.type_id] += 1
    if state.mode is BoundingMode.PS_UPPER_BOUND:
        job.pending = len(job.copies)
    for s, copy in job.copies.items():
        state.m_by_server[s] += 1
        state._enqueue(copy)
    return False


def _new_job(state: SimState) -> Job:
    type_id = int(state.rng_types.integers(0, state.table.n_types))
    job = Job(state.next_job_id, type_id, state.clock)
    state.next_job_id += 1
    members = state.table.types[type_id]
    if state.config.copy_mode is CopyMode.IDENTICAL:
        b = float(state.config.service.sample(state.rng_services))
        for s in members:
            job.copies[s] = Copy(job, s, b)
    else:
        for s in members:
            job.copies[s] = Copy(job, s, float(state.config.service.sample(state.rng_services)))
    return job


def _flush_to(state: SimState, t: float) -> EventRecord:
    dt = t - state.clock
    _accumulate(state, dt)
    state._advance_work(dt)
    state.clock = t
    return EventRecord(
        time=t, kind="horizon", job_id=-1, type_id=-1, server=-1, n_total=state.n_total
    )


def advance_to_next_event(state: SimState, t_max: float = math.inf) -> EventRecord:
    """Advance the clock to the next arrival or completion and apply it.

    If the next event would land past ``t_max``, the state is advanced to
    ``t_max`` instead and a record of kind "horizon" comes back.
    """
    if state.mode is BoundingMode.PS_LOWER_BOUND:
        return _advance_lb(state, t_max)
    best: tuple[float, int, int] | None = None
    for s in range(state.config.K):
        cand = state._completion_candidate(s)
        if cand is not None and (best is None or cand < best):
            best = cand
    if best is not None and best[0] <= state.next_arrival:
        t, _, server = best
        if t < state.clock - 1e-9:
            raise AssertionError(f"completion at {t} precedes clock {state.clock}")
        t = max(t, state.clock)
        if t > t_max:
            return _flush_to(state, t_max)
        dt = t - state.clock
        _accumulate(state, dt)
        state._advance_work(dt)
        state.clock = t
        return _apply_completion(state, server)
    t = state.next_arrival
    if t > t_max:
        return _flush_to(state, t_max)
    dt = t - state.clock
    _accumulate(state, dt)
    state._advance_work(dt)
    state.clock = t
    state.next_arrival = t + state.rng_arrivals.exponential(1.0 / state.config.lam)
    job = _new_job(state)
    gone = inject_workload(state, job)
    return EventRecord(
        time=t,
        kind="arrival",
        job_id=job.id,
        type_id=job.type_id,
        server=-1,
        n_total=state.n_total,
        zero_sojourn=gone,
    )


def _accumulate(state: SimState, dt: float) -> None:
    if dt <= 0.0:
        return
    state.area_jobs += state.n_total * dt
    if state.mode is BoundingMode.PS_LOWER_BOUND:
        for c, n in enumerate(state.lb_counts):
            if n:
                for s in state.table.types[c]:
                    state.area_copies[s] += n * dt
    else:
        for s in range(state.config.K):
            state.area_copies[s] += state.m_by_server[s] * dt


def _apply_completion(state: SimState, server: int) -> EventRecord:
    if state.policy is PolicyId.PS or state.mode is BoundingMode.PS_UPPER_BOUND:
        copy = state.ps[server].peek()
    elif state.policy is PolicyId.ROS:
        copy = state.ros_active[server]
    else:
        copy = state._head(server)
    if copy is None or not copy.alive:
        raise AssertionError("completion fired on an empty server")
    copy.attained = copy.need
    job = copy.job
    if state.mode is BoundingMode.PS_UPPER_BOUND:
        state._remove_copy(copy)
        job.pending -= 1
        if job.pending > 0:
            # siblings keep running; the job itself has not left yet
            return EventRecord(
                time=state.clock,
                kind="copy_done",
                job_id=job.id,
                type_id=job.type_id,
                server=server,
                n_total=state.n_total,
            )
        state.n_total -= 1
        state.n_by_type[job.type_id] -= 1
        state.jobs_departed += 1
    else:
        state._depart_job(job)
    return EventRecord(
        time=state.clock,
        kind="departure",
        job_id=job.id,
        type_id=job.type_id,
        server=server,
        n_total=state.n_total,
    )


def _advance_lb(state: SimState, t_max: float) -> EventRecord:
    """One transition of the bounding chain that serves each job only at its
    least-loaded server (ties to the smallest index)."""
    cfg = state.config
    table = state.table
    m = [0.0] * cfg.K
    for c, n in enumerate(state.lb_counts):
        for s in table.types[c]:
            m[s] += n
    rates = []
    total = 0.0
    for c, n in enumerate(state.lb_counts):
        if n == 0:
            rates.append(0.0)
            continue
        smin = min(table.types[c], key=lambda s: (m[s], s))
        r = cfg.mu * cfg.speeds[smin] * n / m[smin]
        rates.append(r)
        total += r
    t_dep = math.inf
    if total > 0.0:
        t_dep = state.clock + state.rng_lb.exponential(1.0 / total)
    if min(t_dep, state.next_arrival) > t_max:
        return _flush_to(state, t_max)
    if t_dep <= state.next_arrival:
        dt = t_dep - state.clock
        _accumulate(state, dt)
        state.clock = t_dep
        u = state.rng_lb.random() * total
        acc = 0.0
        chosen = len(rates) - 1
        for c, r in enumerate(rates):
            acc += r
            if u < acc:
                chosen = c
                break
        while state.lb_counts[chosen] == 0:  # fp edge: land on a populated type
            chosen = (chosen + 1) % len(rates)
        state.lb_counts[chosen] -= 1
        state.n_total -= 1
        state.n_by_type[chosen] -= 1
        state.jobs_departed += 1
        return EventRecord(
            time=state.clock,
            kind="departure",
            job_id=-1,
            type_id=chosen,
            server=-1,
            n_total=state.n_total,
        )
    t = state.next_arrival
    dt = t - state.clock
    _accumulate(state, dt)
    state.clock = t
    state.next_arrival = t + state.rng_arrivals.exponential(1.0 / cfg.lam)
    type_id = int(state.rng_types.integers(0, table.n_types))
    state.lb_counts[type_id] += 1
    state.n_total += 1
    state.n_by_type[type_id] += 1
    state.jobs_arrived += 1
    jid = state.next_job_id
    state.next_job_id += 1
    return EventRecord(
        time=t, kind="arrival", job_id=jid, type_id=type_id, server=-1, n_total=state.n_total
    )


def _pre_event_n(rec: EventRecord) -> int:
    """Job count over the interval leading up to this event."""
    if rec.kind == "arrival":
        return rec.n_total - (0 if rec.zero_sojourn else 1)
    if rec.kind == "departure":
        return rec.n_total + 1
    return rec.n_total  # copy_done and horizon leave the count unchanged


def _pre_event_by_type(rec: EventRecord, state: SimState) -> list[int]:
    counts = list(state.n_by_type)
    if rec.kind == "arrival" and not rec.zero_sojourn:
        counts[rec.type_id] -= 1
    elif rec.kind == "departure":
        counts[rec.type_id] += 1
    return counts


@dataclass
class _Grid:
    """Evenly spaced (time, job count) samples that thin themselves to stay bounded."""

    dt: float
    times: list[float] = field(default_factory=list)
    values: list[int] = field(default_factory=list)
    by_type: list[list[int]] | None = None
    next_t: float = 0.0

    def offer(self, clock: float, n_before: int, by_type_before: list[int] | None) -> None:
        while self.next_t <= clock:
            self.times.append(self.next_t)
            self.values.append(n_before)
            if self.by_type is not None:
                self.by_type.append(list(by_type_before))
            self.next_t += self.dt
            if len(self.times) > GRID_SLOTS:
                self.times = self.times[::2]
                self.values = self.values[::2]
                if self.by_type is not None:
                    self.by_type = self.by_type[::2]
                self.dt *= 2.0
                self.next_t = self.times[-1] + self.dt


def seed_initial_jobs(state: SimState, count: int) -> None:
    """Inject ``count`` freshly drawn jobs at time zero.

    Stability probes start from a spread-out bulk state: whether it drains
    or keeps growing reveals the drift sign directly, where a run started
    empty can linger in a low-occupancy lull long past any sane horizon.
    """
    if state.clock > 0.0:
        raise ValidationError("initial jobs must be seeded before the run starts")
    for _ in range(count):
        if state.mode is BoundingMode.PS_LOWER_BOUND:
            type_id = int(state.rng_types.integers(0, state.table.n_types))
            state.lb_counts[type_id] += 1
            state.n_total += 1
            state.n_by_type[type_id] += 1
            state.jobs_arrived += 1
            state.next_job_id += 1
        else:
            inject_workload(state, _new_job(state))


def simulate(
    config: SystemConfig,
    rng_spec: RngSpec | None = None,
    stop: StopRule | dict | None = None,
    mode: BoundingMode = BoundingMode.EXACT,
    track_types: bool = False,
    trace: list | None = None,
    cycle_sink: CycleAccumulator | None = None,
    initial_jobs: int = 0,
) -> RunMetrics:
    """Run one replication and summarize it.

    With busy-period stopping, the long-run mean is the regenerative ratio
    estimate over completed cycles, after dropping the warm-up fraction. A
    run that hits its horizon without one completed cycle is flagged
    never_regenerated rather than failed, and judged by its growth slope.
    Pass a list as ``trace`` to collect the EventRecords, and a
    CycleAccumulator as ``cycle_sink`` to receive the post-warm-up cycles
    (keyed by this run's stream id) for pooling across replications.
    ``initial_jobs`` seeds that many jobs at time zero; busy cycles then only
    start counting once the backlog has drained to empty.
    """
    if rng_spec is None:
        rng_spec = RngSpec(master_seed=config.seed, stream_id=0)
    rule = _as_stop(stop if stop is not None else {"busy_periods": 2000})
    state = SimState(config, rng_spec, mode=mode, track_types=track_types)
    if initial_jobs:
        seed_initial_jobs(state, initial_jobs)

    horizon = rule.horizon if rule.horizon is not None else math.inf
    grid_dt = (horizon / GRID_SLOTS) if math.isfinite(horizon) else 1.0
    grid = _Grid(dt=grid_dt, by_type=[] if track_types else None)

    cycles = CycleAccumulator()
    copy_cycles: list[list[float]] = []
    cycle_open = False
    cycle_start = 0.0
    area_mark = 0.0
    copies_mark = [0.0] * config.K
    completed = 0
    events = 0
    peaks = [0] * state.table.n_types

    def close_cycle(now: float) -> None:
        nonlocal area_mark, copies_mark, cycle_start, completed
        duration = now - cycle_start
        if duration > 0:
            cycles.add_cycle(rng_spec.stream_id, state.area_jobs - area_mark, duration)
            copy_cycles.append(
                [state.area_copies[s] - copies_mark[s] for s in range(config.K)]
            )
            completed += 1
        area_mark = state.area_jobs
        copies_mark = list(state.area_copies)
        cycle_start = now

    while True:
        if rule.busy_periods is not None and completed >= rule.busy_periods:
            break
        if rule.max_events is not None and events >= rule.max_events:
            break
        if rule.max_jobs is not None and state.n_total >= rule.max_jobs:
            break
        if state.clock >= horizon:
            break
        was_empty = state.n_total == 0
        rec = advance_to_next_event(state, t_max=horizon)
        if rec.kind == "horizon":
            grid.offer(horizon, state.n_total, state.n_by_type if track_types else None)
            break
        events += 1
        grid.offer(
            rec.time,
            _pre_event_n(rec),
            _pre_event_by_type(rec, state) if track_types else None,
        )
        if track_types:
            for c, n in enumerate(state.n_by_type):
                if n > peaks[c]:
                    peaks[c] = n
        if trace is not None:
            trace.append(rec)
        if rec.kind == "arrival" and was_empty:
            if cycle_open:
                close_cycle(rec.time)
            else:
                cycle_open = True
                cycle_start = rec.time
                area_mark = state.area_jobs
                copies_mark = list(state.area_copies)

    clock_end = state.clock
    elapsed = clock_end if clock_end > 0 else 1.0

    all_cycles = cycles.cycles()
    kept = drop_warmup_cycles(all_cycles)
    if cycle_sink is not None:
        for cyc in kept:
            cycle_sink.add_cycle(rng_spec.stream_id, cyc.area, cyc.duration)
    never = rule.busy_periods is not None and completed == 0 and math.isfinite(horizon)
    try:
        mean, ci = regenerative_mean(kept)
    except TooFewCycles:
        mean = state.area_jobs / elapsed
        ci = math.inf

    half = len(grid.times) // 2
    tail = list(zip(grid.times[half:], grid.values[half:]))
    slope = divergence_slope(tail) if len(tail) >= 2 else 0.0
    slope_cap = SLOPE_THRESHOLD_FACTOR * config.lam

    initial = grid.values[0] if grid.values else 0
    final = grid.values[-1] if grid.values else state.n_total
    # a seeded run that fell below half its seed has shown contraction even
    # when full empties are too rare to complete busy cycles (near-critical
    # stationary states regenerate exponentially rarely)
    drained = initial > 0 and final <= DRAIN_FRACTION * initial
    if slope > slope_cap and final > max(10.0 * initial, DIVERGENCE_FLOOR):
        verdict = "Diverging"
    elif slope <= slope_cap and (completed >= MIN_CYCLES_FOR_STABLE or drained):
        verdict = "Stable-like"
    else:
        verdict = "Inconclusive"

    copy_means: tuple[float, ...] = ()
    copy_cis: tuple[float, ...] = ()
    n_drop = len(all_cycles) - len(kept)
    kept_copy = copy_cycles[n_drop:]
    if len(kept_copy) >= MIN_CYCLES:
        means = []
        cis = []
        for s in range(config.K):
            m, c = regenerative_mean(
                [(row[s], cyc.duration) for row, cyc in zip(kept_copy, kept)]
            )
            means.append(m)
            cis.append(c)
        copy_means = tuple(means)
        copy_cis = tuple(cis)

    type_slopes = None
    if track_types and grid.by_type is not None and len(grid.times) >= 4:
        ts = grid.times[half:]
        series = np.array(grid.by_type[half:])
        type_slopes = tuple(
            divergence_slope(list(zip(ts, series[:, c])))
            for c in range(state.table.n_types)
        )

    return RunMetrics(
        time_avg_jobs=mean,
        ci_halfwidth=ci,
        busy_periods_completed=completed,
        divergence_slope=slope,
        verdict=verdict,
        clock_end=clock_end,
        jobs_arrived=state.jobs_arrived,
        jobs_departed=state.jobs_departed,
        never_regenerated=never,
        time_avg_copies_by_server=copy_means,
        copies_ci_by_server=copy_cis,
        type_slopes=type_slopes,
        type_peaks=tuple(peaks) if track_types else None,
    )


def replicated_time_average(
    config: SystemConfig,
    stop: StopRule | dict,
    mode: BoundingMode = BoundingMode.EXACT,
) -> tuple[float, float, list[RunMetrics]]:
    """Pool busy cycles across ``config.replications`` independent streams.

    Returns (mean, ci halfwidth, per-replication metrics). Cycles merge
    keyed by stream id, so the pooled estimate does not depend on the order
    replications run in. Falls back to the average of per-run time averages
    (with an infinite interval) when too few cycles completed overall.
    """
    pooled = CycleAccumulator()
    runs: list[RunMetrics] = []
    for rep in range(config.replications):
        sink = CycleAccumulator()
        metrics = simulate(
            config,
            RngSpec(master_seed=config.seed, stream_id=rep),
            stop,
            mode=mode,
            cycle_sink=sink,
        )
        runs.append(metrics)
        pooled = pooled.merge(sink)
    try:
        mean, ci = regenerative_mean(pooled.cycles())
    except TooFewCycles:
        mean = float(np.mean([r.time_avg_jobs for r in runs]))
        ci = math.inf
    return mean, ci, runs
