"""Throughput of the always-backlogged system under FCFS with identical copies.

With an infinite FIFO backlog of uniformly typed jobs, a job is in service
exactly when some server of its type is not claimed by an older job. The mean
number of distinct jobs in service, written ell_bar here, fixes the maximal
throughput (mu * ell_bar) and hence the stability boundary rho < ell_bar/K of
the original open system.

Three routes are provided: exact closed forms for d in {1, K-1, K}, a
truncated solve of the descriptor chain for d = K-2, and regenerative Monte
Carlo for everything else. The d = K-2 chain is tractable because blocked
runs between consecutive in-service jobs have conditionally i.i.d. types,
uniform over the types fitting inside the claimed-server set at that depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import (
    NotClosedForm,
    SingularSystem,
    TruncationNotConverged,
    ValidationError,
)
from .model import TypeTable, build_type_table
from .stats import batch_mean_ci

MIN_MC_DEPARTURES = 100_000
CONVERGENCE_TARGET = 1e-6
MAX_TRUNCATION = 60
RESIDUAL_TOL = 1e-12


def _check_kd(K: int, d: int) -> None:
    if K < 1 or not 1 <= d <= K:
        raise ValidationError(f"need 1 <= d <= K, got d={d}, K={K}")


@dataclass(frozen=True)
class EllBarResult:
    """Mean in-service job count under saturation, with provenance of the number."""

    K: int
    d: int
    ell_bar: float
    method: str  # ClosedForm | TruncatedSolve | MonteCarlo
    error_bound: float

    def __post_init__(self):
        lo = math.ceil(self.K / self.d)
        hi = self.K - self.d + 1 if self.d >= 2 else self.K
        slack = self.error_bound + 1e-9
        if not (lo - slack <= self.ell_bar <= hi + slack):
            raise ValidationError(
                f"ell_bar={self.ell_bar} outside [{lo}, {hi}] for K={self.K}, d={self.d}"
            )

    @property
    def ell_bar_over_K(self) -> float:
        return self.ell_bar / self.K


@dataclass(frozen=True)
class SaturatedState:
    """FIFO prefix of the backlog up to the job completing the server cover.

    ``in_service`` lists the in-service jobs' type ids oldest first;
    ``blocked_runs[j]`` counts the blocked jobs between in-service jobs j and
    j+1. Jobs behind the last in-service job are an i.i.d. uniform reservoir
    and are not part of the state.
    """

    in_service: tuple[int, ...]
    blocked_runs: tuple[int, ...]

    def __post_init__(self):
        if len(self.blocked_runs) != len(self.in_service) - 1:
            raise ValidationError("need one blocked run between consecutive in-service jobs")
        if any(g < 0 for g in self.blocked_runs):
            raise ValidationError("blocked-run lengths must be nonnegative")

    def validate(self, table: TypeTable) -> None:
        """Each in-service job must touch a server unclaimed by the older ones."""
        claimed = 0
        for t in self.in_service:
            if table.masks[t] & ~claimed == 0:
                raise ValidationError(f"type {t} adds no unclaimed server; it would be blocked")
            claimed |= table.masks[t]
        if claimed != (1 << table.K) - 1:
            raise ValidationError("in-service jobs must jointly claim every server")

    def to_flat(self) -> tuple[int, ...]:
        out: list[int] = [self.in_service[0]]
        for gap, t in zip(self.blocked_runs, self.in_service[1:]):
            out.extend((gap, t))
        return tuple(out)

    @staticmethod
    def from_flat(flat: Sequence[int]) -> "SaturatedState":
        return SaturatedState(
            in_service=tuple(flat[0::2]),
            blocked_runs=tuple(flat[1::2]),
        )


def ell_bar_closed_form(K: int, d: int) -> EllBarResult:
    """Exact values at the three solvable corners.

    d=1: one job per server, K in service. d=K: the oldest job occupies every
    server, exactly 1. d=K-1: the oldest job leaves one server free and the
    first job of any other type covers it, exactly 2.
    """
    _check_kd(K, d)
    if d == 1:
        val = float(K)
    elif d == K:
        val = 1.0
    elif d == K - 1:
        val = 2.0
    else:
        raise NotClosedForm(f"no closed form for K={K}, d={d}; use the exact solve or MC")
    return EllBarResult(K=K, d=d, ell_bar=val, method="ClosedForm", error_bound=0.0)


def saturated_scan(queue_masks: Sequence[int], K: int) -> list[int]:
    """Indices of in-service jobs in a FIFO queue of type bitmasks.

    Walk oldest to newest keeping the union of claimed servers; a job serves
    iff it touches an unclaimed server. The walk may stop once every server
    is claimed: everything behind is blocked.
    """
    full = (1 << K) - 1
    claimed = 0
    active: list[int] = []
    for i, mk in enumerate(queue_masks):
        if mk & ~claimed:
            active.append(i)
            claimed |= mk
            if claimed == full:
                break
    return active


def ell_bar_mc(
    K: int,
    d: int,
    departures: int = 1_000_000,
    rng: np.random.Generator | int | None = None,
    batches: int = 32,
) -> EllBarResult:
    """Monte Carlo estimate of the saturated in-service count.

    The jump chain is simulated directly; holding times are replaced by their
    conditional means 1/(mu * count), which turns the time average into
    total jumps / sum of 1/count and removes the holding-time noise. The CI
    comes from batch means over contiguous stretches of departures.
    """
    _check_kd(K, d)
    if departures < MIN_MC_DEPARTURES:
        raise ValidationError(f"need at least {MIN_MC_DEPARTURES} departures, got {departures}")
    if batches < 30:
        raise ValidationError(f"need at least 30 batches for the CI, got {batches}")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    table = build_type_table(K, d)
    masks = table.masks
    n_types = table.n_types
    full = (1 << K) - 1

    block = 1 << 14
    draw_buf = gen.integers(0, n_types, block)
    draw_pos = 0
    pick_buf = gen.random(block)
    pick_pos = 0

    queue: list[int] = []
    batch_edges = np.linspace(0, departures, batches + 1).astype(int)
    batch_est: list[float] = []
    total_inv = 0.0
    edge_idx = 1
    inv_acc = 0.0
    count_acc = 0

    for event in range(departures):
        claimed = 0
        active: list[int] = []
        i = 0
        while claimed != full:
            if i == len(queue):
                if draw_pos == block:
                    draw_buf = gen.integers(0, n_types, block)
                    draw_pos = 0
                queue.append(masks[draw_buf[draw_pos]])
                draw_pos += 1
            mk = queue[i]
            if mk & ~claimed:
                active.append(i)
                claimed |= mk
            i += 1
        count = len(active)
        inv_acc += 1.0 / count
        count_acc += 1
        if pick_pos == block:
            pick_buf = gen.random(block)
            pick_pos = 0
        victim = active[int(pick_buf[pick_pos] * count)]
        pick_pos += 1
        queue.pop(victim)
        if event + 1 == batch_edges[edge_idx]:
            batch_est.append(count_acc / inv_acc)
            total_inv += inv_acc
            inv_acc = 0.0
            count_acc = 0
            edge_idx += 1

    _, half = batch_mean_ci(batch_est)
    return EllBarResult(
        K=K, d=d, ell_bar=departures / total_inv, method="MonteCarlo", error_bound=half
    )


# ---------------------------------------------------------------------------
# Exact solve for d = K-2: descriptor chain with truncated blocked runs.
#
# Queue segments during a post-departure rescan:
#   ("fixed", type_id, count)  jobs of one known type (in-service jobs, and
#                              blocked runs whose fitting set is a singleton)
#   ("iid", ids, count)        jobs i.i.d. uniform over the type-id tuple
#   ("reservoir",)             the infinite uniform tail
#
# States are stored flat, oldest first: (t_0, run_0, t_1, run_1, t_2, ...).
# ---------------------------------------------------------------------------


class _FitCache:
    """Memoized map from a claimed-server mask to the type ids fitting inside it."""

    def __init__(self, table: TypeTable):
        self.table = table
        self._cache: dict[int, tuple[int, ...]] = {}

    def __call__(self, claimed: int) -> tuple[int, ...]:
        hit = self._cache.get(claimed)
        if hit is None:
            hit = tuple(
                i for i, mk in enumerate(self.table.masks) if mk & ~claimed == 0
            )
            self._cache[claimed] = hit
        return hit


def _fitting_ids(table: TypeTable, claimed: int) -> tuple[int, ...]:
    """Type ids whose servers all lie inside the claimed set."""
    return tuple(i for i, mk in enumerate(table.masks) if mk & ~claimed == 0)


def _segments_without(
    table: TypeTable, flat: tuple[int, ...], drop: int, fit: _FitCache
) -> list[tuple]:
    """Queue segments after in-service job number ``drop`` departs."""
    in_service = flat[0::2]
    runs = flat[1::2]
    segs: list[tuple] = []
    claimed = 0
    for j, t in enumerate(in_service):
        if j != drop:
            segs.append(("fixed", t, 1))
        claimed |= table.masks[t]
        if j < len(runs) and runs[j] > 0:
            ids = fit(claimed)
            if len(ids) == 1:
                segs.append(("fixed", ids[0], runs[j]))
            else:
                segs.append(("iid", ids, runs[j]))
    segs.append(("reservoir",))
    return segs


def _expand(table: TypeTable, segs: list[tuple], cap: int, fit: _FitCache) -> dict[tuple, float]:
    """Rescan distribution over descriptors reached from the given queue.

    Depth-first over the blocked-or-promoted branches for every queued job.
    Blocked runs are capped at ``cap``: overflow mass lands on the capped
    descriptor, redirecting the geometric tails back into the kept space.
    """
    masks = table.masks
    full = (1 << table.K) - 1
    n_types = table.n_types
    out: dict[tuple, float] = {}

    def emit(si: int, off: int, desc: list[int], prob: float) -> None:
        for j in range(si, len(segs)):
            kind = segs[j]
            if kind[0] == "reservoir":
                continue
            left = kind[2] - (off if j == si else 0)
            if left > 0:
                raise AssertionError("scan finished with undrained known-law jobs")
        key = tuple(desc)
        out[key] = out.get(key, 0.0) + prob

    def promote(si, off, claimed, desc, gap, prob, type_id):
        if gap > 0 and not desc:
            raise AssertionError("blocked jobs cannot precede the oldest in-service job")
        new_claimed = claimed | masks[type_id]
        new_desc = desc + ([min(gap, cap), type_id] if desc else [type_id])
        if new_claimed == full:
            emit(si, off, new_desc, prob)
        else:
            walk(si, off, new_claimed, new_desc, 0, prob)

    def walk(si, off, claimed, desc, gap, prob):
        kind = segs[si]
        tag = kind[0]
        if tag == "fixed":
            t, count = kind[1], kind[2]
            if off == count:
                walk(si + 1, 0, claimed, desc, gap, prob)
            elif masks[t] & ~claimed == 0:
                if fit(claimed) != (t,):
                    raise AssertionError(
                        "known-type blocked job needs a singleton fitting set"
                    )
                walk(si, off + 1, claimed, desc, gap + 1, prob)
            else:
                promote(si, off + 1, claimed, desc, gap, prob, t)
        elif tag == "iid":
            ids, count = kind[1], kind[2]
            if off == count:
                walk(si + 1, 0, claimed, desc, gap, prob)
                return
            blocked = tuple(t for t in ids if masks[t] & ~claimed == 0)
            if blocked:
                if blocked != fit(claimed):
                    raise AssertionError(
                        "blocked subset must be the full fitting set at this depth"
                    )
                walk(si, off + 1, claimed, desc, gap + 1, prob * len(blocked) / len(ids))
            for t in ids:
                if masks[t] & ~claimed:
                    promote(si, off + 1, claimed, desc, gap, prob / len(ids), t)
        elif tag == "reservoir":
            q = len(fit(claimed)) / n_types
            budget = cap - gap
            for t in range(n_types):
                if masks[t] & ~claimed == 0:
                    continue
                if budget > 0:
                    run = prob / n_types
                    for g in range(budget):
                        promote(si, off, claimed, desc, gap + g, run, t)
                        run *= q
                    promote(si, off, claimed, desc, cap, run / (1.0 - q), t)
                else:
                    promote(si, off, claimed, desc, cap, prob / ((1.0 - q) * n_types), t)
        else:
            raise AssertionError(f"unknown segment {tag}")

    walk(0, 0, 0, [], 0, 1.0)
    total = sum(out.values())
    if abs(total - 1.0) > 1e-9:
        raise AssertionError(f"rescan probabilities sum to {total}, not 1")
    return out


def _canonical(table: TypeTable, flat: tuple[int, ...]) -> tuple[int, ...]:
    """Relabel servers into a fixed role order so symmetric states coincide.

    Roles, for d = K-2 descriptors: the oldest job's servers get the low
    labels, its two free servers the top two. With three in-service jobs the
    middle job's free server is K-2, the last job's is K-1, the middle job's
    missed claimed server is K-3, and the last job's missed servers inside
    the remainder take the highest remaining labels. Any leftover ordering is
    within a symmetry class, so the result is a true orbit representative.
    """
    K = table.K
    types = table.types
    all_servers = set(range(K))
    first = set(types[flat[0]])
    free = all_servers - first
    order: list[int] = []
    if len(flat) == 3:
        second = set(types[flat[2]])
        order += sorted(first & second) + sorted(first - second) + sorted(free)
    else:
        second = set(types[flat[2]])
        third = set(types[flat[4]])
        if len(second & free) != 1 or len(first - second) != 1:
            raise AssertionError(f"descriptor {flat} has no three-job role structure")
        u = next(iter(second & free))
        v = next(iter(free - {u}))
        w = next(iter(first - second))
        pool = first - {w}
        missed3 = all_servers - third
        order += sorted(pool - missed3) + sorted(pool & missed3) + [w, u, v]
    relabel = {old: new for new, old in enumerate(order)}
    mapped = list(flat)
    for i in range(0, len(flat), 2):
        mapped[i] = table.id_of(tuple(sorted(relabel[s] for s in types[flat[i]])))
    return tuple(mapped)


def _seed_state(table: TypeTable) -> tuple[int, ...]:
    K = table.K
    t0 = table.id_of(tuple(range(K - 2)))
    cover = table.id_of(tuple(range(2, K)))
    return (t0, 0, cover)


def _solve_truncated(K: int, cap: int, quotient: bool = True) -> float:
    """Stationary mean in-service count of the run-capped descriptor chain."""
    table = build_type_table(K, K - 2)
    fit = _FitCache(table)
    canon = (lambda f: _canonical(table, f)) if quotient else (lambda f: f)

    index: dict[tuple[int, ...], int] = {}
    order: list[tuple[int, ...]] = []

    def intern(flat: tuple[int, ...]) -> int:
        if flat not in index:
            index[flat] = len(order)
            order.append(flat)
        return index[flat]

    intern(canon(_seed_state(table)))
    edges: dict[tuple[int, int], float] = {}
    seen = 0
    while seen < len(order):
        flat = order[seen]
        src = seen
        seen += 1
        jobs = (len(flat) + 1) // 2
        for drop in range(jobs):
            segs = _segments_without(table, flat, drop, fit)
            for target, p in _expand(table, segs, cap, fit).items():
                tgt = intern(canon(target))
                edges[(src, tgt)] = edges.get((src, tgt), 0.0) + p

    n = len(order)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for (src, tgt), p in edges.items():
        if src == tgt:
            diag[src] += p
            continue
        rows.append(tgt)
        cols.append(src)
        vals.append(p)
    for src, flat in enumerate(order):
        jobs = (len(flat) + 1) // 2
        rows.append(src)
        cols.append(src)
        vals.append(diag[src] - jobs)
    # transposed generator; replace the last equation with normalization
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n)).tolil()
    A[n - 1, :] = 1.0
    b = np.zeros(n)
    b[n - 1] = 1.0
    Acsr = A.tocsr()
    try:
        pi = spsolve(Acsr, b)
    except Exception as exc:  # pragma: no cover - scipy failure path
        raise SingularSystem(f"stationary solve failed: {exc}") from exc
    if not np.all(np.isfinite(pi)) or np.min(pi) < -1e-9:
        raise SingularSystem("stationary solve returned an invalid distribution")
    for _ in range(3):
        resid = Acsr @ pi - b
        if np.max(np.abs(resid)) <= RESIDUAL_TOL:
            break
        pi = pi - spsolve(Acsr, resid)
    resid = Acsr @ pi - b
    if np.max(np.abs(resid)) > RESIDUAL_TOL:
        raise SingularSystem(f"stationary residual too large: {np.max(np.abs(resid))}")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    counts = np.array([(len(f) + 1) // 2 for f in order], dtype=float)
    return float(pi @ counts)


def ell_bar_exact(K: int, d: int | None = None, L_max: int = 8) -> EllBarResult:
    """Exact (up to run truncation) in-service mean for d = K-2.

    Solves the descriptor chain with blocked runs capped at L_max, then keeps
    raising the cap until consecutive values differ by less than the target.
    """
    if d is None:
        d = K - 2
    if K < 4 or d != K - 2:
        raise ValidationError(f"the exact solve covers d = K-2 with K >= 4, got K={K}, d={d}")
    if L_max < 1:
        raise ValidationError(f"truncation cap must be >= 1, got {L_max}")
    q = (K - 1) / math.comb(K, 2)  # geometric tail ratio of the blocked runs
    cap = max(2, L_max)
    prev = _solve_truncated(K, cap - 1)
    cur = _solve_truncated(K, cap)
    err = abs(cur - prev)
    history = [(cap, err)]
    while err >= CONVERGENCE_TARGET:
        if cap >= MAX_TRUNCATION:
            raise TruncationNotConverged(
                f"run cap {MAX_TRUNCATION} reached with error bound {err:.3g}"
            )
        # predict how many extra levels the geometric tail needs, then verify
        ratio = q
        if len(history) >= 2 and 0 < history[-1][1] < history[-2][1]:
            span = history[-1][0] - history[-2][0]
            ratio = (history[-1][1] / history[-2][1]) ** (1.0 / span)
        if err > 0 and 0 < ratio < 1:
            need = math.ceil(math.log(CONVERGENCE_TARGET / err) / math.log(ratio)) + 1
        else:
            need = 4
        cap = min(MAX_TRUNCATION, cap + max(1, need))
        prev = _solve_truncated(K, cap - 1)
        cur = _solve_truncated(K, cap)
        err = abs(cur - prev)
        history.append((cap, err))
    return EllBarResult(K=K, d=d, ell_bar=cur, method="TruncatedSolve", error_bound=err)


def stability_threshold_fcfs(
    K: int,
    d: int,
    departures: int = 400_000,
    rng: np.random.Generator | int | None = None,
) -> float:
    """Load boundary ell_bar/K via the sharpest available route."""
    _check_kd(K, d)
    if d in (1, K - 1, K):
        return ell_bar_closed_form(K, d).ell_bar_over_K
    if d == K - 2:
        return ell_bar_exact(K).ell_bar_over_K
    return ell_bar_mc(K, d, departures=departures, rng=rng).ell_bar_over_K
