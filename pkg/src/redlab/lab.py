"""Stability laboratory: theoretical thresholds, empirical boundaries, sweeps.

The threshold table covers the exponential-service cases with a known
critical load; everything else is reported as Unknown and only measured
empirically. Boundaries are located by bisecting on the offered load with
majority-of-replication verdicts from fixed-horizon runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .engine import BoundingMode, StopRule, simulate, replicated_time_average
from .errors import BudgetExhausted, NoBracket, ValidationError
from .model import CopyMode, Exponential, RngSpec, SystemConfig
from .policies import PolicyId
from .saturated import stability_threshold_fcfs

UNKNOWN = "Unknown"

MIN_TOL = 0.02
PROBE_REPLICATIONS = 3
PROBE_EVENT_CAP = 2_500_000  # per replication
PROBE_SEED_JOBS = 500  # bulk state injected at t=0 so the drift sign shows quickly
PROBE_GROWTH_FACTOR = 12  # stop a probe once jobs reach this multiple of the seed
PROBE_BUSY_EXIT = 40  # stop a probe after this many busy cycles (drained side)
PROBE_HORIZON_SCALE = 13.0  # long-stage horizon = scale * seed / (tol/4 * mu * sum speeds)
DEFAULT_BUDGET = 48  # probes (each probe = 3 replications)


@dataclass(frozen=True)
class BoundaryEstimate:
    rho_star_empirical: float
    rho_star_theory: float | str  # a load value, or UNKNOWN
    bracket: tuple[float, float]
    verdict_trace: tuple[tuple[float, str], ...]

    def __post_init__(self):
        lo, hi = self.bracket
        if not (lo < self.rho_star_empirical <= hi):
            raise ValidationError(
                f"estimate {self.rho_star_empirical} outside bracket ({lo}, {hi})"
            )


@dataclass(frozen=True)
class SweepPoint:
    rho: float
    mean_jobs: float
    ci_halfwidth: float
    verdict: str
    busy_periods: int


def theoretical_threshold(config: SystemConfig) -> float | str:
    """Critical load below which the configuration is known to be stable.

    Covers exponential service only. Heterogeneous speeds are known for
    d=1 (every server is a standalone queue) and for d=K with identical
    copies (the system behaves like one server of capacity mu * max speed).
    Homogeneous cases follow the policy/copy-mode table; anything else is
    reported as Unknown rather than guessed.
    """
    if not isinstance(config.service, Exponential):
        return UNKNOWN
    policy = PolicyId(config.policy)
    if policy is PolicyId.PRIORITY_EXAMPLE:
        return UNKNOWN
    total_speed = sum(config.speeds)
    if not config.homogeneous:
        if config.d == 1:
            return config.K * min(config.speeds) / total_speed
        if (
            config.d == config.K
            and config.copy_mode is CopyMode.IDENTICAL
            and policy in (PolicyId.FCFS, PolicyId.PS)
        ):
            return max(config.speeds) / total_speed
        return UNKNOWN
    if config.copy_mode is CopyMode.IID:
        return 1.0
    if policy is PolicyId.ROS:
        return 1.0
    if policy is PolicyId.PS:
        return 1.0 / config.d
    return stability_threshold_fcfs(config.K, config.d)


def _load_to_lam(config: SystemConfig, rho: float) -> float:
    return rho * config.mu * sum(config.speeds)


def _probe(
    config: SystemConfig, rho: float, horizon: float, seed_salt: int
) -> tuple[str, list[str]]:
    """Majority verdict over three replications at one offered load.

    Each replication starts from a seeded bulk state rather than empty. With
    identical copies the drift toward stability carries a finite-size bonus
    that fades roughly like 1/sqrt(jobs), so an empty start can idle below
    the boundary for astronomically long stretches while a seeded start
    shows the drift sign at the scale of the seed. Three early exits keep
    the cost per replication bounded: enough completed busy cycles settles
    the drained side, a job-count ceiling just past the divergence bar
    settles the growing side, and the horizon caps anything in between.
    """
    cfg = replace(config, lam=_load_to_lam(config, rho))
    votes = []
    for rep in range(PROBE_REPLICATIONS):
        m = simulate(
            cfg,
            RngSpec(master_seed=cfg.seed, stream_id=seed_salt * PROBE_REPLICATIONS + rep),
            StopRule(
                busy_periods=PROBE_BUSY_EXIT,
                horizon=horizon,
                max_events=PROBE_EVENT_CAP,
                max_jobs=PROBE_GROWTH_FACTOR * PROBE_SEED_JOBS,
            ),
            initial_jobs=PROBE_SEED_JOBS,
        )
        votes.append(m.verdict)
    counts = {v: votes.count(v) for v in set(votes)}
    for v in ("Stable-like", "Diverging"):
        if counts.get(v, 0) >= 2:
            return v, votes
    return "Inconclusive", votes


def estimate_boundary(
    config_template: SystemConfig,
    rho_range: tuple[float, float],
    tol: float = 0.05,
    budget: int = DEFAULT_BUDGET,
) -> BoundaryEstimate:
    """Bisect on the offered load until the stable/diverging bracket is narrow.

    Probe loads snap to a grid of half-tolerance steps anchored at the lower
    range endpoint. Center the range on the suspected threshold when one is
    known: midpoints then land either on the threshold itself, where the
    seeded state drains and the probe honestly reports the stable side, or
    at least half a tolerance away, where the drift is strong enough to
    certify within the probe horizon. Loads a small fraction of a tolerance
    above the threshold are undecidable at desk scale and the grid keeps the
    search away from them.

    Each probe runs a short stage first and repeats once with a four times
    longer horizon when the majority is inconclusive. A midpoint that stays
    inconclusive after the long stage triggers one sidestep probe halfway
    toward the diverging end, which is strictly easier to certify; the
    verdict is attributed to the load actually probed, so the bracket stays
    honest. If the sidestep is inconclusive too, the search stops with the
    best bracket so far. Stable verdicts only ever move the lower edge and
    diverging verdicts the upper edge, so the verdicts along load are
    monotone by construction.
    """
    lo, hi = rho_range
    if not (0.0 < lo < hi):
        raise ValidationError(f"need 0 < lo < hi, got ({lo}, {hi})")
    if tol < MIN_TOL:
        raise ValidationError(f"tolerance below resolution limit {MIN_TOL}: {tol}")
    mu = config_template.mu
    rate_sum = mu * sum(config_template.speeds)
    long_horizon = PROBE_HORIZON_SCALE * PROBE_SEED_JOBS / (0.25 * tol * rate_sum)
    short_horizon = long_horizon / 4.0
    step = 0.5 * tol
    anchor = lo
    trace: list[tuple[float, str]] = []
    cache: dict[float, str] = {}
    probes = 0

    def snap(rho: float) -> float:
        # ties between grid points round down: the stable side gives
        # reliable verdicts, the band just above the threshold does not
        k = math.ceil((rho - anchor) / step - 0.5 - 1e-9)
        return anchor + k * step

    def near_inconclusive(rho: float) -> bool:
        return any(
            abs(rho - load) < 0.5 * step + 1e-9
            for load, v in cache.items()
            if v == "Inconclusive"
        )

    def run_probe(rho: float) -> str:
        """Short stage, then one long retry; the verdict at rho, cached."""
        nonlocal probes
        key = round(rho, 12)
        if key in cache:
            return cache[key]
        verdict = "Inconclusive"
        for h in (short_horizon, long_horizon):
            verdict, _ = _probe(config_template, rho, h, seed_salt=probes)
            probes += 1
            trace.append((rho, verdict))
            if verdict != "Inconclusive":
                break
        cache[key] = verdict
        return verdict

    v_lo = run_probe(lo)
    v_hi = run_probe(hi)
    if v_lo == v_hi:
        raise NoBracket(
            f"verdicts agree at both endpoints of ({lo}, {hi}): {v_lo}"
        )
    if not (v_lo == "Stable-like" and v_hi == "Diverging"):
        raise NoBracket(
            f"expected stable at {lo} and diverging at {hi}, got {v_lo} / {v_hi}"
        )

    def give_up(at: float):
        raise BudgetExhausted(
            f"probe at {at:.4f} stayed inconclusive after retries",
            best_bracket=(lo, hi),
            verdict_trace=tuple(trace),
        )

    while hi - lo > tol + 1e-9:
        if probes >= budget:
            raise BudgetExhausted(
                f"budget of {budget} probes spent with bracket ({lo:.4f}, {hi:.4f})",
                best_bracket=(lo, hi),
                verdict_trace=tuple(trace),
            )
        mid = snap(0.5 * (lo + hi))
        if not (lo < mid < hi):
            mid = 0.5 * (lo + hi)
        at = mid
        verdict = "Inconclusive" if near_inconclusive(mid) else run_probe(mid)
        if verdict == "Inconclusive":
            side = snap(0.5 * (mid + hi))
            if not (mid < side < hi):
                side = 0.5 * (mid + hi)
            if near_inconclusive(side):
                give_up(side)
            at = side
            verdict = run_probe(side)
        if verdict == "Stable-like":
            lo = at
        elif verdict == "Diverging":
            hi = at
        else:
            give_up(at)

    return BoundaryEstimate(
        rho_star_empirical=0.5 * (lo + hi),
        rho_star_theory=theoretical_threshold(config_template),
        bracket=(lo, hi),
        verdict_trace=tuple(trace),
    )


def sweep(
    config_template: SystemConfig,
    rho_list: list[float],
    replications: int = 3,
    busy_periods: int = 4000,
    horizon: float | None = None,
    mode: BoundingMode = BoundingMode.EXACT,
) -> list[SweepPoint]:
    """Mean job count against offered load, one row per requested load.

    Verdicts along increasing load should switch from stable to diverging
    at most once; any point that breaks that order (a stable verdict above
    a diverging one) is flagged Inconclusive rather than trusted.
    """
    if not rho_list:
        raise ValidationError("rho_list is empty")
    if any(r <= 0 for r in rho_list):
        raise ValidationError("loads must be positive")
    points = []
    for rho in rho_list:
        cfg = replace(
            config_template,
            lam=_load_to_lam(config_template, rho),
            replications=replications,
        )
        cap = horizon if horizon is not None else 2000.0 / config_template.mu
        mean, ci, runs = replicated_time_average(
            cfg, StopRule(busy_periods=busy_periods, horizon=cap), mode=mode
        )
        votes = [r.verdict for r in runs]
        verdict = "Inconclusive"
        for v in ("Stable-like", "Diverging"):
            if votes.count(v) * 2 > len(votes):
                verdict = v
                break
        points.append(
            SweepPoint(
                rho=rho,
                mean_jobs=mean,
                ci_halfwidth=ci,
                verdict=verdict,
                busy_periods=sum(r.busy_periods_completed for r in runs),
            )
        )
    return _flag_non_monotone(points)


def _flag_non_monotone(points: list[SweepPoint]) -> list[SweepPoint]:
    """Demote verdicts that violate the single-crossing picture."""
    div_loads = [p.rho for p in points if p.verdict == "Diverging"]
    stable_loads = [p.rho for p in points if p.verdict == "Stable-like"]
    if not div_loads or not stable_loads:
        return points
    first_div = min(div_loads)
    last_stable = max(stable_loads)
    if last_stable < first_div:
        return points
    out = []
    for p in points:
        bad_stable = p.verdict == "Stable-like" and p.rho > first_div
        bad_div = p.verdict == "Diverging" and p.rho < last_stable
        if bad_stable or bad_div:
            p = SweepPoint(
                rho=p.rho,
                mean_jobs=p.mean_jobs,
                ci_halfwidth=p.ci_halfwidth,
                verdict="Inconclusive",
                busy_periods=p.busy_periods,
            )
        out.append(p)
    return out
