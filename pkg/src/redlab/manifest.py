"""Experiment manifests: named runs with expected-value anchors and a report.

A manifest is a JSON document listing experiments to execute. Each experiment
names a subcommand, its parameters, and zero or more anchors: expected values
for named result metrics, each carrying a tolerance and a provenance tag. The
runner executes every experiment, writes one CSV per experiment plus a
pass/fail report, and stamps everything with the manifest hash so a rerun
with an equal manifest is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .config_io import (
    config_hash,
    csv_text,
    format_number,
    parse_config_text,
    provenance_line,
)
from .engine import BoundingMode, StopRule, replicated_time_average, simulate
from .errors import RedlabError, ValidationError
from .fluid import FluidState, integrate_fluid
from .lab import estimate_boundary, sweep, theoretical_threshold
from .lighttraffic import lt_result, optimal_redundancy
from .model import RngSpec, SystemConfig, build_type_table
from .policies import PolicyId
from .saturated import ell_bar_closed_form, ell_bar_exact, ell_bar_mc

ANCHOR_TAGS = ("PAPER", "TRIVIAL", "DERIVED")
SUBCOMMANDS = ("simulate", "saturate", "sweep", "boundary", "lt", "fluid")
SEED_ENV_VAR = "REDLAB_SEED"


@dataclass(frozen=True)
class Anchor:
    """One expected value: metric name, expectation, tolerance, provenance tag."""

    metric: str
    expect: float | str
    tol: float = 0.0
    tag: str = "DERIVED"

    def __post_init__(self):
        if self.tag not in ANCHOR_TAGS:
            raise ValidationError(
                f"anchor tag must be one of {ANCHOR_TAGS}, got {self.tag!r}"
            )
        if self.tol < 0:
            raise ValidationError(f"anchor tolerance must be nonnegative, got {self.tol}")

    def check(self, got) -> bool:
        if isinstance(self.expect, str):
            return str(got) == self.expect
        try:
            return abs(float(got) - float(self.expect)) <= self.tol
        except (TypeError, ValueError):
            return False


@dataclass(frozen=True)
class Experiment:
    """One named run: subcommand, its parameters, and the anchors to check."""

    name: str
    subcommand: str
    params: tuple[tuple[str, object], ...]
    anchors: tuple[Anchor, ...] = ()

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ValidationError(
                f"unknown subcommand {self.subcommand!r}; expected one of {SUBCOMMANDS}"
            )
        if not self.name or "/" in self.name:
            raise ValidationError(f"experiment name must be a plain label, got {self.name!r}")

    def param_dict(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class ExperimentManifest:
    experiments: tuple[Experiment, ...]
    output_dir: str = "out"

    def __post_init__(self):
        names = [e.name for e in self.experiments]
        if len(set(names)) != len(names):
            raise ValidationError("experiment names must be unique")


@dataclass(frozen=True)
class AnchorOutcome:
    experiment: str
    subcommand: str
    metric: str
    tag: str
    expected: str
    got: str
    tol: float
    status: str  # PASS, FAIL, ERROR


@dataclass(frozen=True)
class ManifestReport:
    manifest_hash: str
    outcomes: tuple[AnchorOutcome, ...]

    @property
    def any_fail(self) -> bool:
        return any(o.status != "PASS" for o in self.outcomes)

    def summary_lines(self) -> list[str]:
        lines = []
        for o in self.outcomes:
            lines.append(
                f"[{o.status}] {o.experiment} {o.metric} [{o.tag}]: "
                f"expected {o.expected} +- {format_number(o.tol)}, got {o.got}"
            )
        n_pass = sum(1 for o in self.outcomes if o.status == "PASS")
        lines.append(f"{n_pass}/{len(self.outcomes)} anchors pass")
        return lines


def manifest_from_dict(data: dict) -> ExperimentManifest:
    """Build a validated manifest from parsed JSON."""
    if not isinstance(data, dict):
        raise ValidationError("manifest must be a JSON object")
    unknown = set(data) - {"experiments", "output_dir"}
    if unknown:
        raise ValidationError(f"unknown manifest keys: {sorted(unknown)}")
    experiments = []
    for entry in data.get("experiments", []):
        bad = set(entry) - {"name", "subcommand", "params", "anchors"}
        if bad:
            raise ValidationError(f"unknown experiment keys: {sorted(bad)}")
        anchors = tuple(
            Anchor(
                metric=a["metric"],
                expect=a["expect"],
                tol=float(a.get("tol", 0.0)),
                tag=a.get("tag", "DERIVED"),
            )
            for a in entry.get("anchors", [])
        )
        experiments.append(
            Experiment(
                name=entry["name"],
                subcommand=entry["subcommand"],
                params=tuple(sorted(entry.get("params", {}).items())),
                anchors=anchors,
            )
        )
    return ExperimentManifest(
        experiments=tuple(experiments),
        output_dir=data.get("output_dir", "out"),
    )


def load_manifest(path) -> ExperimentManifest:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest is not valid JSON: {exc}") from None
    return manifest_from_dict(data)


def manifest_hash(manifest: ExperimentManifest) -> str:
    """Digest of the canonical JSON form; stamps every output."""
    payload = {
        "output_dir": manifest.output_dir,
        "experiments": [
            {
                "name": e.name,
                "subcommand": e.subcommand,
                "params": {k: v for k, v in e.params},
                "anchors": [
                    {"metric": a.metric, "expect": a.expect, "tol": a.tol, "tag": a.tag}
                    for a in e.anchors
                ],
            }
            for e in manifest.experiments
        ],
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def _config_from_params(params: dict, seed_override: int | None) -> SystemConfig:
    if "config" not in params:
        raise ValidationError("experiment needs a 'config' parameter (flat key=value text)")
    config = parse_config_text(params["config"])
    if seed_override is not None:
        config = replace(config, seed=seed_override)
    return config


def _stop_rule_from_params(params: dict, paper_scale: bool) -> StopRule:
    busy = params.get("busy_periods")
    horizon = params.get("horizon")
    max_events = params.get("max_events")
    if busy is None and horizon is None and max_events is None:
        busy = 1_000_000 if paper_scale else 20_000
    if busy is not None and paper_scale:
        busy = max(int(busy), 1_000_000)
    return StopRule(
        busy_periods=None if busy is None else int(busy),
        horizon=None if horizon is None else float(horizon),
        max_events=None if max_events is None else int(max_events),
    )


def run_simulate(params: dict, seed_override=None, paper_scale=False):
    """Replicated time-average run; one metrics CSV row per replication."""
    config = _config_from_params(params, seed_override)
    stop = _stop_rule_from_params(params, paper_scale)
    mode = BoundingMode(params.get("mode", "exact"))
    mean, ci, runs = replicated_time_average(config, stop, mode=mode)
    rho = config.lam / (config.mu * sum(config.speeds))
    header = ["config_hash", "seed", "rho", "time_avg_jobs", "ci", "busy_periods", "slope", "verdict"]
    rows = [
        (
            config_hash(config),
            config.seed,
            rho,
            m.time_avg_jobs,
            m.ci_halfwidth,
            m.busy_periods_completed,
            m.divergence_slope,
            m.verdict,
        )
        for m in runs
    ]
    votes = [m.verdict for m in runs]
    verdict = "Inconclusive"
    for v in ("Stable-like", "Diverging"):
        if votes.count(v) * 2 > len(votes):
            verdict = v
            break
    metrics = {
        "time_avg_jobs": mean,
        "ci": ci,
        "busy_periods": sum(m.busy_periods_completed for m in runs),
        "verdict": verdict,
        "max_slope": max(m.divergence_slope for m in runs),
    }
    return metrics, header, rows, None


def run_saturate(params: dict, seed_override=None, paper_scale=False):
    """Saturated-system mean in-service count for one (K, d)."""
    K = int(params["K"])
    d = int(params["d"])
    method = params.get("method", "auto")
    departures = int(params.get("departures", 1_000_000 if paper_scale else 200_000))
    seed = int(params.get("seed", 12345)) if seed_override is None else seed_override
    if method == "auto":
        if d in (1, K - 1, K):
            method = "closed"
        elif K - d == 2 and K <= 8:
            method = "exact"
        else:
            method = "mc"
    if method == "closed":
        res = ell_bar_closed_form(K, d)
    elif method == "exact":
        res = ell_bar_exact(K, d)
    elif method == "mc":
        res = ell_bar_mc(K, d, departures=departures, rng=seed)
    else:
        raise ValidationError(f"unknown saturate method {method!r}")
    header = ["K", "d", "method", "ell_bar", "ell_bar_over_K", "err"]
    rows = [(K, d, res.method, res.ell_bar, res.ell_bar / K, res.error_bound)]
    metrics = {
        "ell_bar": res.ell_bar,
        "ell_bar_over_K": res.ell_bar / K,
        "err": res.error_bound,
    }
    return metrics, header, rows, f"config_hash=saturate-K{K}-d{d},seed={seed}"


def run_sweep(params: dict, seed_override=None, paper_scale=False):
    """Mean jobs against load over a list of offered loads."""
    config = _config_from_params(params, seed_override)
    rho_list = [float(r) for r in params["rho_list"]]
    reps = int(params.get("reps", config.replications))
    busy = int(params.get("busy_periods", 100_000 if paper_scale else 4_000))
    horizon = params.get("horizon")
    points = sweep(
        config,
        rho_list,
        replications=reps,
        busy_periods=busy,
        horizon=None if horizon is None else float(horizon),
    )
    header = ["rho", "mean_jobs", "ci", "verdict"]
    rows = [(p.rho, p.mean_jobs, p.ci_halfwidth, p.verdict) for p in points]
    stable = [p.rho for p in points if p.verdict == "Stable-like"]
    diverging = [p.rho for p in points if p.verdict == "Diverging"]
    metrics = {
        "n_points": len(points),
        "max_stable_rho": max(stable) if stable else "none",
        "min_diverging_rho": min(diverging) if diverging else "none",
    }
    return metrics, header, rows, provenance_line(config)


def run_boundary(params: dict, seed_override=None, paper_scale=False):
    """Stability boundary bracket for one configuration."""
    config = _config_from_params(params, seed_override)
    lo = float(params["lo"])
    hi = float(params["hi"])
    tol = float(params.get("tol", 0.05))
    est = estimate_boundary(config, (lo, hi), tol=tol)
    b_lo, b_hi = est.bracket
    theory = est.rho_star_theory
    header = ["lo", "hi", "rho_star_empirical", "rho_star_theory", "probes"]
    rows = [(b_lo, b_hi, est.rho_star_empirical, theory, len(est.verdict_trace))]
    metrics = {
        "bracket_lo": b_lo,
        "bracket_hi": b_hi,
        "width": b_hi - b_lo,
        "rho_star_empirical": est.rho_star_empirical,
        "rho_star_theory": theory,
    }
    return metrics, header, rows, provenance_line(config)


def run_lt(params: dict, seed_override=None, paper_scale=False):
    """Light-traffic mean-job approximation for one system."""
    policy = PolicyId(params.get("policy", "fcfs"))
    K = int(params["K"])
    d = int(params["d"])
    lam = float(params.get("lambda", 0.05))
    mu = float(params.get("mu", 1.0))
    res = lt_result(policy, K, d, lam, mu)
    header = ["policy", "K", "d", "lambda", "mu", "lt_mean_jobs", "optimal_d"]
    rows = [(policy.value, K, d, lam, mu, res.mean_jobs_lt, res.optimal_d)]
    metrics = {
        "lt_mean_jobs": res.mean_jobs_lt,
        "optimal_d": res.optimal_d,
    }
    return metrics, header, rows, f"config_hash=lt-{policy.value}-K{K}-d{d},seed=0"


def run_fluid(params: dict, seed_override=None, paper_scale=False):
    """Fluid trajectory from a given initial mass vector."""
    config = _config_from_params(params, seed_override)
    field = params.get("field", "iid")
    t_end = float(params.get("t_end", 10.0))
    dt = float(params.get("dt", 0.001))
    table = build_type_table(config.K, config.d)
    init = params.get("init")
    if init is None:
        raise ValidationError("fluid experiment needs 'init': one mass per type")
    masses = [float(v) for v in init]
    state = FluidState(table, masses)
    traj = integrate_fluid(config, state, field, t_end, dt)
    header = ["t"] + [f"m_{s + 1}" for s in range(config.K)] + ["total"]
    rows = []
    for i, t in enumerate(traj.times):
        per_server = traj.server_masses[i]
        rows.append((float(t), *[float(v) for v in per_server], float(traj.totals[i])))
    empty_at = None
    for i, total in enumerate(traj.totals):
        if total <= 1e-9:
            empty_at = float(traj.times[i])
            break
    metrics = {
        "final_total": float(traj.totals[-1]),
        "empty_time": "never" if empty_at is None else empty_at,
    }
    return metrics, header, rows, provenance_line(config)


_RUNNERS = {
    "simulate": run_simulate,
    "saturate": run_saturate,
    "sweep": run_sweep,
    "boundary": run_boundary,
    "lt": run_lt,
    "fluid": run_fluid,
}


def run_experiment(experiment: Experiment, seed_override=None, paper_scale=False):
    """Execute one experiment; returns (metrics, header, rows, provenance)."""
    runner = _RUNNERS[experiment.subcommand]
    return runner(experiment.param_dict(), seed_override, paper_scale)


def _run_entry(args):
    experiment, seed_override, paper_scale = args
    try:
        return experiment.name, run_experiment(experiment, seed_override, paper_scale), None
    except RedlabError as exc:
        return experiment.name, None, f"{type(exc).__name__}: {exc}"


def run_manifest(
    manifest: ExperimentManifest,
    out_dir=None,
    jobs: int = 1,
    paper_scale: bool = False,
) -> ManifestReport:
    """Execute all experiments, write per-experiment CSVs and the report.

    The REDLAB_SEED environment variable, when set, overrides every
    experiment seed for exploratory runs. Experiments may run concurrently
    up to the jobs limit; the report keeps manifest order regardless.
    """
    seed_override = None
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            seed_override = int(env_seed)
        except ValueError:
            raise ValidationError(
                f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}"
            ) from None
    digest = manifest_hash(manifest)
    target = Path(out_dir if out_dir is not None else manifest.output_dir)
    target.mkdir(parents=True, exist_ok=True)

    work = [(e, seed_override, paper_scale) for e in manifest.experiments]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_entry, work))
    else:
        results = [_run_entry(w) for w in work]
    by_name = {name: (payload, err) for name, payload, err in results}

    outcomes = []
    for experiment in manifest.experiments:
        payload, err = by_name[experiment.name]
        if err is not None:
            for anchor in experiment.anchors or (Anchor(metric="-", expect="-"),):
                outcomes.append(
                    AnchorOutcome(
                        experiment=experiment.name,
                        subcommand=experiment.subcommand,
                        metric=anchor.metric,
                        tag=anchor.tag,
                        expected=str(anchor.expect),
                        got=err,
                        tol=anchor.tol,
                        status="ERROR",
                    )
                )
            continue
        metrics, header, rows, provenance = payload
        stamp = f"manifest_hash={digest}" + ("" if provenance is None else f",{provenance}")
        (target / f"{experiment.name}.csv").write_text(
            csv_text(header, rows, provenance=stamp), encoding="utf-8", newline=""
        )
        for anchor in experiment.anchors:
            if anchor.metric not in metrics:
                status, got = "ERROR", f"unknown metric {anchor.metric!r}"
            else:
                got = metrics[anchor.metric]
                status = "PASS" if anchor.check(got) else "FAIL"
                got = format_number(got) if isinstance(got, float) else str(got)
            outcomes.append(
                AnchorOutcome(
                    experiment=experiment.name,
                    subcommand=experiment.subcommand,
                    metric=anchor.metric,
                    tag=anchor.tag,
                    expected=(
                        format_number(anchor.expect)
                        if isinstance(anchor.expect, float)
                        else str(anchor.expect)
                    ),
                    got=got,
                    tol=anchor.tol,
                    status=status,
                )
            )

    report = ManifestReport(manifest_hash=digest, outcomes=tuple(outcomes))
    header = ["experiment", "subcommand", "metric", "tag", "expected", "got", "tol", "status"]
    rows = [
        (o.experiment, o.subcommand, o.metric, o.tag, o.expected, o.got, o.tol, o.status)
        for o in report.outcomes
    ]
    (target / "report.csv").write_text(
        csv_text(header, rows, provenance=f"manifest_hash={digest}"),
        encoding="utf-8",
        newline="",
    )
    return report
