"""Event-driven simulator: exact textbook cases, determinism, verdicts."""

from __future__ import annotations

import dataclasses
import math

import pytest

from redlab.engine import (
    BoundingMode,
    SimState,
    StopRule,
    advance_to_next_event,
    replicated_time_average,
    seed_initial_jobs,
    simulate,
)
from redlab.errors import ValidationError
from redlab.model import CopyMode, DegenerateHyperExp, RngSpec, SystemConfig


class TestStopRule:
    def test_needs_some_criterion(self):
        with pytest.raises(ValidationError):
            StopRule()

    def test_rejects_nonpositive_values(self):
        with pytest.raises(ValidationError):
            StopRule(horizon=-1.0)
        with pytest.raises(ValidationError):
            StopRule(busy_periods=0)


class TestSingleServer:
    def test_mean_jobs_matches_mm1(self, mm1_config):
        # rho / (1 - rho) = 1 at half load
        metrics = simulate(mm1_config, stop=StopRule(busy_periods=4000))
        assert metrics.verdict == "Stable-like"
        assert abs(metrics.time_avg_jobs - 1.0) < max(3 * metrics.ci_halfwidth, 0.02)
        assert metrics.busy_periods_completed == 4000
        assert metrics.jobs_departed <= metrics.jobs_arrived

    def test_full_replication_identical_collapses_to_one_server(self):
        # d = K with identical copies: every server holds the same copy, so
        # the system is a single M/M/1 at the fastest speed
        config = SystemConfig(K=3, d=3, lam=0.5, mu=1.0,
                              copy_mode=CopyMode.IDENTICAL, policy="fcfs", seed=7)
        metrics = simulate(config, stop=StopRule(busy_periods=4000))
        assert abs(metrics.time_avg_jobs - 1.0) < max(3 * metrics.ci_halfwidth, 0.03)


class TestDeterminism:
    def test_same_stream_same_run(self, mm1_config):
        stop = StopRule(busy_periods=500)
        a = simulate(mm1_config, RngSpec(mm1_config.seed, 0), stop)
        b = simulate(mm1_config, RngSpec(mm1_config.seed, 0), stop)
        assert a == b

    def test_streams_are_independent(self, mm1_config):
        stop = StopRule(busy_periods=500)
        a = simulate(mm1_config, RngSpec(mm1_config.seed, 0), stop)
        b = simulate(mm1_config, RngSpec(mm1_config.seed, 1), stop)
        assert a.time_avg_jobs != b.time_avg_jobs


class TestZeroRequirements:
    def test_zero_sojourn_jobs_never_occupy_the_system(self):
        config = SystemConfig(K=2, d=2, lam=0.5, mu=1.0,
                              service=DegenerateHyperExp(rate=1.0, p=0.5),
                              copy_mode=CopyMode.IDENTICAL, seed=3)
        trace = []
        metrics = simulate(config, stop=StopRule(busy_periods=300), trace=trace)
        flash = [r for r in trace if r.kind == "arrival" and r.zero_sojourn]
        assert flash, "p=0.5 must produce zero-requirement arrivals"
        departed_ids = {r.job_id for r in trace if r.kind == "departure"}
        assert not departed_ids & {r.job_id for r in flash}
        departures = sum(1 for r in trace if r.kind == "departure")
        assert departures + len(flash) == metrics.jobs_departed

    def test_trace_job_count_balances(self):
        config = SystemConfig(K=3, d=2, lam=1.0, mu=1.0, seed=9, policy="ps")
        trace = []
        simulate(config, stop=StopRule(busy_periods=200), trace=trace)
        n = 0
        for rec in trace:
            if rec.kind == "arrival" and not rec.zero_sojourn:
                n += 1
            elif rec.kind == "departure":
                n -= 1
                assert rec.server >= 0
            assert rec.n_total == n
        assert n >= 0


class TestVerdicts:
    def test_overloaded_run_diverges(self):
        config = SystemConfig(K=1, d=1, lam=3.0, mu=1.0, seed=4)
        metrics = simulate(config, stop=StopRule(horizon=200.0))
        assert metrics.verdict == "Diverging"
        assert metrics.divergence_slope > 0.03

    def test_seeded_stable_run_drains(self, mm1_config):
        metrics = simulate(mm1_config, stop=StopRule(horizon=300.0),
                           initial_jobs=100)
        assert metrics.verdict == "Stable-like"
        assert metrics.jobs_departed > 100

    def test_max_jobs_cuts_the_run_short(self):
        config = SystemConfig(K=1, d=1, lam=3.0, mu=1.0, seed=4)
        metrics = simulate(
            config, stop=StopRule(horizon=1e9, max_jobs=500))
        assert metrics.jobs_arrived - metrics.jobs_departed >= 500
        assert metrics.clock_end < 1e9

    def test_never_regenerated_flag(self):
        # near-critical seeded run, horizon far too short to empty
        config = SystemConfig(K=1, d=1, lam=0.95, mu=1.0, seed=8)
        metrics = simulate(config, stop=StopRule(busy_periods=50, horizon=20.0),
                           initial_jobs=400)
        assert metrics.busy_periods_completed == 0
        assert metrics.never_regenerated


class TestBoundingModes:
    def test_upper_bound_servers_decompose(self):
        # without cancellation each server is its own M/M/1 at load
        # lam*d/K = 0.6, so per-server mean copy counts sit near 1.5
        config = SystemConfig(K=3, d=2, lam=0.9, mu=1.0,
                              copy_mode=CopyMode.IDENTICAL, policy="ps", seed=21)
        metrics = simulate(config, stop=StopRule(busy_periods=4000),
                           mode=BoundingMode.PS_UPPER_BOUND)
        assert len(metrics.time_avg_copies_by_server) == 3
        for m, ci in zip(metrics.time_avg_copies_by_server,
                         metrics.copies_ci_by_server):
            assert abs(m - 1.5) < max(4 * ci, 0.1)

    def test_lower_bound_runs_and_regenerates(self, small_identical_ps):
        metrics = simulate(small_identical_ps, stop=StopRule(busy_periods=2000),
                           mode=BoundingMode.PS_LOWER_BOUND)
        assert metrics.verdict == "Stable-like"
        assert metrics.busy_periods_completed == 2000
        assert math.isfinite(metrics.ci_halfwidth)


class TestReplication:
    def test_pooled_estimate_uses_all_streams(self, mm1_config):
        config = dataclasses.replace(mm1_config, replications=3)
        mean, ci, runs = replicated_time_average(
            config, StopRule(busy_periods=800))
        assert len(runs) == 3
        assert abs(mean - 1.0) < max(3 * ci, 0.03)
        assert len({r.time_avg_jobs for r in runs}) == 3

    def test_seeding_after_start_rejected(self, mm1_config):
        state = SimState(mm1_config, RngSpec(1, 0))
        advance_to_next_event(state)
        with pytest.raises(ValidationError):
            seed_initial_jobs(state, 5)
