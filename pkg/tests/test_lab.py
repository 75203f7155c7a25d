"""Threshold table, load sweeps, and the empirical boundary search."""

from __future__ import annotations

import pytest

from redlab.errors import BudgetExhausted, NoBracket, ValidationError
from redlab.lab import (
    SweepPoint,
    UNKNOWN,
    _flag_non_monotone,
    estimate_boundary,
    sweep,
    theoretical_threshold,
)
from redlab.model import CopyMode, Deterministic, SystemConfig

ELL_BAR_3_2 = 2.0


def _cfg(**kw):
    base = dict(K=3, d=2, lam=1.0, mu=1.0, seed=1)
    base.update(kw)
    return SystemConfig(**base)


class TestTheoreticalThreshold:
    def test_iid_copies_are_always_critical_at_one(self):
        for policy in ("fcfs", "ps", "ros"):
            assert theoretical_threshold(_cfg(policy=policy)) == 1.0

    def test_identical_ros_matches_iid(self):
        cfg = _cfg(copy_mode=CopyMode.IDENTICAL, policy="ros")
        assert theoretical_threshold(cfg) == 1.0

    def test_identical_ps_loses_a_factor_d(self):
        cfg = _cfg(K=5, d=4, copy_mode=CopyMode.IDENTICAL, policy="ps")
        assert theoretical_threshold(cfg) == 0.25

    def test_identical_fcfs_uses_saturated_throughput(self):
        cfg = _cfg(copy_mode=CopyMode.IDENTICAL, policy="fcfs")
        assert theoretical_threshold(cfg) == pytest.approx(ELL_BAR_3_2 / 3.0)

    def test_single_copy_heterogeneous(self):
        cfg = _cfg(K=3, d=1, speeds=(1.0, 2.0, 3.0))
        assert theoretical_threshold(cfg) == pytest.approx(0.5)

    def test_full_replication_heterogeneous_identical(self):
        for policy in ("fcfs", "ps"):
            cfg = _cfg(K=3, d=3, speeds=(1.0, 2.0, 3.0),
                       copy_mode=CopyMode.IDENTICAL, policy=policy)
            assert theoretical_threshold(cfg) == pytest.approx(0.5)

    def test_unknown_cases_stay_unknown(self):
        assert theoretical_threshold(
            _cfg(K=3, d=2, speeds=(1.0, 2.0, 3.0))) == UNKNOWN
        assert theoretical_threshold(
            _cfg(service=Deterministic(1.0))) == UNKNOWN
        assert theoretical_threshold(_cfg(policy="priority_example")) == UNKNOWN
        assert theoretical_threshold(
            _cfg(K=3, d=3, speeds=(1.0, 2.0, 3.0), policy="ros",
                 copy_mode=CopyMode.IDENTICAL)) == UNKNOWN


class TestSweep:
    def test_two_stable_loads(self, mm1_config):
        points = sweep(mm1_config, [0.3, 0.6], replications=2, busy_periods=400)
        assert [p.rho for p in points] == [0.3, 0.6]
        assert all(p.verdict == "Stable-like" for p in points)
        assert points[0].mean_jobs < points[1].mean_jobs
        assert all(p.busy_periods == 800 for p in points)

    def test_empty_and_invalid_loads_rejected(self, mm1_config):
        with pytest.raises(ValidationError):
            sweep(mm1_config, [])
        with pytest.raises(ValidationError):
            sweep(mm1_config, [0.5, -0.1])


class TestNonMonotoneFlag:
    @staticmethod
    def _pt(rho, verdict):
        return SweepPoint(rho=rho, mean_jobs=1.0, ci_halfwidth=0.1,
                          verdict=verdict, busy_periods=100)

    def test_single_crossing_untouched(self):
        pts = [self._pt(0.5, "Stable-like"), self._pt(0.9, "Diverging")]
        assert _flag_non_monotone(pts) == pts

    def test_inversion_demoted(self):
        pts = [self._pt(0.5, "Diverging"), self._pt(0.9, "Stable-like")]
        flagged = _flag_non_monotone(pts)
        assert all(p.verdict == "Inconclusive" for p in flagged)

    def test_only_offenders_demoted(self):
        pts = [
            self._pt(0.4, "Stable-like"),
            self._pt(0.6, "Diverging"),
            self._pt(0.8, "Stable-like"),
            self._pt(1.0, "Diverging"),
        ]
        flagged = _flag_non_monotone(pts)
        assert [p.verdict for p in flagged] == [
            "Stable-like", "Inconclusive", "Inconclusive", "Diverging"]


class TestBoundary:
    def test_single_server_bracket_contains_one(self, mm1_config):
        est = estimate_boundary(mm1_config, (0.5, 2.0), tol=0.5)
        lo, hi = est.bracket
        assert lo < 1.0 <= hi
        assert hi - lo <= 0.5 + 1e-9
        assert est.rho_star_theory == 1.0
        assert est.verdict_trace[0][1] == "Stable-like"

    def test_no_bracket_when_both_sides_stable(self, mm1_config):
        with pytest.raises(NoBracket):
            estimate_boundary(mm1_config, (0.2, 0.4), tol=0.1)

    def test_budget_exhaustion_reports_best_bracket(self, mm1_config):
        with pytest.raises(BudgetExhausted) as err:
            estimate_boundary(mm1_config, (0.5, 2.0), tol=0.5, budget=1)
        assert err.value.best_bracket == (0.5, 2.0)
        assert len(err.value.verdict_trace) >= 2

    def test_range_and_tol_validated(self, mm1_config):
        with pytest.raises(ValidationError):
            estimate_boundary(mm1_config, (1.0, 0.5), tol=0.1)
        with pytest.raises(ValidationError):
            estimate_boundary(mm1_config, (0.5, 1.5), tol=0.001)
