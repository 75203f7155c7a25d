"""Saturated in-service count: closed forms, exact solve, Monte Carlo."""

from __future__ import annotations

import pytest

from redlab.errors import NotClosedForm, ValidationError
from redlab.saturated import (
    EllBarResult,
    SaturatedState,
    ell_bar_closed_form,
    ell_bar_exact,
    ell_bar_mc,
    saturated_scan,
    stability_threshold_fcfs,
)
from redlab.model import build_type_table

# truncated-solve values, frozen once converged below 1e-6
ELL_BAR_4_2 = 2.877474906023896
ELL_BAR_5_3 = 2.7385893957021703
ELL_BAR_6_4 = 2.631193696421004


class TestClosedForms:
    def test_single_copy_fills_every_server(self):
        assert ell_bar_closed_form(6, 1).ell_bar == 6.0

    def test_full_replication_serves_one(self):
        assert ell_bar_closed_form(5, 5).ell_bar == 1.0

    def test_one_server_spare_serves_two(self):
        assert ell_bar_closed_form(5, 4).ell_bar == 2.0
        assert ell_bar_closed_form(3, 2).ell_bar == 2.0

    def test_middle_d_has_no_closed_form(self):
        with pytest.raises(NotClosedForm):
            ell_bar_closed_form(5, 2)

    def test_kd_validated(self):
        with pytest.raises(ValidationError):
            ell_bar_closed_form(3, 4)


class TestScan:
    def test_oldest_always_serves(self):
        # K=3: masks 0b011, 0b011, 0b100 -> jobs 0 and 2 in service
        assert saturated_scan([0b011, 0b011, 0b100], 3) == [0, 2]

    def test_stops_once_all_claimed(self):
        assert saturated_scan([0b11, 0b01, 0b10], 2) == [0]
        assert saturated_scan([0b01, 0b10, 0b11], 2) == [0, 1]

    def test_empty_queue(self):
        assert saturated_scan([], 4) == []


class TestSaturatedState:
    def test_flat_round_trip(self):
        st = SaturatedState(in_service=(0, 5, 2), blocked_runs=(1, 3))
        assert SaturatedState.from_flat(st.to_flat()) == st

    def test_run_count_validated(self):
        with pytest.raises(ValidationError):
            SaturatedState(in_service=(0, 1), blocked_runs=())

    def test_validate_against_table(self):
        table = build_type_table(4, 2)
        ok = SaturatedState(
            in_service=(table.id_of((0, 1)), table.id_of((2, 3))), blocked_runs=(0,))
        ok.validate(table)
        blocked = SaturatedState(
            in_service=(table.id_of((0, 1)), table.id_of((0, 1))), blocked_runs=(0,))
        with pytest.raises(ValidationError, match="unclaimed"):
            blocked.validate(table)
        partial = SaturatedState(in_service=(table.id_of((0, 1)),), blocked_runs=())
        with pytest.raises(ValidationError, match="every server"):
            partial.validate(table)


class TestExactSolve:
    def test_frozen_values(self):
        for K, want in [(4, ELL_BAR_4_2), (5, ELL_BAR_5_3), (6, ELL_BAR_6_4)]:
            res = ell_bar_exact(K)
            assert res.method == "TruncatedSolve"
            assert res.error_bound < 1e-6
            assert res.ell_bar == pytest.approx(want, abs=2e-6)

    def test_d_restriction(self):
        with pytest.raises(ValidationError):
            ell_bar_exact(5, d=2)
        with pytest.raises(ValidationError):
            ell_bar_exact(3)


class TestMonteCarlo:
    def test_matches_exact_within_ci(self):
        exact = ELL_BAR_4_2
        res = ell_bar_mc(4, 2, departures=100_000, rng=42)
        assert res.method == "MonteCarlo"
        assert abs(res.ell_bar - exact) < 3 * res.error_bound

    def test_matches_closed_form_corner(self):
        # d = K-1 keeps exactly two jobs in service, so MC nails it with zero CI
        res = ell_bar_mc(3, 2, departures=100_000, rng=7)
        assert res.ell_bar == 2.0
        assert res.error_bound == 0.0

    def test_reproducible_by_seed(self):
        a = ell_bar_mc(4, 2, departures=100_000, rng=11)
        b = ell_bar_mc(4, 2, departures=100_000, rng=11)
        assert a.ell_bar == b.ell_bar

    def test_departure_floor(self):
        with pytest.raises(ValidationError):
            ell_bar_mc(4, 2, departures=5_000)


class TestResultEnvelope:
    def test_range_check(self):
        # ceil(K/d) <= ell_bar <= K-d+1 must hold for any reported value
        with pytest.raises(ValidationError, match="outside"):
            EllBarResult(K=4, d=2, ell_bar=3.5, method="MonteCarlo", error_bound=0.0)

    def test_threshold_routes(self):
        assert stability_threshold_fcfs(3, 2) == pytest.approx(2.0 / 3.0)
        assert stability_threshold_fcfs(4, 4) == pytest.approx(0.25)
        assert stability_threshold_fcfs(4, 2) == pytest.approx(ELL_BAR_4_2 / 4.0, abs=1e-6)

    def test_threshold_mc_route(self):
        got = stability_threshold_fcfs(6, 2, departures=100_000, rng=5)
        assert 0.7 < got < 0.85
