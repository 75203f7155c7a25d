"""Low-load closed forms, the sampling oracle, and the optimal copy count."""

from __future__ import annotations

import math

import pytest

from redlab.errors import ValidationError
from redlab.lighttraffic import (
    lt_first_derivative_oracle,
    lt_mean_jobs,
    lt_result,
    optimal_redundancy,
    redundancy_ties,
)
from redlab.policies import PolicyId


class TestClosedForm:
    def test_pinned_values(self):
        # lam/mu + coeff * (lam/mu)^2 / C(5,2) at lam = 0.2:
        # fcfs/ros 0.2 + 1.5*0.04/10 = 0.206, ps 0.2 + 0.04/10 = 0.204
        assert lt_mean_jobs(PolicyId.FCFS, 5, 2, 0.2, 1.0) == pytest.approx(0.206)
        assert lt_mean_jobs(PolicyId.ROS, 5, 2, 0.2, 1.0) == pytest.approx(0.206)
        assert lt_mean_jobs(PolicyId.PS, 5, 2, 0.2, 1.0) == pytest.approx(0.204)

    def test_fcfs_and_ros_coincide_everywhere(self):
        for K, d, lam in [(3, 2, 0.1), (6, 3, 0.4), (8, 1, 0.05)]:
            assert lt_mean_jobs(PolicyId.FCFS, K, d, lam, 1.0) == lt_mean_jobs(
                PolicyId.ROS, K, d, lam, 1.0)

    def test_ps_never_above_fcfs(self):
        for K, d in [(4, 2), (5, 5), (7, 3)]:
            assert lt_mean_jobs(PolicyId.PS, K, d, 0.3, 1.0) <= lt_mean_jobs(
                PolicyId.FCFS, K, d, 0.3, 1.0)

    def test_quadratic_term_scales_with_type_count(self):
        # doubling the number of types halves the interference correction
        lam, mu = 0.2, 1.0
        base = lam / mu
        for K, d in [(4, 2), (6, 2), (6, 3)]:
            extra = lt_mean_jobs(PolicyId.PS, K, d, lam, mu) - base
            assert extra == pytest.approx((lam / mu) ** 2 / math.comb(K, d))

    def test_validation(self):
        with pytest.raises(ValidationError):
            lt_mean_jobs(PolicyId.FCFS, 2, 3, 0.1, 1.0)
        with pytest.raises(ValidationError):
            lt_mean_jobs(PolicyId.FCFS, 2, 1, -0.1, 1.0)
        with pytest.raises(ValidationError):
            lt_mean_jobs(PolicyId.PRIORITY_EXAMPLE, 3, 2, 0.1, 1.0)

    def test_result_bundle(self):
        res = lt_result(PolicyId.PS, 5, 2, 0.2, 1.0)
        assert res.mean_jobs_lt == pytest.approx(0.204)
        assert res.optimal_d == 2


class TestOracle:
    """The case-analysis integral, evaluated without the closed form's algebra."""

    def test_ps_coefficient_near_one_over_types(self):
        got = lt_first_derivative_oracle(PolicyId.PS, K=1, d=1, seed=7)
        assert got == pytest.approx(1.0, rel=0.02)

    def test_fcfs_coefficient_near_one_over_types(self):
        # the case split integrates to 1/mu^2 per same-type pair, same as PS
        got = lt_first_derivative_oracle(PolicyId.FCFS, K=1, d=1, seed=7)
        assert got == pytest.approx(1.0, rel=0.02)

    def test_type_count_scaling(self):
        one = lt_first_derivative_oracle(PolicyId.PS, K=1, d=1, seed=3)
        ten = lt_first_derivative_oracle(PolicyId.PS, K=5, d=2, seed=3)
        assert ten == pytest.approx(one / 10.0)

    def test_sample_floor_enforced(self):
        with pytest.raises(ValidationError):
            lt_first_derivative_oracle(PolicyId.PS, samples=1000)


class TestOptimalRedundancy:
    def test_half_of_k(self):
        assert [optimal_redundancy(K) for K in range(1, 9)] == [1, 1, 1, 2, 2, 3, 3, 4]

    def test_ties(self):
        assert redundancy_ties(1) == (1,)
        assert redundancy_ties(4) == (2,)
        assert redundancy_ties(5) == (2, 3)
        assert redundancy_ties(9) == (4, 5)

    def test_minimizes_the_quadratic_term(self):
        for K in (2, 5, 8):
            costs = {d: lt_mean_jobs(PolicyId.PS, K, d, 0.3, 1.0) for d in range(1, K + 1)}
            best = min(costs.values())
            winners = tuple(d for d, v in costs.items() if v == pytest.approx(best))
            assert winners == redundancy_ties(K)

    def test_validation(self):
        with pytest.raises(ValidationError):
            optimal_redundancy(0)
        with pytest.raises(ValidationError):
            redundancy_ties(-2)
