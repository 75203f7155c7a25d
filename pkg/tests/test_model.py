"""Domain types: configs, type tables, service laws, seeded streams."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redlab.errors import ValidationError
from redlab.model import (
    CopyMode,
    DegenerateHyperExp,
    Deterministic,
    Exponential,
    RngSpec,
    SystemConfig,
    build_type_table,
    effective_load,
)


class TestSystemConfig:
    def test_defaults_fill_in(self):
        cfg = SystemConfig(K=4, d=2, lam=1.0)
        assert cfg.speeds == (1.0, 1.0, 1.0, 1.0)
        assert isinstance(cfg.service, Exponential)
        assert cfg.service.rate == cfg.mu
        assert cfg.homogeneous

    def test_d_above_k_rejected(self):
        with pytest.raises(ValidationError, match="1 <= d <= K"):
            SystemConfig(K=5, d=6, lam=1.0)

    def test_nonpositive_rates_rejected(self):
        with pytest.raises(ValidationError):
            SystemConfig(K=2, d=1, lam=0.0)
        with pytest.raises(ValidationError):
            SystemConfig(K=2, d=1, lam=1.0, mu=-1.0)

    def test_speeds_must_match_k(self):
        with pytest.raises(ValidationError, match="one speed per server"):
            SystemConfig(K=3, d=2, lam=1.0, speeds=(1.0, 2.0))
        with pytest.raises(ValidationError):
            SystemConfig(K=2, d=1, lam=1.0, speeds=(1.0, 0.0))

    def test_replications_validated(self):
        with pytest.raises(ValidationError):
            SystemConfig(K=2, d=1, lam=1.0, replications=0)

    def test_effective_load_uses_total_speed(self):
        cfg = SystemConfig(K=3, d=3, lam=6.5, speeds=(1.0, 4.0, 8.0),
                           copy_mode=CopyMode.IDENTICAL)
        assert effective_load(cfg) == pytest.approx(0.5)


class TestTypeTable:
    @given(st.integers(min_value=1, max_value=7).flatmap(
        lambda K: st.tuples(st.just(K), st.integers(min_value=1, max_value=K))))
    @settings(max_examples=40, deadline=None)
    def test_counts_and_membership(self, kd):
        K, d = kd
        table = build_type_table(K, d)
        assert table.n_types == math.comb(K, d)
        assert list(table.types) == sorted(table.types)
        for i, typ in enumerate(table.types):
            assert len(typ) == d
            assert len(set(typ)) == d
            assert table.masks[i] == sum(1 << s for s in typ)
            assert table.index[typ] == i
        # every server belongs to the same number of types
        per_server = [len(table.types_of_server[s]) for s in range(K)]
        assert set(per_server) == {math.comb(K - 1, d - 1)}

    def test_id_lookup_order_insensitive(self):
        table = build_type_table(4, 2)
        assert table.id_of((2, 1)) == table.id_of((1, 2))


class TestServiceDists:
    def test_exponential_moments(self):
        d = Exponential(2.0)
        assert d.mean() == 0.5
        assert d.scv() == 1.0

    def test_deterministic_moments(self):
        d = Deterministic(3.0)
        assert d.mean() == 3.0
        assert d.scv() == 0.0
        assert d.sample(np.random.default_rng(0)) == 3.0

    def test_dhe_mean_free_of_p(self):
        for p in (0.25, 0.5, 1.0):
            d = DegenerateHyperExp(rate=2.0, p=p)
            assert d.mean() == pytest.approx(0.5)
            assert d.scv() == pytest.approx(2.0 / p - 1.0)

    def test_dhe_zero_fraction(self):
        d = DegenerateHyperExp(rate=1.0, p=0.25)
        draws = d.sample(np.random.default_rng(7), 200_000)
        assert np.mean(draws == 0.0) == pytest.approx(0.75, abs=0.01)
        assert np.mean(draws) == pytest.approx(1.0, abs=0.02)

    def test_dhe_p_validated(self):
        with pytest.raises(ValidationError):
            DegenerateHyperExp(rate=1.0, p=0.0)
        with pytest.raises(ValidationError):
            DegenerateHyperExp(rate=1.0, p=1.5)


class TestRngSpec:
    def test_same_spec_same_draws(self):
        a = RngSpec(99, 3).substream("arrivals").random(5)
        b = RngSpec(99, 3).substream("arrivals").random(5)
        assert np.array_equal(a, b)

    def test_categories_do_not_alias(self):
        a = RngSpec(99, 3).substream("arrivals").random(5)
        s = RngSpec(99, 3).substream("services").random(5)
        assert not np.array_equal(a, s)

    def test_streams_do_not_alias(self):
        a = RngSpec(99, 0).substream("arrivals").random(5)
        b = RngSpec(99, 1).substream("arrivals").random(5)
        assert not np.array_equal(a, b)

    def test_unknown_category_rejected(self):
        with pytest.raises(ValidationError, match="unknown stream category"):
            RngSpec(1, 0).substream("weather")
