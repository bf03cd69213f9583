"""Global risk fusion: weighted max, TTL expiry, the signal store."""

import math
import random

import pytest
from hypothesis import given, strategies as st

from lampgrid.model import CriticalityBounds, ModelError
from lampgrid.risk import (
    RiskSignal,
    SignalStore,
    compute_global_risk,
    dominant_signal,
    expire_signals,
)


def make_signal(severity=0.5, weight=1.0, issued=0, ttl=1000,
                source="weather") -> RiskSignal:
    return RiskSignal(source_id=source, severity=severity, weight=weight,
                      issued_sim_time_ms=issued, ttl_ms=ttl,
                      description="")


def oracle_lambda(signals, now_ms, m_max):
    # Brute force: strongest live weight*severity product, scaled and ceiled.
    live = [s for s in signals if s.issued_sim_time_ms + s.ttl_ms > now_ms]
    if not live:
        return 0
    strongest = max(s.weight * s.severity for s in live)
    return min(m_max, math.ceil(m_max * strongest))


class TestComputeGlobalRisk:
    def test_empty_is_zero(self, bounds):
        assert compute_global_risk([], 0, bounds) == 0

    def test_maximal_signal_saturates(self, bounds):
        assert compute_global_risk(
            [make_signal(severity=1.0, weight=1.0)], 0, bounds) == 10

    def test_two_signal_example(self, bounds):
        # max(0.5*0.8, 0.3*1.0) = 0.40; ceil(10*0.40) = 4.
        signals = [
            make_signal(severity=0.5, weight=0.8),
            make_signal(severity=0.3, weight=1.0),
        ]
        assert compute_global_risk(signals, 0, bounds) == 4
        assert oracle_lambda(signals, 0, 10) == 4

    def test_weather_dominant_example(self, bounds):
        # The preventive-warning trace: sev 1.0 at weight 0.7 with M=10.
        assert compute_global_risk(
            [make_signal(severity=1.0, weight=0.7)], 0, bounds) == 7

    def test_matches_oracle_randomized(self, bounds):
        rng = random.Random(1234)
        for _ in range(2000):
            signals = [
                make_signal(
                    severity=rng.random(), weight=rng.random(),
                    issued=rng.randrange(0, 5000),
                    ttl=rng.randrange(1, 5000),
                )
                for _ in range(rng.randrange(0, 9))
            ]
            now = rng.randrange(0, 8000)
            assert compute_global_risk(signals, now, bounds) \
                == oracle_lambda(signals, now, 10)

    def test_order_invariance(self, bounds):
        rng = random.Random(99)
        signals = [make_signal(severity=rng.random(), weight=rng.random())
                   for _ in range(8)]
        reference = compute_global_risk(signals, 0, bounds)
        for _ in range(20):
            rng.shuffle(signals)
            assert compute_global_risk(signals, 0, bounds) == reference

    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=0.0, max_value=1.0),
                st.floats(min_value=0.0, max_value=1.0),
            ),
            max_size=8,
        ),
        st.integers(min_value=1, max_value=10),
    )
    def test_adding_a_signal_never_decreases(self, pairs, m_max):
        b = CriticalityBounds(n_max=5, m_max=m_max)
        signals = [make_signal(severity=sev, weight=w) for sev, w in pairs]
        lam = compute_global_risk(signals, 0, b)
        assert 0 <= lam <= m_max
        extended = signals + [make_signal(severity=1.0, weight=0.5)]
        assert compute_global_risk(extended, 0, b) >= lam


class TestExpiry:
    def test_boundary_is_strict(self):
        signal = make_signal(issued=0, ttl=100)
        assert expire_signals([signal], 99) == [signal]
        assert expire_signals([signal], 100) == []

    def test_order_preserved(self):
        s1 = make_signal(issued=0, ttl=200)
        s2 = make_signal(issued=0, ttl=50)
        s3 = make_signal(issued=0, ttl=300)
        assert expire_signals([s1, s2, s3], 100) == [s1, s3]

    def test_validation(self):
        with pytest.raises(ModelError):
            make_signal(severity=1.5)
        with pytest.raises(ModelError):
            make_signal(weight=-0.1)
        with pytest.raises(ModelError):
            make_signal(ttl=0)


class TestDominantSignal:
    def test_strongest_product_wins(self):
        weak = make_signal(severity=0.9, weight=0.4, source="public_utility")
        strong = make_signal(severity=0.8, weight=1.0, source="civil_protection")
        assert dominant_signal([weak, strong], 0) is strong

    def test_tie_earliest_issued_wins(self):
        late = make_signal(severity=0.5, weight=1.0, issued=10, ttl=1000)
        early = make_signal(severity=0.5, weight=1.0, issued=0, ttl=1000)
        assert dominant_signal([late, early], 20) is early

    def test_empty(self):
        assert dominant_signal([], 0) is None


class TestSignalStore:
    def test_live_requires_issued(self, bounds):
        store = SignalStore()
        store.add(make_signal(issued=500, ttl=1000))
        assert store.live(499) == []
        assert len(store.live(500)) == 1
        assert store.live(1500) == []

    def test_context_matches_compute(self, bounds):
        store = SignalStore()
        store.add(make_signal(severity=1.0, weight=0.7, issued=0, ttl=1000))
        ctx = store.context(10, bounds)
        assert ctx.lambda_ == 7
        assert len(ctx.contributing) == 1
        assert ctx.as_dict()["lambda"] == 7

    def test_checkpoints_cover_issue_and_expiry(self):
        store = SignalStore()
        store.add(make_signal(issued=100, ttl=400))
        store.add(make_signal(issued=200, ttl=100))
        assert store.due_checkpoints(250) == [100, 200]
        assert store.due_checkpoints(1000) == [300, 500]
        assert store.due_checkpoints(1000) == []
