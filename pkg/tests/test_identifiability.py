import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisy_bayes.channel import epsilon_from_marginals, invert_binary_posterior
from noisy_bayes.errors import InfeasibleRates, MassNotOne
from noisy_bayes.identifiability import (
    IdentifiabilityVerdict,
    Interval,
    Reason,
    binary_boundary_threshold,
    explain,
    feasible_eps12_range,
    is_identifiable,
    threshold_decision,
)


def grid_feasible(p1, p1_prime, m=20001):
    """Grid oracle: eps12 values whose implied channel is valid."""
    t = np.linspace(0.0, 1.0, m)
    e21 = (p1 - p1_prime + t * (1 - p1)) / p1
    ok = (e21 >= 0) & (e21 <= 1) & (t + e21 < 1)
    return t[ok]


class TestIsIdentifiable:
    def test_balanced_binary(self):
        v = is_identifiable(2, [0.5, 0.5])
        assert v.identifiable and v.reason is Reason.BALANCED_BINARY and v.witness is None

    def test_imbalanced_binary(self):
        v = is_identifiable(2, [0.35, 0.65], p_prime=[0.4, 0.6])
        assert not v.identifiable and v.reason is Reason.IMBALANCED_BINARY
        w = v.witness
        assert w.decisions[0] != w.decisions[1]
        for t, e in zip(w.eps12, w.eps21):
            assert 0 <= t and 0 <= e and t + e < 1
            assert np.all(invert_binary_posterior(w.scores, t, e) >= 0)

    @pytest.mark.parametrize("p", [[1 / 3] * 3, [0.25] * 4])
    def test_balanced_multiclass(self, p):
        v = is_identifiable(len(p), p)
        assert not v.identifiable and v.reason is Reason.MULTICLASS
        assert v.witness.construction == "permutation"

    def test_imbalanced_multiclass(self):
        v = is_identifiable(3, [0.2, 0.3, 0.5])
        assert not v.identifiable and v.witness.construction == "shrinkage"

    def test_tolerance(self):
        assert is_identifiable(2, [0.5 + 1e-11, 0.5 - 1e-11]).identifiable
        assert not is_identifiable(2, [0.5 + 1e-6, 0.5 - 1e-6]).identifiable

    def test_bad_prior(self):
        with pytest.raises(MassNotOne):
            is_identifiable(2, [0.5, 0.6])
        with pytest.raises(ValueError):
            is_identifiable(3, [0.5, 0.5])

    def test_verdict_invariant(self):
        with pytest.raises(ValueError):
            IdentifiabilityVerdict(False, Reason.MULTICLASS, None)

    def test_explain_and_json(self):
        import json
        for K, p in ((2, [0.5, 0.5]), (2, [0.3, 0.7]), (3, [1 / 3] * 3)):
            v = is_identifiable(K, p)
            assert explain(v).startswith("Identifiable" if v.identifiable else "Not identifiable")
            json.dumps(v.to_dict())


class TestThreshold:
    def test_hand_values(self):
        assert binary_boundary_threshold(0.35, 0.4, 0.1) == pytest.approx(1.0571428571428572, abs=1e-12)
        assert binary_boundary_threshold(0.35, 0.4, 0.3) == pytest.approx(0.8857142857142857, abs=1e-12)

    def test_infeasible(self):
        with pytest.raises(InfeasibleRates):
            binary_boundary_threshold(0.35, 0.4, 0.45)

    def test_balanced_is_constant(self):
        taus = [binary_boundary_threshold(0.5, 0.4, t) for t in feasible_eps12_range(0.5, 0.4).sweep(100)]
        assert np.ptp(taus) < 1e-12 and taus[0] == pytest.approx(0.8)

    @settings(max_examples=100)
    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
    def test_imbalanced_thresholds_differ(self, p1, p1_prime):
        if abs(p1 - 0.5) < 1e-3:
            return
        ts = feasible_eps12_range(p1, p1_prime).sweep(2)
        taus = [binary_boundary_threshold(p1, p1_prime, t) for t in ts]
        assert abs(taus[0] - taus[1]) > 1e-9

    @settings(max_examples=50)
    @given(st.floats(0.1, 0.9), st.floats(0.1, 0.9), st.floats(0.0, 1.0))
    def test_threshold_matches_inverted_posterior(self, p1, p1_prime, u):
        rng_ = feasible_eps12_range(p1, p1_prime)
        t = rng_.lo + u * 0.999 * (rng_.hi - rng_.lo)
        e21 = epsilon_from_marginals(p1, p1_prime, t)
        tau = binary_boundary_threshold(p1, p1_prime, t)
        grid = np.linspace(0.001, 0.999, 199)
        scores = np.vstack([grid, 1 - grid])
        alpha = invert_binary_posterior(scores, t, e21)
        # inverted scores are the clean posterior; Bayes picks the larger entry
        direct = np.where(alpha[0] >= alpha[1], 0, 1)
        margin = np.abs(2 * scores[0] - tau)
        mask = margin > 1e-9
        np.testing.assert_array_equal(threshold_decision(scores, tau)[mask], direct[mask])


class TestFeasibleRange:
    @pytest.mark.parametrize("p1,p1p", [(0.35, 0.4), (0.5, 0.4), (0.7, 0.2), (0.2, 0.9)])
    def test_matches_grid(self, p1, p1p):
        grid = grid_feasible(p1, p1p)
        r = feasible_eps12_range(p1, p1p)
        assert grid.min() == pytest.approx(r.lo, abs=1e-4)
        assert grid.max() == pytest.approx(r.hi, abs=1e-4)
        assert all(r.contains(t) for t in grid)

    @pytest.mark.parametrize("p1p", [0.0, 1.0])
    def test_empty_at_boundary(self, p1p):
        assert feasible_eps12_range(0.35, p1p).empty
        assert grid_feasible(0.35, p1p).size == 0

    def test_hand_interval(self):
        r = feasible_eps12_range(0.35, 0.4)
        assert r.lo == pytest.approx(0.05 / 0.65) and r.hi == pytest.approx(0.4)
        assert r.contains(0.1) and r.contains(0.3) and not r.contains(0.4)

    def test_rejects_bad_prior(self):
        with pytest.raises(InfeasibleRates):
            feasible_eps12_range(1.0, 0.4)

    def test_sweep(self):
        s = Interval(0.1, 0.3).sweep(5)
        assert len(s) == 5 and s[0] == pytest.approx(0.1) and s[-1] < 0.3
