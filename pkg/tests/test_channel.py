import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisy_bayes.channel import (
    NoiseMatrix,
    balanced_counterexample,
    construct_noise_matrix,
    corrupt_labels,
    epsilon_from_marginals,
    find_argmax_flip,
    invert_binary_posterior,
    reference_noisy_marginal,
    shrinkage_counterexample,
)
from noisy_bayes.errors import (
    DegenerateChannel,
    InfeasibleConfiguration,
    InfeasibleRates,
    LabelOutOfRange,
    NoFlipFound,
    NonPositiveEntry,
)
from noisy_bayes.simplex import PermutationMatrix, matrix_determinant, solve_linear

from conftest import random_binary_rates


class TestNoiseMatrix:
    def test_binary_layout(self):
        E = NoiseMatrix.binary(0.3, 0.1)
        np.testing.assert_allclose(E.entries, [[0.7, 0.1], [0.3, 0.9]])
        assert E.e0 == pytest.approx(0.3) and E.e1 == pytest.approx(0.1)
        assert E.det == pytest.approx(0.6)

    def test_degenerate(self):
        with pytest.raises(DegenerateChannel):
            NoiseMatrix.binary(0.5, 0.5)
        assert issubclass(DegenerateChannel, InfeasibleConfiguration)

    def test_rates_only_for_binary(self):
        with pytest.raises(AttributeError):
            NoiseMatrix.identity(3).e0

    def test_push_forward(self):
        E = NoiseMatrix([[0.7, 0.2], [0.3, 0.8]])
        np.testing.assert_allclose(E.push_forward([0.6, 0.4]).probs, [0.5, 0.5], atol=1e-15)


class TestCorruptLabels:
    def test_identity_channel(self):
        y = np.arange(5) % 3
        np.testing.assert_array_equal(corrupt_labels(y, NoiseMatrix.identity(3), seed=1), y)

    def test_flip_rates(self):
        y = np.repeat([0, 1], 100_000)
        noisy = corrupt_labels(y, NoiseMatrix.binary(0.3, 0.1), seed=7)
        assert abs(np.mean(noisy[y == 0] == 1) - 0.3) < 0.005
        assert abs(np.mean(noisy[y == 1] == 0) - 0.1) < 0.005

    def test_deterministic(self):
        y = np.repeat([0, 1], 50)
        E = NoiseMatrix.binary(0.3, 0.2)
        np.testing.assert_array_equal(corrupt_labels(y, E, 3), corrupt_labels(y, E, 3))
        assert not np.array_equal(corrupt_labels(y, E, 3), corrupt_labels(y, E, 4))

    def test_out_of_range(self):
        with pytest.raises(LabelOutOfRange):
            corrupt_labels([0, 2], NoiseMatrix.binary(0.1, 0.1), seed=0)


class TestInvertPosterior:
    def test_hand_case(self):
        # channel [[0.7, 0.2], [0.3, 0.8]]: e01 = 0.2, e10 = 0.3
        np.testing.assert_allclose(invert_binary_posterior([0.5, 0.5], 0.2, 0.3), [0.6, 0.4], atol=1e-12)

    def test_noiseless(self):
        np.testing.assert_allclose(invert_binary_posterior([0.3, 0.7], 0.0, 0.0), [0.3, 0.7])

    def test_degenerate(self):
        with pytest.raises(DegenerateChannel):
            invert_binary_posterior([0.5, 0.5], 0.6, 0.4)

    @given(st.integers(0, 2**32 - 1))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        e10, e01 = random_binary_rates(rng)
        alpha = rng.dirichlet([1, 1])
        E = np.array([[1 - e10, e01], [e10, 1 - e01]])
        back = invert_binary_posterior(E @ alpha, e01, e10)
        assert np.max(np.abs(back - alpha)) < 1e-10


class TestEpsilonFromMarginals:
    @pytest.mark.parametrize("p1,p1p,eps12", [(0.35, 0.4, 0.1), (0.35, 0.4, 0.3), (0.5, 0.5, 0.2)])
    def test_forward_marginal(self, p1, p1p, eps12):
        eps21 = epsilon_from_marginals(p1, p1p, eps12)
        assert p1 * (1 - eps21) + (1 - p1) * eps12 == pytest.approx(p1p, abs=1e-14)

    def test_infeasible(self):
        with pytest.raises(InfeasibleRates):
            epsilon_from_marginals(0.35, 0.4, 0.5)
        with pytest.raises(InfeasibleRates):
            epsilon_from_marginals(0.0, 0.4, 0.1)

    def test_raw(self):
        assert epsilon_from_marginals(0.35, 0.4, 0.01, raw=True) < 0


def test_reference_noisy_marginal():
    np.testing.assert_allclose(reference_noisy_marginal([0.35, 0.65]).probs, [0.365, 0.635])


class TestConstructNoiseMatrix:
    def test_hand_case(self):
        E = construct_noise_matrix([0.3, 0.7], [0.5, 0.5])
        np.testing.assert_allclose(E.entries, [[1, 2 / 7], [0, 5 / 7]], atol=1e-15)

    def test_equal_marginals_give_identity(self):
        np.testing.assert_array_equal(construct_noise_matrix([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]).entries,
                                      np.eye(3))

    def test_determinant_is_product_of_shrink_factors(self):
        p, q = np.array([0.1, 0.4, 0.5]), np.array([0.3, 0.3, 0.4])
        E = construct_noise_matrix(p, q)
        assert E.det == pytest.approx(0.3 / 0.4 * 0.4 / 0.5, abs=1e-14)
        assert matrix_determinant(E.entries) == pytest.approx(E.det)

    def test_zero_entry(self):
        with pytest.raises(NonPositiveEntry):
            construct_noise_matrix([0.5, 0.5], [1.0, 0.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            construct_noise_matrix([0.5, 0.5], [0.2, 0.3, 0.5])

    @settings(max_examples=200)
    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_invariants(self, k, seed):
        rng = np.random.default_rng(seed)
        p, q = rng.dirichlet(np.ones(k)) * 0.95 + 0.05 / k, rng.dirichlet(np.ones(k)) * 0.95 + 0.05 / k
        E = construct_noise_matrix(p, q).entries
        assert np.max(np.abs(E @ p - q)) < 1e-12
        assert np.all(E >= 0)
        assert np.max(np.abs(E.sum(axis=0) - 1)) < 1e-12
        assert matrix_determinant(E) > 0


class TestBalancedCounterexample:
    def test_k3(self):
        pair = balanced_counterexample(3)
        np.testing.assert_array_equal(pair.E1.entries, np.eye(3))
        np.testing.assert_array_equal(pair.E2.entries, PermutationMatrix((1, 2, 0)).matrix)
        np.testing.assert_allclose(pair.witness_scores, [0.5, 0.3, 0.2])
        assert (pair.argmax_under_E1, pair.argmax_under_E2) == (0, 2)
        assert pair.E2.det > 0

    @pytest.mark.parametrize("k", [4, 5])
    def test_larger_k(self, k):
        pair = balanced_counterexample(k)
        for E in (pair.E1, pair.E2):
            np.testing.assert_allclose(E.entries @ pair.p.probs, pair.p_prime.probs, atol=1e-12)
        assert np.argmax(pair.posterior_E1) != np.argmax(pair.posterior_E2)

    def test_custom_permutation(self):
        pair = balanced_counterexample(4, permutation=(1, 0, 3, 2))
        assert pair.argmax_under_E1 != pair.argmax_under_E2

    def test_odd_permutation_rejected(self):
        with pytest.raises(ValueError):
            balanced_counterexample(3, permutation=(1, 0, 2))

    def test_binary_rejected(self):
        with pytest.raises(ValueError):
            balanced_counterexample(2)


class TestShrinkageCounterexample:
    def test_binary_case(self):
        pair = shrinkage_counterexample([0.35, 0.65], delta=0.1)
        for E in (pair.E1, pair.E2):
            np.testing.assert_allclose(E.entries @ pair.p.probs, pair.p_prime.probs, atol=1e-12)
        a1, a2 = pair.posterior_E1, pair.posterior_E2
        assert np.argmax(a1) != np.argmax(a2)
        np.testing.assert_allclose(a2, (a1 - 0.1 * pair.p.probs) / 0.9, atol=1e-10)
        assert pair.checks["det_error"] < 1e-10

    def test_hand_witness(self):
        # E1 = I when p = p'; under E2 the scores (0.49, 0.51) invert to (0.58, 0.42)
        p = [0.4, 0.6]
        pair = shrinkage_counterexample(p, p_prime=p, delta=0.5)
        a = np.array([0.49, 0.51])
        alpha2 = solve_linear(pair.E2.entries, a)
        np.testing.assert_allclose(alpha2, (a - 0.5 * np.array(p)) / 0.5, atol=1e-12)
        assert np.argmax(alpha2) == 0 and np.argmax(a) == 1

    @pytest.mark.parametrize("delta", [0.1, 0.3, 0.7])
    def test_determinant_identity(self, delta):
        p = np.array([0.2, 0.3, 0.5])
        pair = shrinkage_counterexample(p, delta=delta)
        expected = (1 - delta) ** 2 * matrix_determinant(pair.E1.entries)
        assert abs(matrix_determinant(pair.E2.entries) - expected) < 1e-10

    def test_uniform_rejected(self):
        with pytest.raises(ValueError):
            shrinkage_counterexample([0.5, 0.5])

    @pytest.mark.parametrize("delta", [0.0, 1.0])
    def test_delta_bounds(self, delta):
        with pytest.raises(ValueError):
            shrinkage_counterexample([0.3, 0.7], delta=delta)


class TestFindArgmaxFlip:
    def test_identical_channels(self):
        E = NoiseMatrix.binary(0.2, 0.1).entries
        with pytest.raises(NoFlipFound):
            find_argmax_flip(E, E, budget=2000)

    def test_witness_is_verified(self):
        E1 = np.eye(3)
        E2 = PermutationMatrix((1, 2, 0)).matrix
        a = find_argmax_flip(E1, E2)
        assert np.argmax(solve_linear(E1, a)) != np.argmax(solve_linear(E2, a))
        assert abs(a.sum() - 1) < 1e-12
