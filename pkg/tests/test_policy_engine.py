"""
Channel selection policy tests.
"""
import numpy as np
import pytest

from src.closed_form import selection_entropy
from src.errors import ParameterError
from src.policy_engine import (
    PolicyKind,
    PolicySpec,
    ResampleMode,
    bernoulli_select,
    bernoulli_select_u,
    boltzmann_probs,
    boltzmann_select,
    contrarian_select,
    myopic_select,
    select_action,
    selection_probs,
)


class TestMyopic:
    def test_argmax(self):
        assert myopic_select([0.2, 0.9, 0.5]) == 1

    def test_tie_breaks_to_lowest_index(self):
        assert myopic_select([0.7, 0.7, 0.3]) == 0

    def test_contrarian_picks_lowest(self):
        assert contrarian_select([0.2, 0.9, 0.5]) == 0

    def test_action_ignores_uniform(self):
        spec = PolicySpec.myopic()
        assert select_action(spec, [0.3, 0.8], 0.0) == select_action(spec, [0.3, 0.8], 0.999) == 1


class TestBernoulli:
    def test_main_channel_below_q(self):
        assert bernoulli_select_u([0.3, 0.8], 0.7, 0.69) == 1

    def test_other_channel_above_q(self):
        assert bernoulli_select_u([0.3, 0.8], 0.7, 0.71) == 0

    def test_q_one_is_myopic(self):
        for u in (0.0, 0.5, 0.999999):
            assert bernoulli_select_u([0.3, 0.8], 1.0, u) == 1

    def test_needs_two_channels(self):
        with pytest.raises(ParameterError):
            bernoulli_select_u([0.3, 0.8, 0.5], 0.7, 0.1)

    def test_selection_probs(self):
        probs = selection_probs(PolicySpec.bernoulli(0.8), [0.3, 0.7])
        np.testing.assert_allclose(probs, [0.2, 0.8])

    @pytest.mark.parametrize("q", [0.4, 1.1, None])
    def test_invalid_q(self, q):
        with pytest.raises(ParameterError):
            PolicySpec(PolicyKind.BERNOULLI, q=q)

    @pytest.mark.parametrize("q, beliefs, channel", [(0.5, [0.2, 0.9], 1), (0.7, [0.9, 0.2], 0)])
    def test_rng_frequency(self, q, beliefs, channel):
        rng = np.random.default_rng(11)
        n = 100_000
        picks = np.array([bernoulli_select(beliefs, q, rng) for _ in range(n)])
        se = np.sqrt(q * (1 - q) / n)
        assert abs(np.mean(picks == channel) - q) <= 4 * se


class TestBoltzmann:
    def test_probs_sum_to_one(self):
        probs = boltzmann_probs([0.2, 0.5, 0.9], 2.0)
        assert probs.sum() == pytest.approx(1.0)
        assert np.all(np.diff(probs) > 0)

    def test_low_temperature_is_greedy(self):
        probs = boltzmann_probs([0.2, 0.5, 0.9], 1e-6)
        np.testing.assert_allclose(probs, [0.0, 0.0, 1.0], atol=1e-12)

    def test_high_temperature_is_uniform(self):
        probs = boltzmann_probs([0.2, 0.5, 0.9], 1e6)
        np.testing.assert_allclose(probs, np.full(3, 1 / 3), atol=1e-6)

    def test_invalid_temperature(self):
        with pytest.raises(ParameterError):
            boltzmann_probs([0.2, 0.5], 0.0)
        with pytest.raises(ParameterError):
            PolicySpec.boltzmann(-1.0)

    def test_inverse_cdf(self):
        spec = PolicySpec.boltzmann(1e6)
        assert select_action(spec, [0.2, 0.5, 0.9], 0.0) == 0
        assert select_action(spec, [0.2, 0.5, 0.9], 0.5) == 1
        assert select_action(spec, [0.2, 0.5, 0.9], 0.999) == 2

    def test_sampling_frequencies(self):
        rng = np.random.default_rng(0)
        beliefs = [0.2, 0.9]
        picks = [boltzmann_select(beliefs, 0.5, rng) for _ in range(5000)]
        expected = boltzmann_probs(beliefs, 0.5)[1]
        assert np.mean(picks) == pytest.approx(expected, abs=0.03)

    @pytest.mark.parametrize("beliefs", [[0.2, 0.9], [0.1, 0.5, 0.55, 0.9], [0.3, 0.3, 0.8]])
    def test_entropy_nondecreasing_in_tau(self, beliefs):
        h = [selection_entropy(boltzmann_probs(beliefs, tau)) for tau in np.logspace(-3, 3, 61)]
        assert np.all(np.diff(h) >= -1e-12)

    @pytest.mark.parametrize("transform", [np.sqrt, np.square, lambda x: x ** 3, lambda x: (x + 1) / 2])
    def test_argmax_invariant_under_increasing_transform(self, transform):
        rng = np.random.default_rng(5)
        for _ in range(50):
            beliefs = rng.uniform(0.0, 1.0, size=5)
            assert myopic_select(transform(beliefs)) == myopic_select(beliefs)
            assert int(np.argmax(boltzmann_probs(transform(beliefs), 0.5))) == myopic_select(beliefs)


class TestPolicySpec:
    def test_labels(self):
        assert PolicySpec.myopic().label == "myopic"
        assert PolicySpec.bernoulli(0.75).label == "bernoulli(q=0.75)"
        assert PolicySpec.boltzmann(2.0).label == "boltzmann(tau=2)"

    def test_string_kinds_are_coerced(self):
        spec = PolicySpec("boltzmann", tau=1.0, resample_mode="every_slot")
        assert spec.kind is PolicyKind.BOLTZMANN
        assert spec.resample_mode is ResampleMode.EVERY_SLOT

    def test_myopic_selection_probs_one_hot(self):
        np.testing.assert_allclose(selection_probs(PolicySpec.myopic(), [0.1, 0.4, 0.3]), [0, 1, 0])
