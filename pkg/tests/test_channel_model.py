"""
Gilbert-Elliott channel model tests.
Run with: python -m pytest tests/ -v
"""
import numpy as np
import pytest

from src.channel_model import (
    ChannelState,
    GilbertElliotParams,
    as_belief_vector,
    initial_beliefs,
    k_step_idle_prob,
    propagate_belief,
    propagate_beliefs,
    stationary_occupancy,
    step_state,
    transition_matrix,
    update_belief,
)
from src.config import BASELINE_ROW
from src.errors import ClosedFormError, ParameterError


@pytest.fixture
def baseline():
    return GilbertElliotParams.from_row(BASELINE_ROW)


class TestParams:
    def test_from_row_order(self, baseline):
        assert baseline.p11 == 0.9
        assert baseline.p10 == pytest.approx(0.1)
        assert baseline.p00 == 0.8
        assert baseline.p01 == pytest.approx(0.2)

    def test_rows_must_sum_to_one(self):
        with pytest.raises(ParameterError):
            GilbertElliotParams(p11=0.9, p10=0.2, p01=0.2, p00=0.8)

    def test_probability_range(self):
        with pytest.raises(ParameterError):
            GilbertElliotParams(p11=1.2, p10=-0.2, p01=0.2, p00=0.8)

    def test_correlation(self, baseline):
        assert baseline.correlation == pytest.approx(0.7)
        assert baseline.positively_correlated

    def test_negative_correlation_rejected_where_required(self):
        params = GilbertElliotParams(p11=0.2, p10=0.8, p01=0.9, p00=0.1)
        with pytest.raises(ParameterError):
            params.require_positive_correlation()

    def test_transition_matrix_rows(self, baseline):
        mat = transition_matrix(baseline)
        np.testing.assert_allclose(mat.sum(axis=1), [1.0, 1.0])
        assert mat[ChannelState.IDLE, ChannelState.IDLE] == 0.9


class TestBeliefs:
    def test_stationary_occupancy(self, baseline):
        assert stationary_occupancy(baseline) == pytest.approx(2.0 / 3.0)
        assert baseline.omega0 == pytest.approx(2.0 / 3.0)

    def test_degenerate_chain(self):
        frozen = GilbertElliotParams(p11=1.0, p10=0.0, p01=0.0, p00=1.0)
        with pytest.raises(ClosedFormError):
            stationary_occupancy(frozen)

    def test_propagation(self, baseline):
        assert propagate_belief(baseline, 0.5) == pytest.approx(0.55)

    def test_stationary_is_fixed_point(self, baseline):
        w0 = stationary_occupancy(baseline)
        assert propagate_belief(baseline, w0) == pytest.approx(w0)

    @pytest.mark.parametrize("observation, expected", [(1, 0.9), (0, 0.2)])
    def test_sensed_update(self, baseline, observation, expected):
        assert update_belief(baseline, 0.4, sensed=True, observation=observation) == pytest.approx(expected)

    def test_unsensed_update_propagates(self, baseline):
        assert update_belief(baseline, 0.5, sensed=False) == pytest.approx(0.55)

    def test_sensed_needs_observation(self, baseline):
        with pytest.raises(ParameterError):
            update_belief(baseline, 0.5, sensed=True)

    def test_two_step_idle_probability(self, baseline):
        assert k_step_idle_prob(baseline, 2) == pytest.approx(0.34)

    def test_one_step_is_p01(self, baseline):
        assert k_step_idle_prob(baseline, 1) == pytest.approx(baseline.p01)

    def test_k_step_must_be_positive(self, baseline):
        with pytest.raises(ParameterError):
            k_step_idle_prob(baseline, 0)

    def test_vector_propagation(self, baseline):
        out = propagate_beliefs((baseline, baseline), [0.5, 1.0])
        np.testing.assert_allclose(out, [0.55, 0.9])


class TestInitialBeliefs:
    def test_default_is_stationary(self, baseline):
        np.testing.assert_allclose(initial_beliefs((baseline, baseline)), [2 / 3, 2 / 3])

    def test_explicit(self, baseline):
        np.testing.assert_allclose(initial_beliefs((baseline, baseline), [0.7, 0.6]), [0.7, 0.6])

    def test_length_mismatch(self, baseline):
        with pytest.raises(ParameterError):
            initial_beliefs((baseline, baseline), [0.7, 0.6, 0.5])

    def test_single_channel_rejected(self):
        with pytest.raises(ParameterError):
            as_belief_vector([0.5])

    def test_out_of_range_rejected(self):
        with pytest.raises(ParameterError):
            as_belief_vector([0.5, 1.5])


class TestStepState:
    def test_idle_channel_stays_idle_at_low_uniform(self, baseline):
        class FixedRng:
            def random(self):
                return 0.5
        assert step_state(baseline, ChannelState.IDLE, FixedRng()) == ChannelState.IDLE
        assert step_state(baseline, ChannelState.BUSY, FixedRng()) == ChannelState.BUSY

    def test_long_run_occupancy(self, baseline):
        rng = np.random.default_rng(3)
        state, idle = ChannelState.IDLE, 0
        for _ in range(20_000):
            state = step_state(baseline, state, rng)
            idle += int(state)
        assert idle / 20_000 == pytest.approx(2 / 3, abs=0.03)
