"""
Attacker strategy and cost tests.
"""
import math

import numpy as np
import pytest

from src.adversary import (
    AttackKind,
    AttackStrategySpec,
    DivisionCache,
    attack_from_uniforms,
    attacker_cost,
    check_alpha,
    check_division,
    division_for,
    greedy_division,
    omega_division,
    optimal_division,
    sample_attack,
    uniform_division,
)
from src.channel_model import GilbertElliotParams, initial_beliefs
from src.config import BASELINE_ROW, TABLE1_ROWS
from src.errors import ParameterError
from src.optimizer import problem3_objective
from src.policy_engine import boltzmann_probs


@pytest.fixture
def baseline():
    return GilbertElliotParams.from_row(BASELINE_ROW)


@pytest.fixture
def table1():
    return tuple(GilbertElliotParams.from_row(r) for r in TABLE1_ROWS)


class TestDivisions:
    def test_greedy_targets_best_belief(self):
        np.testing.assert_array_equal(greedy_division([0.3, 0.7]), [0.0, 1.0])

    def test_uniform(self):
        np.testing.assert_allclose(uniform_division(4), np.full(4, 0.25))

    def test_uniform_needs_two(self):
        with pytest.raises(ParameterError):
            uniform_division(1)

    def test_omega_is_boltzmann(self):
        np.testing.assert_allclose(omega_division([0.2, 0.6, 0.9], 0.5),
                                   boltzmann_probs([0.2, 0.6, 0.9], 0.5))

    def test_optimal_on_simplex(self, table1):
        beliefs = initial_beliefs(table1)
        d = optimal_division(boltzmann_probs(beliefs, 2.0), beliefs, 0.5, table1)
        assert d.sum() == pytest.approx(1.0)
        assert np.all(d >= 0.0)

    def test_optimal_dominates_other_divisions(self, table1):
        rng = np.random.default_rng(7)
        for _ in range(200):
            q = rng.dirichlet(np.ones(4))
            beliefs = rng.uniform(0.05, 0.95, size=4)
            alpha = float(rng.uniform(0.01, 1.0))
            tau_a = float(rng.uniform(0.1, 5.0))
            best = problem3_objective(optimal_division(q, beliefs, alpha, table1), q, beliefs, table1, alpha)
            for d in (greedy_division(beliefs), uniform_division(4), omega_division(beliefs, tau_a)):
                assert best <= problem3_objective(d, q, beliefs, table1, alpha) + 1e-9

    def test_alpha_optimal_at_zero_alpha_is_uniform(self, table1):
        beliefs = initial_beliefs(table1)
        spec = AttackStrategySpec(AttackKind.ALPHA_OPTIMAL)
        d = division_for(spec, beliefs, boltzmann_probs(beliefs, 2.0), table1, 0.0)
        np.testing.assert_allclose(d, np.full(4, 0.25))

    def test_cache_hits(self, table1):
        beliefs = initial_beliefs(table1)
        q = boltzmann_probs(beliefs, 2.0)
        cache = DivisionCache()
        first = cache.get(q, beliefs, 0.5, table1)
        second = cache.get(q, beliefs, 0.5, table1)
        np.testing.assert_array_equal(first, second)
        assert (cache.hits, cache.misses) == (1, 1)

    def test_cache_eviction(self, baseline):
        channels = (baseline, baseline)
        cache = DivisionCache(maxsize=1)
        cache.get(np.array([0.5, 0.5]), np.array([0.6, 0.7]), 0.5, channels)
        cache.get(np.array([0.5, 0.5]), np.array([0.7, 0.6]), 0.5, channels)
        cache.get(np.array([0.5, 0.5]), np.array([0.6, 0.7]), 0.5, channels)
        assert cache.misses == 3


class TestSpecs:
    def test_omega_requires_temperature(self):
        with pytest.raises(ParameterError):
            AttackStrategySpec(AttackKind.OMEGA)

    def test_labels(self):
        assert AttackStrategySpec("greedy").label == "greedy"
        assert AttackStrategySpec("omega", tau_a=2.0).label == "omega(tau_a=2)"

    @pytest.mark.parametrize("alpha", [-0.1, 1.5])
    def test_alpha_range(self, alpha):
        with pytest.raises(ParameterError):
            check_alpha(alpha)

    def test_division_must_be_on_simplex(self):
        with pytest.raises(ParameterError):
            check_division([0.6, 0.6])


class TestSampling:
    def test_no_attack_above_alpha(self):
        assert attack_from_uniforms(np.array([0.5, 0.5]), 0.3, 0.3, 0.1) is None

    def test_target_by_inverse_cdf(self):
        d = np.array([0.5, 0.5])
        assert attack_from_uniforms(d, 1.0, 0.99, 0.4) == 0
        assert attack_from_uniforms(d, 1.0, 0.99, 0.6) == 1

    def test_attack_frequency(self):
        rng = np.random.default_rng(1)
        hits = [sample_attack([0.25, 0.75], 0.4, rng) for _ in range(5000)]
        assert np.mean([h is not None for h in hits]) == pytest.approx(0.4, abs=0.03)
        targets = [h for h in hits if h is not None]
        assert np.mean(targets) == pytest.approx(0.75, abs=0.05)


class TestAttackerCost:
    def test_endpoints(self, baseline):
        assert attacker_cost(0.0, baseline) == pytest.approx(0.0, abs=1e-12)
        assert attacker_cost(1.0, baseline) == pytest.approx(1.0)

    def test_half(self, baseline):
        assert attacker_cost(0.5, baseline) == pytest.approx(0.2717, abs=1e-4)

    def test_increasing(self, baseline):
        costs = [attacker_cost(a, baseline) for a in np.linspace(0.0, 1.0, 21)]
        assert np.all(np.diff(costs) > 0)

    def test_matches_kl_ratio(self, baseline):
        theta1 = 1 - 0.9 * 0.7
        kl = theta1 * math.log(theta1 / 0.1) + (1 - theta1) * math.log((1 - theta1) / 0.9)
        assert attacker_cost(0.3, baseline) == pytest.approx(kl / math.log(10.0))
