"""
Attacker / defender optimisation tests: Newton active-set vs brute-force lattice.
"""
import numpy as np
import pytest

from src.channel_model import GilbertElliotParams, initial_beliefs
from src.closed_form import myopic_tp_length, throughput_from_tp
from src.config import BASELINE_ROW, TABLE1_ROWS
from src.errors import ParameterError
from src.optimizer import (
    brute_force_simplex,
    grid_then_refine,
    problem3_gradient,
    problem3_hessian_diag,
    problem3_objective,
    solve_problem1,
    solve_problem2,
    solve_problem3,
    solve_problem4,
    solve_softmax_game,
)
from src.policy_engine import boltzmann_probs


@pytest.fixture
def baseline():
    return GilbertElliotParams.from_row(BASELINE_ROW)


@pytest.fixture
def three_channels():
    return tuple(GilbertElliotParams.from_row(r) for r in TABLE1_ROWS[:3])


class TestProblem3:
    def test_alpha_zero_is_uniform(self, three_channels):
        beliefs = initial_beliefs(three_channels)
        rep = solve_problem3(np.full(3, 1 / 3), beliefs, three_channels, 0.0)
        assert rep.converged
        np.testing.assert_allclose(rep.solution, np.full(3, 1 / 3))

    def test_symmetric_problem(self, baseline):
        channels = (baseline, baseline)
        rep = solve_problem3([0.5, 0.5], [0.6, 0.6], channels, 0.5)
        assert rep.converged
        np.testing.assert_allclose(rep.solution, [0.5, 0.5], atol=1e-8)

    @pytest.mark.parametrize("alpha", [0.3, 0.8])
    def test_matches_brute_force(self, three_channels, alpha):
        beliefs = initial_beliefs(three_channels)
        q = boltzmann_probs(beliefs, 2.0)
        rep = solve_problem3(q, beliefs, three_channels, alpha)
        grid = brute_force_simplex(lambda d: problem3_objective(d, q, beliefs, three_channels, alpha),
                                   3, 0.01, refine=2)
        assert rep.converged
        assert rep.kkt_residual <= 1e-8
        assert rep.solution.sum() == pytest.approx(1.0)
        assert rep.objective_value <= grid.objective_value + 1e-9
        assert grid.objective_value - rep.objective_value <= 1e-4

    def test_gradient_finite_difference(self, three_channels):
        beliefs = initial_beliefs(three_channels)
        q = boltzmann_probs(beliefs, 2.0)
        d = np.array([0.2, 0.3, 0.5])
        g = problem3_gradient(d, q, beliefs, three_channels, 0.6)
        h = 1e-6
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (problem3_objective(d + e, q, beliefs, three_channels, 0.6)
                  - problem3_objective(d - e, q, beliefs, three_channels, 0.6)) / (2 * h)
            assert fd == pytest.approx(g[i], rel=1e-6)

    def test_hessian_finite_difference(self, three_channels):
        beliefs = initial_beliefs(three_channels)
        q = boltzmann_probs(beliefs, 2.0)
        d = np.array([0.2, 0.3, 0.5])
        hess = problem3_hessian_diag(d, q, beliefs, three_channels, 0.6)
        h = 1e-5
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (problem3_gradient(d + e, q, beliefs, three_channels, 0.6)[i]
                  - problem3_gradient(d - e, q, beliefs, three_channels, 0.6)[i]) / (2 * h)
            assert fd == pytest.approx(hess[i], rel=1e-5)

    def test_dimension_mismatch(self, three_channels):
        with pytest.raises(ParameterError):
            solve_problem3([0.5, 0.5], [0.6, 0.6, 0.6], three_channels, 0.5)

    def test_q_must_be_distribution(self, three_channels):
        with pytest.raises(ParameterError):
            solve_problem3([0.5, 0.5, 0.5], [0.6, 0.6, 0.6], three_channels, 0.5)



    def test_converges_near_flat_optimum(self):
        # table1, α=0.15, τ≈0.75: 梯度 ~1e-8 时 f 的变化已低于舍入误差
        channels = tuple(GilbertElliotParams.from_row(r) for r in TABLE1_ROWS)
        beliefs = initial_beliefs(channels)
        q = boltzmann_probs(beliefs, 0.7499)
        rep = solve_problem3(q, beliefs, channels, 0.15)
        grid = brute_force_simplex(lambda d: problem3_objective(d, q, beliefs, channels, 0.15),
                                   4, 0.02, refine=2)
        assert rep.converged
        assert rep.kkt_residual <= 1e-8
        assert rep.objective_value <= grid.objective_value + 1e-9

    def test_random_table1_instances_converge(self):
        channels = tuple(GilbertElliotParams.from_row(r) for r in TABLE1_ROWS)
        rng = np.random.default_rng(2024)
        for _ in range(300):
            q = rng.dirichlet(np.ones(4))
            beliefs = rng.uniform(0.05, 0.95, size=4)
            alpha = float(rng.uniform(0.01, 1.0))
            rep = solve_problem3(q, beliefs, channels, alpha)
            assert rep.converged, (q, beliefs, alpha, rep.message)
            assert rep.kkt_residual <= 1e-8
            assert rep.solution.sum() == pytest.approx(1.0)
            assert np.all(rep.solution >= 0.0)


class TestBruteForce:
    def test_linear_objective_hits_vertex(self):
        rep = brute_force_simplex(lambda x: x @ np.array([3.0, 1.0, 2.0]), 3, 0.1, refine=0)
        np.testing.assert_allclose(rep.solution, [0.0, 1.0, 0.0], atol=1e-12)

    def test_maximize(self):
        rep = brute_force_simplex(lambda x: x @ np.array([3.0, 1.0, 2.0]), 3, 0.1, refine=0, maximize=True)
        assert rep.objective_value == pytest.approx(3.0)

    def test_dimension_limit(self):
        with pytest.raises(ParameterError):
            brute_force_simplex(lambda x: x.sum(axis=1), 6, 0.5)


class TestScalarSearch:
    def test_quadratic(self):
        x, fx = grid_then_refine(lambda x: (x - 0.3) ** 2, 0.0, 1.0)
        assert x == pytest.approx(0.3, abs=1e-6)
        assert fx == pytest.approx(0.0, abs=1e-10)

    def test_boundary_maximum(self):
        x, _ = grid_then_refine(lambda x: x, 0.0, 1.0, maximize=True)
        assert x == pytest.approx(1.0)


class TestSoftmaxGame:
    def test_problem1_alpha_zero(self, baseline):
        assert solve_problem1(0.8, 0.0, baseline) == 0.5

    def test_problem1_q_one_attacks_main_channel(self, baseline):
        assert solve_problem1(1.0, 0.5, baseline) == pytest.approx(1.0, abs=1e-6)

    def test_no_attack(self, baseline):
        sol = solve_softmax_game(0.0, baseline)
        assert sol.q_star == 1.0
        assert sol.throughput == pytest.approx(0.8222, abs=1e-4)

    def test_full_attack(self, baseline):
        assert solve_problem2(1.0, baseline) == 0.5

    @pytest.mark.parametrize("alpha", [0.3, 0.6])
    def test_softmax_beats_myopic(self, baseline, alpha):
        sol = solve_softmax_game(alpha, baseline)
        u_myopic = throughput_from_tp(myopic_tp_length(baseline, alpha))
        assert sol.throughput > u_myopic + 0.01
        assert 0.5 <= sol.q_star <= 1.0
        assert 0.0 <= sol.d_star <= 1.0

    def test_alpha_range(self, baseline):
        with pytest.raises(ParameterError):
            solve_softmax_game(1.5, baseline)


class TestProblem4:
    def test_tau_search(self, three_channels):
        beliefs = initial_beliefs(three_channels)
        rep = solve_problem4(beliefs, three_channels, 0.5)
        assert 1e-3 <= rep.solution <= 1e2
        assert rep.objective_value >= 1.0
        assert rep.extras["q"].sum() == pytest.approx(1.0)

    def test_full_simplex_not_worse_than_tau_family(self, baseline):
        channels = (baseline, baseline)
        beliefs = np.array([0.7, 0.4])
        by_tau = solve_problem4(beliefs, channels, 0.5)
        by_grid = solve_problem4(beliefs, channels, 0.5, parametrization="full_simplex", simplex_step=0.02)
        assert by_grid.objective_value >= by_tau.objective_value - 1e-2

    def test_tau_star_nondecreasing_in_alpha(self):
        channels = tuple(GilbertElliotParams.from_row(r) for r in TABLE1_ROWS)
        beliefs = initial_beliefs(channels)
        taus = [solve_problem4(beliefs, channels, a).solution for a in np.linspace(0.0, 1.0, 21)]
        assert taus[0] == pytest.approx(1e-3, rel=1e-9)
        for prev, cur in zip(taus, taus[1:]):
            assert cur >= prev * (1.0 - 1e-3)

    def test_unknown_parametrization(self, three_channels):
        with pytest.raises(ParameterError):
            solve_problem4(initial_beliefs(three_channels), three_channels, 0.5, parametrization="bogus")
