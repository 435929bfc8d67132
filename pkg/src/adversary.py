"""
攻击方: 四种分配策略 (greedy / uniform / Ω / α-optimal), 逐时隙的干扰采样,
以及基于 SPRT 平均样本数的攻击代价。
"""
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import softmax

from src.channel_model import as_belief_vector
from src.config import SIMPLEX_TOL
from src.errors import ParameterError, SolverError
from src.optimizer import solve_problem3
from src.policy_engine import myopic_select
from src.sprt_detection import SprtHypotheses, bernoulli_kl

logger = logging.getLogger("PYL.adversary")


class AttackKind(str, Enum):
    GREEDY = "greedy"
    UNIFORM = "uniform"
    OMEGA = "omega"
    ALPHA_OPTIMAL = "alpha_optimal"


@dataclass(frozen=True)
class AttackStrategySpec:
    kind: AttackKind
    tau_a: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        if self.kind is AttackKind.OMEGA and not (self.tau_a is not None and self.tau_a > 0.0):
            raise ParameterError(f"Omega strategy needs tau_a > 0, got {self.tau_a}")

    @property
    def label(self):
        if self.kind is AttackKind.OMEGA:
            return f"omega(tau_a={self.tau_a:g})"
        return self.kind.value


def check_alpha(alpha):
    if not (0.0 <= alpha <= 1.0):
        raise ParameterError(f"attack probability must lie in [0, 1], got {alpha}")
    return float(alpha)


def check_division(d):
    d = np.asarray(d, dtype=float)
    if d.ndim != 1 or np.any(d < -SIMPLEX_TOL) or abs(d.sum() - 1.0) > SIMPLEX_TOL:
        raise ParameterError(f"division probabilities must lie on the simplex: {d}")
    return np.clip(d, 0.0, None)


# ==========================================
# 1. 分配概率 d
# ==========================================
def greedy_division(beliefs):
    """只打信念最大的信道"""
    beliefs = as_belief_vector(beliefs)
    d = np.zeros(beliefs.size)
    d[myopic_select(beliefs)] = 1.0
    return d


def uniform_division(n):
    if n < 2:
        raise ParameterError(f"need at least two channels, got {n}")
    return np.full(n, 1.0 / n)


def omega_division(beliefs, tau_a):
    """只知道信道统计 Ω: 温度 τ_a 的 Boltzmann 分配"""
    if not (tau_a > 0.0):
        raise ParameterError(f"attacker temperature must be positive, got {tau_a}")
    beliefs = as_belief_vector(beliefs)
    return softmax(beliefs / tau_a)


def optimal_division(q, beliefs, alpha, channels):
    """α-optimal: 单纯形上最小化防御方期望 TP 长度"""
    check_alpha(alpha)
    rep = solve_problem3(q, beliefs, channels, alpha)
    if not rep.converged:
        raise SolverError(
            f"alpha-optimal division did not converge: {rep.message}, "
            f"KKT residual {rep.kkt_residual:.3e} after {rep.iterations} iterations"
        )
    return rep.solution


class DivisionCache:
    """(Q, Ω) -> d* 的小型 LRU, 同构信道下信念组合大量重复"""

    def __init__(self, maxsize=4096, decimals=12):
        self.maxsize = maxsize
        self.decimals = decimals
        self._store = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, q, beliefs, alpha, channels):
        key = (np.round(q, self.decimals).tobytes(), np.round(beliefs, self.decimals).tobytes(), alpha)
        if key in self._store:
            self.hits += 1
            self._store.move_to_end(key)
            return self._store[key]
        self.misses += 1
        d = optimal_division(q, beliefs, alpha, channels)
        self._store[key] = d
        if len(self._store) > self.maxsize:
            self._store.popitem(last=False)
        return d


def division_for(strategy, beliefs, selection, channels, alpha, cache=None):
    """按策略给出本 TP 使用的分配概率"""
    if strategy.kind is AttackKind.GREEDY:
        return greedy_division(beliefs)
    if strategy.kind is AttackKind.UNIFORM:
        return uniform_division(len(beliefs))
    if strategy.kind is AttackKind.OMEGA:
        return omega_division(beliefs, strategy.tau_a)
    if alpha == 0.0:
        return uniform_division(len(beliefs))
    if cache is not None:
        return cache.get(selection, beliefs, alpha, channels)
    return optimal_division(selection, beliefs, alpha, channels)


# ==========================================
# 2. 逐时隙干扰
# ==========================================
def attack_from_uniforms(d, alpha, u_attack, u_target):
    """以概率 α 干扰, 目标按 d 逆 CDF 抽取; 每个时隙最多一个目标"""
    if u_attack >= alpha:
        return None
    idx = int(np.searchsorted(np.cumsum(d), u_target, side="right"))
    return min(idx, len(d) - 1)


def sample_attack(d, alpha, rng):
    d = check_division(d)
    alpha = check_alpha(alpha)
    u = rng.random(2)
    return attack_from_uniforms(d, alpha, u[0], u[1])


# ==========================================
# 3. 攻击代价
# ==========================================
def attacker_cost(alpha, params):
    """KL(θ1 || θ0) / ln(1/p10), θ0 = p10, θ1 = 1 - p11(1-α)"""
    alpha = check_alpha(alpha)
    if not (0.0 < params.p10 < 1.0) or not (0.0 < params.p11 < 1.0):
        raise ParameterError(f"attacker cost needs p10, p11 in (0,1), got p10={params.p10}, p11={params.p11}")
    hyp = SprtHypotheses.from_attack(params, alpha)
    return bernoulli_kl(hyp.theta1, hyp.theta0) / math.log(1.0 / params.p10)
