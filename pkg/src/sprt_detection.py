"""
Wald SPRT 攻击检测: 观测 Y=1 表示一次失败的传输。
H0: 无攻击, Y ~ Bernoulli(θ0 = p10)
H1: 有攻击, Y ~ Bernoulli(θ1 = 1 - p11(1-α))
"""
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.special import rel_entr

from src.errors import ClosedFormError, ParameterError

logger = logging.getLogger("PYL.sprt_detection")

KL_ZERO_TOL = 1e-15


class Decision(str, Enum):
    ACCEPT_H1 = "accept_H1"
    ACCEPT_H0 = "accept_H0"
    CONTINUE = "continue"


@dataclass(frozen=True)
class SprtHypotheses:
    theta0: float
    theta1: float

    def __post_init__(self):
        for name in ("theta0", "theta1"):
            val = getattr(self, name)
            if not (0.0 <= val <= 1.0):
                raise ParameterError(f"{name}={val} is not a probability")

    @classmethod
    def from_attack(cls, params, alpha):
        return cls(theta0=params.p10, theta1=1.0 - params.p11 * (1.0 - alpha))

    @property
    def well_posed(self):
        return 0.0 < self.theta0 < self.theta1 < 1.0 or (0.0 < self.theta0 < self.theta1 == 1.0)


@dataclass(frozen=True)
class SprtState:
    llr_sum: float = 0.0
    samples_seen: int = 0


@dataclass(frozen=True)
class SprtThresholds:
    upper_a: float
    lower_b: float

    def __post_init__(self):
        if not (self.lower_b < self.upper_a):
            raise ParameterError(f"need b < a, got a={self.upper_a}, b={self.lower_b}")


def bernoulli_kl(theta1, theta0):
    """KL(Bern(θ1) || Bern(θ0)), ASN 公式的分母"""
    if abs(theta1 - theta0) <= KL_ZERO_TOL:
        return 0.0
    return float(rel_entr(theta1, theta0) + rel_entr(1.0 - theta1, 1.0 - theta0))


def llr_increment(observation, hyp):
    """ln f1(x)/f0(x)"""
    if hyp.theta1 == hyp.theta0:
        return 0.0
    if int(observation) == 1:
        return math.log(hyp.theta1 / hyp.theta0)
    if hyp.theta1 >= 1.0:
        return -math.inf
    return math.log((1.0 - hyp.theta1) / (1.0 - hyp.theta0))


def decide(llr_sum, thresholds):
    if llr_sum >= thresholds.upper_a:
        return Decision.ACCEPT_H1
    if llr_sum < thresholds.lower_b:
        return Decision.ACCEPT_H0
    return Decision.CONTINUE


def sprt_step(state, observation, hyp, thresholds):
    """S_k >= a -> H1; S_k < b -> H0; 否则继续 (返回新的 state, 原 state 不变)"""
    new_state = replace(state,
                        llr_sum=state.llr_sum + llr_increment(observation, hyp),
                        samples_seen=state.samples_seen + 1)
    return decide(new_state.llr_sum, thresholds), new_state


def wald_thresholds(p_fa, p_m):
    """a = ln((1-P_M)/P_FA), b = ln(P_M/(1-P_FA))"""
    for name, val in (("p_fa", p_fa), ("p_m", p_m)):
        if not (0.0 < val < 0.5):
            raise ParameterError(f"{name} must lie in (0, 0.5), got {val}")
    return SprtThresholds(upper_a=math.log((1.0 - p_m) / p_fa),
                          lower_b=math.log(p_m / (1.0 - p_fa)))


def wald_asn_constant(thresholds, p_m):
    """H1 下 Wald 近似的分子 C = (1-P_M)a + P_M b"""
    return (1.0 - p_m) * thresholds.upper_a + p_m * thresholds.lower_b


def asn_under_attack(alpha, params, c=None):
    """E[N|H1] = C / KL(θ1||θ0), C 默认为 ln(1/p10)"""
    if not (0.0 <= alpha <= 1.0):
        raise ParameterError(f"attack probability must lie in [0, 1], got {alpha}")
    params.require_positive_correlation("the ASN formula")
    if alpha == 0.0:
        raise ClosedFormError("alpha = 0: theta1 = theta0 and the ASN is infinite")
    if not (0.0 < params.p10 < 1.0):
        raise ParameterError(f"ASN needs p10 in (0,1), got {params.p10}")
    if c is None:
        c = math.log(1.0 / params.p10)
    if not (c > 0.0):
        raise ParameterError(f"C must be positive, got {c}")
    hyp = SprtHypotheses.from_attack(params, alpha)
    return c / bernoulli_kl(hyp.theta1, hyp.theta0)


def asn_under_h0(hyp, thresholds, p_fa):
    """E[N|H0] = (P_FA·a + (1-P_FA)·b) / E_0[llr]"""
    drift = -bernoulli_kl(hyp.theta0, hyp.theta1)
    if drift == 0.0:
        raise ClosedFormError("identical hypotheses: ASN under H0 is infinite")
    return (p_fa * thresholds.upper_a + (1.0 - p_fa) * thresholds.lower_b) / drift


def run_sprt(observations, hyp, thresholds):
    """对一个观测序列跑 SPRT, 返回 (decision, 用掉的样本数)"""
    state = SprtState()
    decision = Decision.CONTINUE
    for x in observations:
        decision, state = sprt_step(state, x, hyp, thresholds)
        if decision is not Decision.CONTINUE:
            break
    return decision, state.samples_seen


@dataclass(frozen=True)
class SprtMonteCarlo:
    trials: int
    mean_samples: float
    stderr_samples: float
    rate_h1: float
    rate_h0: float
    undecided: int


def simulate_sprt(theta_true, hyp, thresholds, trials, rng, max_samples=10_000, block=64):
    """i.i.d. Bernoulli(theta_true) 观测流上的 SPRT, 按块向量化"""
    up = llr_increment(1, hyp)
    down = llr_increment(0, hyp)
    llr = np.zeros(trials)
    samples = np.zeros(trials, dtype=np.int64)
    decision = np.zeros(trials, dtype=np.int8)   # 0 继续, 1 H1, -1 H0
    done = 0
    while done < max_samples and np.any(decision == 0):
        for _ in range(min(block, max_samples - done)):
            active = decision == 0
            if not np.any(active):
                break
            x = rng.random(trials) < theta_true
            llr[active] += np.where(x[active], up, down)
            samples[active] += 1
            decision[active & (llr >= thresholds.upper_a)] = 1
            decision[active & (llr < thresholds.lower_b)] = -1
            done += 1
    decided = decision != 0
    used = samples[decided]
    mean = float(used.mean()) if used.size else math.nan
    stderr = float(used.std(ddof=1) / math.sqrt(used.size)) if used.size > 1 else math.nan
    return SprtMonteCarlo(
        trials=trials,
        mean_samples=mean,
        stderr_samples=stderr,
        rate_h1=float(np.mean(decision == 1)),
        rate_h0=float(np.mean(decision == -1)),
        undecided=int(np.sum(~decided)),
    )
