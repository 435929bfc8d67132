"""
防御方 (认知无线电) 的信道选择策略: myopic / softmax-Bernoulli / softmax-Boltzmann

所有随机策略都只用一个均匀数做决策 (逆 CDF), 这样不同策略在同一随机数流下
可以逐时隙对比。
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import softmax

from src.channel_model import as_belief_vector
from src.errors import ParameterError

logger = logging.getLogger("PYL.policy_engine")


class PolicyKind(str, Enum):
    MYOPIC = "myopic"
    BERNOULLI = "bernoulli"
    BOLTZMANN = "boltzmann"
    CONTRARIAN = "contrarian"   # 总是选信念最小的信道, 只用于 L^n 的校验


class ResampleMode(str, Enum):
    TP_BOUNDARY = "tp_boundary"
    EVERY_SLOT = "every_slot"


@dataclass(frozen=True)
class PolicySpec:
    kind: PolicyKind
    q: Optional[float] = None
    tau: Optional[float] = None
    resample_mode: ResampleMode = ResampleMode.TP_BOUNDARY

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        object.__setattr__(self, "resample_mode", ResampleMode(self.resample_mode))
        if self.kind is PolicyKind.BERNOULLI:
            if self.q is None or not (0.5 <= self.q <= 1.0):
                raise ParameterError(f"Bernoulli policy needs q in [0.5, 1], got {self.q}")
        if self.kind is PolicyKind.BOLTZMANN:
            if self.tau is None or not (self.tau > 0.0):
                raise ParameterError(f"Boltzmann policy needs tau > 0, got {self.tau}")

    @classmethod
    def myopic(cls, resample_mode=ResampleMode.TP_BOUNDARY):
        return cls(PolicyKind.MYOPIC, resample_mode=resample_mode)

    @classmethod
    def bernoulli(cls, q, resample_mode=ResampleMode.TP_BOUNDARY):
        return cls(PolicyKind.BERNOULLI, q=q, resample_mode=resample_mode)

    @classmethod
    def boltzmann(cls, tau, resample_mode=ResampleMode.TP_BOUNDARY):
        return cls(PolicyKind.BOLTZMANN, tau=tau, resample_mode=resample_mode)

    @classmethod
    def contrarian(cls, resample_mode=ResampleMode.TP_BOUNDARY):
        return cls(PolicyKind.CONTRARIAN, resample_mode=resample_mode)

    @property
    def label(self):
        if self.kind is PolicyKind.BERNOULLI:
            return f"bernoulli(q={self.q:g})"
        if self.kind is PolicyKind.BOLTZMANN:
            return f"boltzmann(tau={self.tau:g})"
        return self.kind.value


def _inverse_cdf(probs, u):
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, len(probs) - 1)


def myopic_select(beliefs):
    """argmax ω_i, 并列时取最小下标"""
    beliefs = as_belief_vector(beliefs)
    return int(np.argmax(beliefs))


def contrarian_select(beliefs):
    beliefs = as_belief_vector(beliefs)
    return int(np.argmin(beliefs))


def _check_bernoulli(beliefs, q):
    if beliefs.size != 2:
        raise ParameterError(f"Bernoulli selection is defined for N=2, got N={beliefs.size}")
    if not (0.5 <= q <= 1.0):
        raise ParameterError(f"q must lie in [0.5, 1], got {q}")


def bernoulli_select(beliefs, q, rng):
    return bernoulli_select_u(beliefs, q, rng.random())


def bernoulli_select_u(beliefs, q, u):
    beliefs = as_belief_vector(beliefs)
    _check_bernoulli(beliefs, q)
    best = int(np.argmax(beliefs))
    return best if u < q else 1 - best


def boltzmann_probs(beliefs, tau):
    """p_a = exp(ω_a/τ) / Σ exp(ω_i/τ); softmax 内部先减最大值"""
    if not (tau > 0.0):
        raise ParameterError(f"temperature must be positive, got {tau}")
    beliefs = as_belief_vector(beliefs)
    return softmax(beliefs / tau)


def boltzmann_select(beliefs, tau, rng):
    return _inverse_cdf(boltzmann_probs(beliefs, tau), rng.random())


def selection_probs(spec, beliefs):
    """策略在当前信念下的选择分布 Q"""
    beliefs = as_belief_vector(beliefs)
    if spec.kind is PolicyKind.BOLTZMANN:
        return boltzmann_probs(beliefs, spec.tau)
    probs = np.zeros(beliefs.size)
    if spec.kind is PolicyKind.MYOPIC:
        probs[myopic_select(beliefs)] = 1.0
    elif spec.kind is PolicyKind.CONTRARIAN:
        probs[contrarian_select(beliefs)] = 1.0
    else:
        _check_bernoulli(beliefs, spec.q)
        best = int(np.argmax(beliefs))
        probs[best] = spec.q
        probs[1 - best] += 1.0 - spec.q
    return probs


def select_action(spec, beliefs, u):
    """用一个均匀数 u 给出动作; myopic/contrarian 忽略 u"""
    if spec.kind is PolicyKind.MYOPIC:
        return myopic_select(beliefs)
    if spec.kind is PolicyKind.CONTRARIAN:
        return contrarian_select(beliefs)
    if spec.kind is PolicyKind.BERNOULLI:
        return bernoulli_select_u(beliefs, spec.q, u)
    return _inverse_cdf(boltzmann_probs(beliefs, spec.tau), u)
