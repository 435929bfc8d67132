"""
Gilbert-Elliott 两状态信道: 参数校验, 信念传播, 多步转移概率, 状态采样

状态编码: 1 = 空闲 (idle), 0 = 占用 (busy)
"""
import logging
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from src.config import ROW_SUM_TOL
from src.errors import ClosedFormError, ParameterError

logger = logging.getLogger("PYL.channel_model")


class ChannelState(IntEnum):
    BUSY = 0
    IDLE = 1


@dataclass(frozen=True)
class GilbertElliotParams:
    """单条信道每个时隙的转移概率 p_ij = Pr{S(t+1)=j | S(t)=i}"""
    p11: float
    p10: float
    p01: float
    p00: float

    def __post_init__(self):
        for name in ("p11", "p10", "p01", "p00"):
            val = getattr(self, name)
            if not (0.0 <= val <= 1.0):
                raise ParameterError(f"{name}={val} is not a probability")
        if abs(self.p11 + self.p10 - 1.0) > ROW_SUM_TOL:
            raise ParameterError(f"p11 + p10 = {self.p11 + self.p10}, expected 1")
        if abs(self.p01 + self.p00 - 1.0) > ROW_SUM_TOL:
            raise ParameterError(f"p01 + p00 = {self.p01 + self.p00}, expected 1")

    @classmethod
    def from_row(cls, row):
        """表格行顺序 (p11, p10, p00, p01)"""
        p11, p10, p00, p01 = (float(x) for x in row)
        return cls(p11=p11, p10=p10, p01=p01, p00=p00)

    @property
    def correlation(self):
        return self.p11 - self.p01

    @property
    def positively_correlated(self):
        return self.p11 > self.p01

    @property
    def omega0(self):
        return stationary_occupancy(self)

    def require_positive_correlation(self, what="this expression"):
        if not self.positively_correlated:
            raise ParameterError(
                f"{what} requires p11 > p01 (got p11={self.p11}, p01={self.p01})"
            )


def _clamp(x):
    return min(1.0, max(0.0, x))


def transition_matrix(params):
    """P[s, s'], 行 = 当前状态 (0 busy, 1 idle)"""
    return np.array([[params.p00, params.p01],
                     [params.p10, params.p11]], dtype=float)


def stationary_occupancy(params):
    """ω0 = p01 / (p01 + p10), 信念传播 Γ 的不动点"""
    denom = params.p01 + params.p10
    if denom <= 0.0:
        raise ClosedFormError("degenerate chain (p01 = p10 = 0): stationary distribution undefined")
    return params.p01 / denom


def propagate_belief(params, omega):
    """Γ(ω) = ω·p11 + (1-ω)·p01, 未被感知信道的一步预测"""
    return _clamp(omega * params.p11 + (1.0 - omega) * params.p01)


def update_belief(params, omega, sensed, observation=None):
    """贝叶斯更新: 感知到空闲 -> p11, 感知到占用 -> p01, 未感知 -> Γ(ω)"""
    if not sensed:
        return propagate_belief(params, omega)
    if observation is None:
        raise ParameterError("a sensed channel needs an observation")
    return params.p11 if int(observation) == ChannelState.IDLE else params.p01


def k_step_idle_prob(params, j):
    """p01^(j) = ω0 - ω0·(p11 - p01)^j"""
    if j < 1:
        raise ParameterError(f"j must be >= 1, got {j}")
    w0 = stationary_occupancy(params)
    return _clamp(w0 - w0 * params.correlation ** j)


def step_state(params, state, rng):
    """按转移概率推进一个时隙, 只消耗 rng 的一个均匀数"""
    p_idle = params.p11 if int(state) == ChannelState.IDLE else params.p01
    return ChannelState.IDLE if rng.random() < p_idle else ChannelState.BUSY


# ==========================================
# 信念向量 (多信道)
# ==========================================
def as_belief_vector(values):
    """校验并返回 float 数组; N >= 2, 每项在 [0,1]"""
    beliefs = np.asarray(values, dtype=float)
    if beliefs.ndim != 1 or beliefs.size < 2:
        raise ParameterError(f"belief vector needs N >= 2 entries, got shape {beliefs.shape}")
    if np.any(beliefs < -ROW_SUM_TOL) or np.any(beliefs > 1.0 + ROW_SUM_TOL):
        raise ParameterError(f"beliefs outside [0,1]: {beliefs}")
    return np.clip(beliefs, 0.0, 1.0)


def channel_arrays(channels):
    """(p11, p01) 两个向量, 给向量化更新用"""
    p11 = np.array([c.p11 for c in channels], dtype=float)
    p01 = np.array([c.p01 for c in channels], dtype=float)
    return p11, p01


def propagate_beliefs(channels, beliefs):
    p11, p01 = channel_arrays(channels)
    beliefs = np.asarray(beliefs, dtype=float)
    return np.clip(beliefs * p11 + (1.0 - beliefs) * p01, 0.0, 1.0)


def initial_beliefs(channels, explicit=None):
    """没有先验信息时用平稳分布初始化"""
    if explicit is not None:
        beliefs = as_belief_vector(explicit)
        if beliefs.size != len(channels):
            raise ParameterError(
                f"initial beliefs have {beliefs.size} entries for {len(channels)} channels"
            )
        return beliefs
    return as_belief_vector([stationary_occupancy(c) for c in channels])
