"""
解析表达式: 传输周期 (TP) 长度, TP 马尔可夫链及其平稳分布, 吞吐量,
单信道 TP 长度, 随机化程度 (熵), 鲁棒性 / 性能指标, 温度下界。

N=2 同构信道的 myopic 平均 TP 长度有两条路径:
  - tp_chain_stationary: 截断后的 {L_k} 链做幂迭代 (数值基准)
  - myopic_tp_length: 修正分母后的闭式 ω̄ = (1-α)p2 / ((1-α)p2 + 1 - A)
印刷版的 ω̄ 分母是 (1-α)p2 - A, 对 baseline 参数会落在 [0,1] 以外,
myopic_tp_length_printed 把两者一起算出来并报告差异。
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import entropy

from src.channel_model import k_step_idle_prob, stationary_occupancy
from src.config import POWER_ITER_TOL, SIMPLEX_TOL, TP_MAX_TRUNCATION, TP_TAIL_MASS
from src.errors import ClosedFormError, ParameterError

logger = logging.getLogger("PYL.closed_form")


def _check_prob(name, x):
    if not (0.0 <= x <= 1.0):
        raise ParameterError(f"{name}={x} is not a probability")


# ==========================================
# 1. TP 马尔可夫链 (myopic, N=2 同构信道)
# ==========================================
@dataclass(frozen=True)
class TpChainSpec:
    params: object
    alpha: float
    truncation_k: Optional[int] = None

    def __post_init__(self):
        _check_prob("alpha", self.alpha)
        self.params.require_positive_correlation("the TP chain")
        if self.truncation_k is not None and self.truncation_k < 2:
            raise ParameterError(f"truncation_k must be >= 2, got {self.truncation_k}")

    @property
    def rho(self):
        """几何尾部的公比 p11(1-α)"""
        return self.params.p11 * (1.0 - self.alpha)

    def resolved_truncation(self):
        if self.truncation_k is not None:
            return self.truncation_k
        rho = self.rho
        if rho <= 0.0:
            return 2
        if rho >= 1.0:
            raise ClosedFormError("p11(1-alpha) = 1: TP lengths are not summable")
        k = int(math.ceil(math.log(TP_TAIL_MASS) / math.log(rho))) + 1
        if k > TP_MAX_TRUNCATION:
            raise ClosedFormError(
                f"TP chain needs truncation {k} > {TP_MAX_TRUNCATION} for tail mass {TP_TAIL_MASS}"
            )
        return max(k, 2)


@dataclass(frozen=True)
class TpStatistics:
    mean_length: float
    distribution: np.ndarray     # λ_1..λ_K
    omega_bar: float
    truncation_k: int
    iterations: int = 0


def tp_chain_transition(spec, i, j):
    """r_ij: 上一个 TP 长度为 i 时, 下一个 TP 长度为 j 的概率"""
    if i < 1 or j < 1:
        raise ParameterError(f"TP lengths start at 1, got i={i}, j={j}")
    a = spec.alpha
    if a >= 1.0:
        return 1.0 if j == 1 else 0.0
    p_next = k_step_idle_prob(spec.params, i + 1)
    if j == 1:
        return 1.0 - p_next * (1.0 - a)
    p11 = spec.params.p11
    return p_next * (1.0 - a) ** (j - 1) * p11 ** (j - 2) * (1.0 - p11 * (1.0 - a))


def tp_chain_row_sum(spec, i):
    """截断到 K 再加上解析的几何尾部"""
    k = spec.resolved_truncation()
    head = sum(tp_chain_transition(spec, i, j) for j in range(1, k + 1))
    if spec.alpha >= 1.0:
        return head
    tail = k_step_idle_prob(spec.params, i + 1) * (1.0 - spec.alpha) * spec.rho ** (k - 1)
    return head + tail


def _chain_columns(spec, k):
    """R 的结构: R(:,k) = R(:,2)·ρ^(k-2); 只需要两列和截断尾部"""
    a = spec.alpha
    rho = spec.rho
    lengths = np.arange(1, k + 1)
    w0 = stationary_occupancy(spec.params)
    p_next = np.clip(w0 - w0 * spec.params.correlation ** (lengths + 1), 0.0, 1.0)
    col1 = 1.0 - p_next * (1.0 - a)
    col2 = p_next * (1.0 - a) * (1.0 - rho)
    tail = p_next * (1.0 - a) * rho ** (k - 1)
    geom = rho ** np.arange(0, k - 1)   # k = 2..K
    return col1, col2, tail, geom


def tp_chain_stationary(spec, max_iter=200_000):
    """幂迭代求 ΛR = Λ, 截断尾部质量并入最后一列"""
    if spec.alpha >= 1.0:
        return TpStatistics(mean_length=1.0, distribution=np.array([1.0]),
                            omega_bar=0.0, truncation_k=1)
    k = spec.resolved_truncation()
    col1, col2, tail, geom = _chain_columns(spec, k)

    lam = np.zeros(k)
    lam[0] = 1.0
    for it in range(1, max_iter + 1):
        new = np.empty(k)
        new[0] = lam @ col1
        new[1:] = (lam @ col2) * geom
        new[-1] += lam @ tail
        new /= new.sum()
        resid = np.abs(new - lam).sum()
        lam = new
        if resid < POWER_ITER_TOL:
            break
    else:
        raise ClosedFormError(f"TP chain power iteration did not converge in {max_iter} steps")

    mean = float(np.arange(1, k + 1) @ lam)
    rho = spec.rho
    omega_bar = float(lam[1] / (1.0 - rho)) if k >= 2 and rho < 1.0 else 0.0
    logger.debug(f"TP chain: K={k}, iterations={it}, mean={mean:.6f}")
    return TpStatistics(mean_length=mean, distribution=lam, omega_bar=omega_bar,
                        truncation_k=k, iterations=it)


# ==========================================
# 2. Myopic 平均 TP 长度 (印刷版 vs 修正版)
# ==========================================
def _printed_terms(params, alpha):
    """印刷式中的 p01^(2) 和 A"""
    c = params.correlation
    p2 = (params.p01 - params.p01 * c ** 2) / (params.p01 + params.p10)
    rho = params.p11 * (1.0 - alpha)
    w0 = stationary_occupancy(params)
    a_term = w0 * (1.0 - alpha) * (1.0 - c ** 3 * (1.0 - rho) / (1.0 - rho * c))
    return p2, a_term, rho


def omega_bar_corrected(params, alpha):
    if alpha >= 1.0:
        return 0.0
    p2, a_term, _ = _printed_terms(params, alpha)
    num = (1.0 - alpha) * p2
    return num / (num + 1.0 - a_term)


def myopic_tp_length(params, alpha):
    """L^m(α), 修正分母路径 (与 tp_chain_stationary 一致); α=1 直接取极限 1"""
    _check_prob("alpha", alpha)
    params.require_positive_correlation("L^m(alpha)")
    if alpha >= 1.0:
        return 1.0
    rho = params.p11 * (1.0 - alpha)
    return 1.0 + omega_bar_corrected(params, alpha) / (1.0 - rho)


def omega_bar_fixed_point(params, alpha, tol=1e-14, max_iter=10_000):
    """ω̄ = (1-α)·Σ_k λ_k(ω̄)·p01^(k+1), λ 取平稳分布的几何形式, 级数数值求和"""
    _check_prob("alpha", alpha)
    params.require_positive_correlation("the omega-bar fixed point")
    if alpha >= 1.0:
        return 0.0
    spec = TpChainSpec(params, alpha)
    k = spec.resolved_truncation()
    rho = spec.rho
    lengths = np.arange(1, k + 1)
    w0 = stationary_occupancy(params)
    p_next = w0 - w0 * params.correlation ** (lengths + 1)
    shape = np.empty(k)
    shape[0] = 0.0
    shape[1:] = (1.0 - rho) * rho ** np.arange(0, k - 1)

    omega = w0
    for _ in range(max_iter):
        lam = omega * shape
        lam[0] = 1.0 - omega
        new = (1.0 - alpha) * float(lam @ p_next)
        if abs(new - omega) < tol:
            return new
        omega = new
    raise ClosedFormError("omega-bar fixed point did not converge")


@dataclass(frozen=True)
class PrintedFormulaReport:
    alpha: float
    omega_bar_printed: float
    length_printed: float
    printed_in_range: bool
    omega_bar_corrected: float
    length_corrected: float
    length_chain: float

    @property
    def discrepancy(self):
        return self.length_printed - self.length_chain


def myopic_tp_length_printed(params, alpha):
    """按印刷式逐项计算 L^m(α), 同时给出修正版和链的数值结果"""
    _check_prob("alpha", alpha)
    params.require_positive_correlation("the printed TP-length formula")
    chain = tp_chain_stationary(TpChainSpec(params, alpha)).mean_length
    if alpha >= 1.0:
        return PrintedFormulaReport(alpha, 0.0, 1.0, True, 0.0, 1.0, chain)
    p2, a_term, rho = _printed_terms(params, alpha)
    num = (1.0 - alpha) * p2
    denom = num - a_term
    omega_printed = num / denom if denom != 0.0 else math.inf
    in_range = 0.0 <= omega_printed <= 1.0
    if not in_range:
        logger.warning(
            f"⚠️ printed omega-bar = {omega_printed:.6f} at alpha={alpha:g} lies outside [0,1]"
        )
    omega_fixed = omega_bar_corrected(params, alpha)
    return PrintedFormulaReport(
        alpha=alpha,
        omega_bar_printed=omega_printed,
        length_printed=1.0 + omega_printed / (1.0 - rho),
        printed_in_range=in_range,
        omega_bar_corrected=omega_fixed,
        length_corrected=1.0 + omega_fixed / (1.0 - rho),
        length_chain=chain,
    )


# ==========================================
# 3. Softmax (N=2) 与反向策略
# ==========================================
def contrarian_tp_length(params, x):
    """L^n(x) = 1 + p01(1-x) / (1 - p11(1-x)): 总选信念小的信道"""
    _check_prob("x", x)
    denom = 1.0 - params.p11 * (1.0 - x)
    if denom <= 0.0:
        raise ClosedFormError("p11(1-x) = 1: contrarian TP length diverges")
    return 1.0 + params.p01 * (1.0 - x) / denom


def softmax_tp_length(params, q, d, alpha):
    """L^s(q,d) = q·L^m(αd) + (1-q)·L^n(α(1-d))"""
    if not (0.5 <= q <= 1.0):
        raise ParameterError(f"main probability q must lie in [0.5, 1], got {q}")
    _check_prob("d", d)
    _check_prob("alpha", alpha)
    return (q * myopic_tp_length(params, alpha * d)
            + (1.0 - q) * contrarian_tp_length(params, alpha * (1.0 - d)))


def throughput_from_tp(mean_tp):
    """U = 1 - 1/L̄"""
    if not (mean_tp >= 1.0):
        raise ParameterError(f"mean TP length must be >= 1, got {mean_tp}")
    return 1.0 - 1.0 / mean_tp


def softmax_throughput(params, q, d, alpha):
    return throughput_from_tp(softmax_tp_length(params, q, d, alpha))


# ==========================================
# 4. 多信道: 单信道 TP 长度
# ==========================================
def per_channel_tp_length(omega_i, p11_i, effective_attack):
    """L(ω, e) = 1 + ω(1-e) / (1 - p11(1-e)); 支持 numpy 广播"""
    omega_i = np.asarray(omega_i, dtype=float)
    keep = 1.0 - np.asarray(effective_attack, dtype=float)
    denom = 1.0 - np.asarray(p11_i, dtype=float) * keep
    if np.any(denom <= 0.0):
        raise ClosedFormError("p11(1-e) = 1: per-channel TP length diverges")
    out = 1.0 + omega_i * keep / denom
    return float(out) if out.ndim == 0 else out


# ==========================================
# 5. 随机化程度与评价指标
# ==========================================
def selection_entropy(probs):
    """H = -Σ p ln p"""
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < -SIMPLEX_TOL) or abs(probs.sum() - 1.0) > 1e-9:
        raise ParameterError(f"not a probability vector: {probs}")
    return float(entropy(np.clip(probs, 0.0, None)))


def bernoulli_entropy(q):
    _check_prob("q", q)
    return selection_entropy([q, 1.0 - q])


def robustness(u_zero, u_alpha):
    """R = 1 - (U(0) - U(α)) / U(0) = U(α)/U(0)"""
    if not (u_zero > 0.0):
        raise ParameterError(f"robustness needs U(0) > 0, got {u_zero}")
    return 1.0 - (u_zero - u_alpha) / u_zero


def performance(u_zero):
    _check_prob("U(0)", u_zero)
    return u_zero


# ==========================================
# 6. 温度下界 (N >= 3 同构信道)
# ==========================================
def _check_theorem4(params, n):
    if n < 3:
        raise ParameterError(f"the temperature bound needs more than two channels, got N={n}")
    params.require_positive_correlation("the temperature bound")


def theorem4_alpha_threshold(params, n):
    """α 的门限 (ω0 - p01)N / (ω0 N - p01)"""
    _check_theorem4(params, n)
    w0 = stationary_occupancy(params)
    return (w0 - params.p01) * n / (w0 * n - params.p01)


def theorem4_temperature_bound(params, n, alpha):
    """τ > (ω0 - p01) / ln(p01(N-α) / (ω0 N (1-α))); α=1 时取极限 0"""
    _check_prob("alpha", alpha)
    threshold = theorem4_alpha_threshold(params, n)
    if alpha <= threshold:
        raise ClosedFormError(
            f"alpha={alpha:g} does not exceed the threshold {threshold:.6f}; temperature bound undefined"
        )
    if alpha >= 1.0:
        return 0.0
    w0 = stationary_occupancy(params)
    ratio = params.p01 * (n - alpha) / (w0 * n * (1.0 - alpha))
    if ratio <= 1.0:
        raise ClosedFormError(f"log argument {ratio} <= 1")
    return (w0 - params.p01) / math.log(ratio)
