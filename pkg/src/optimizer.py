"""
攻防双方的优化问题:
  - solve_problem1: 攻击方在 N=2 下选择分配概率 d (最小化 softmax 吞吐量)
  - solve_problem2: 防御方选择主概率 q (最大化 d* 下的吞吐量)
  - solve_problem3: 攻击方在单纯形上最小化 Σ q_i L(ω_i, α d_i) (消元 + 牛顿 + active set)
  - solve_problem4: 防御方选择 Q (Boltzmann 温度族 / 小 N 全单纯形搜索)
每个求解器都有暴力网格作为对照。
"""
import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.optimize as sco

from src.closed_form import per_channel_tp_length, softmax_throughput
from src.config import DECREMENT_TOL, KKT_TOL, LINE_SEARCH_RTOL, NEWTON_TOL, SIMPLEX_TOL
from src.errors import ParameterError, SolverError
from src.policy_engine import boltzmann_probs

logger = logging.getLogger("PYL.optimizer")


@dataclass
class SolverReport:
    solution: Any
    objective_value: float
    kkt_residual: float
    iterations: int
    converged: bool
    message: str = ""
    extras: dict = field(default_factory=dict)


def _p11_vector(channels):
    return np.array([c.p11 for c in channels], dtype=float)


def _check_simplex(name, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or np.any(x < -SIMPLEX_TOL) or abs(x.sum() - 1.0) > SIMPLEX_TOL:
        raise ParameterError(f"{name} is not on the probability simplex: {x}")
    return np.clip(x, 0.0, None)


def _check_dims(q, beliefs, channels):
    if not (len(q) == len(beliefs) == len(channels)):
        raise ParameterError(
            f"dimension mismatch: |q|={len(q)}, |beliefs|={len(beliefs)}, channels={len(channels)}"
        )


# ==========================================
# 1. 攻击方分配: 目标函数及导数
# ==========================================
def problem3_objective(d, q, beliefs, channels, alpha):
    """Σ q_i L(ω_i, α d_i); d 可以是 (N,) 或批量 (M, N)"""
    d = np.asarray(d, dtype=float)
    q = np.asarray(q, dtype=float)
    beliefs = np.asarray(beliefs, dtype=float)
    _check_dims(q, beliefs, channels)
    lengths = per_channel_tp_length(beliefs, _p11_vector(channels), alpha * d)
    out = np.asarray(lengths) @ q
    return float(out) if np.ndim(out) == 0 else out


def problem3_gradient(d, q, beliefs, channels, alpha):
    d = np.asarray(d, dtype=float)
    p11 = _p11_vector(channels)
    denom = 1.0 - p11 * (1.0 - alpha * d)
    return -np.asarray(q) * alpha * np.asarray(beliefs) / denom ** 2


def problem3_hessian_diag(d, q, beliefs, channels, alpha):
    """h_ii = 2 q_i ω_i α² p11 / (1 - p11(1 - α d_i))³, 非对角为 0"""
    d = np.asarray(d, dtype=float)
    p11 = _p11_vector(channels)
    denom = 1.0 - p11 * (1.0 - alpha * d)
    return 2.0 * np.asarray(q) * np.asarray(beliefs) * alpha ** 2 * p11 / denom ** 3


# ==========================================
# 2. 攻击方分配求解: 等式消元 + 牛顿 + active set
# ==========================================
def _kkt_residual(g, free):
    nu = float(g[free].mean())
    resid = float(np.max(np.abs(g[free] - nu)))
    if np.any(~free):
        # 被固定在 0 的变量: 需要 g_i >= ν
        resid = max(resid, float(np.max(np.maximum(0.0, nu - g[~free]))))
    return resid, nu


def _reduced_newton_step(d, q, beliefs, channels, alpha, y, z, reduced):
    """消元后的牛顿方向: (diag(h_y) + h_z 11ᵀ) s = -r"""
    h = problem3_hessian_diag(d, q, beliefs, channels, alpha)
    h_red = np.diag(h[y]) + h[z]
    try:
        step = np.linalg.solve(h_red, -reduced)
    except np.linalg.LinAlgError:
        step = np.linalg.lstsq(h_red, -reduced, rcond=None)[0]
    if step @ reduced >= 0.0:
        step = -reduced
    return step


def solve_problem3(q, beliefs, channels, alpha, tol=NEWTON_TOL, max_iter=100):
    q = _check_simplex("q", q)
    beliefs = np.asarray(beliefs, dtype=float)
    _check_dims(q, beliefs, channels)
    if not (0.0 <= alpha <= 1.0):
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    n = q.size

    def f(x):
        return problem3_objective(x, q, beliefs, channels, alpha)

    def grad(x):
        return problem3_gradient(x, q, beliefs, channels, alpha)

    d = np.full(n, 1.0 / n)
    if alpha == 0.0:
        # 目标与 d 无关
        return SolverReport(d, f(d), 0.0, 0, True, "alpha = 0: objective independent of d")

    free = np.ones(n, dtype=bool)
    iterations = 0
    message = ""
    while iterations < max_iter:
        idx = np.flatnonzero(free)
        g = grad(d)
        if idx.size == 1:
            d = np.zeros(n)
            d[idx[0]] = 1.0
            g = grad(d)
            inner_done = True
        else:
            y, z = idx[:-1], idx[-1]
            reduced = g[y] - g[z]
            gap = float(np.max(np.abs(reduced)))
            step = _reduced_newton_step(d, q, beliefs, channels, alpha, y, z, reduced)
            # 牛顿减量 λ² = -sᵀr
            decrement = -float(step @ reduced)
            inner_done = gap <= tol or (gap <= KKT_TOL and decrement <= DECREMENT_TOL)

        if inner_done:
            resid, nu = _kkt_residual(g, free)
            active = np.flatnonzero(~free)
            if active.size:
                slack = g[active] - nu
                worst = int(np.argmin(slack))
                spread = float(np.max(np.abs(g[free] - nu)))
                # 乘子为负 (超出自由分量自身的误差), 放回自由集
                if slack[worst] < -max(tol, spread):
                    free[active[worst]] = True
                    iterations += 1
                    continue
            return SolverReport(d, f(d), resid, iterations, True, "converged")

        delta = np.zeros(n)
        delta[y] = step
        delta[z] = -step.sum()

        shrinking = (delta < 0.0) & free
        t_max = float(np.min(-d[shrinking] / delta[shrinking])) if np.any(shrinking) else np.inf
        if t_max <= 0.0:
            # 已在边界上且方向指向外侧: 直接固定
            blocked = shrinking & (d <= 0.0)
            d[blocked] = 0.0
            free[blocked] = False
            iterations += 1
            continue
        t = min(1.0, t_max)
        f0 = f(d)
        # 预测下降量低于 f 的舍入误差时 Armijo 已无法分辨, 直接走牛顿步
        if decrement > LINE_SEARCH_RTOL * max(abs(f0), 1.0):
            slope = float(g @ delta)
            while f(np.maximum(d + t * delta, 0.0)) > f0 + 1e-4 * t * slope and t > 1e-16:
                t *= 0.5
            if t <= 1e-16:
                message = "line search failed"
                break

        d = np.maximum(d + t * delta, 0.0)
        if t == t_max:
            hit = shrinking & (d <= 1e-15 + 1e-12 * np.abs(delta))
            d[hit] = 0.0
            free[hit] = False
        d[free] *= (1.0 - d[~free].sum()) / d[free].sum()
        iterations += 1

    g = grad(d)
    resid, _ = _kkt_residual(g, free)
    logger.warning(f"⚠️ alpha-optimal Newton stopped after {iterations} iterations (residual {resid:.3e})")
    return SolverReport(d, f(d), resid, iterations, False, message or "max iterations reached")


# ==========================================
# 3. 单纯形暴力网格 (对照)
# ==========================================
MAX_LATTICE_POINTS = 5_000_000


def _simplex_lattice(n, m):
    """所有和为 m 的 n 维非负整数向量"""
    pts = np.zeros((1, 0), dtype=np.int64)
    rem = np.array([m], dtype=np.int64)
    for _ in range(n - 1):
        counts = rem + 1
        starts = np.cumsum(counts) - counts
        vals = np.arange(counts.sum()) - np.repeat(starts, counts)
        pts = np.hstack([np.repeat(pts, counts, axis=0), vals[:, None]])
        rem = np.repeat(rem, counts) - vals
    return np.hstack([pts, rem[:, None]])


def _lattice_size(n, m):
    from math import comb
    return comb(m + n - 1, n - 1)


def _evaluate(objective, points, chunk=200_000):
    return np.concatenate([np.asarray(objective(points[i:i + chunk]), dtype=float)
                           for i in range(0, len(points), chunk)])


def brute_force_simplex(objective, n, step, refine=2, maximize=False):
    """
    穷举单纯形格点, 再在最优点附近逐级加密。
    objective 接收 (M, n) 数组, 返回 (M,) 目标值。
    """
    if n < 2 or n > 5:
        raise ParameterError(f"brute-force simplex supports 2 <= n <= 5, got {n}")
    if step < 1e-3 or step > 1.0:
        raise ParameterError(f"lattice step must lie in [1e-3, 1], got {step}")
    m = int(round(1.0 / step))
    if _lattice_size(n, m) > MAX_LATTICE_POINTS:
        raise ParameterError(f"lattice with n={n}, step={step} exceeds {MAX_LATTICE_POINTS} points")

    sign = -1.0 if maximize else 1.0
    points = _simplex_lattice(n, m) / m
    values = _evaluate(objective, points)
    k = int(np.argmin(sign * values))
    best, best_val = points[k], float(values[k])
    evaluated = len(points)

    local = step
    for _ in range(refine):
        span = np.arange(-10, 11) * (local / 10.0)
        grids = np.meshgrid(*([span] * (n - 1)), indexing="ij")
        offsets = np.stack([g.ravel() for g in grids], axis=1)
        head = best[:-1] + offsets
        cand = np.hstack([head, 1.0 - head.sum(axis=1, keepdims=True)])
        cand = cand[np.all(cand >= 0.0, axis=1)]
        vals = _evaluate(objective, cand)
        evaluated += len(cand)
        j = int(np.argmin(sign * vals))
        if sign * vals[j] < sign * best_val:
            best, best_val = cand[j], float(vals[j])
        local /= 10.0

    return SolverReport(best, best_val, float("nan"), evaluated, True, "grid search")


# ==========================================
# 4. 标量搜索: 粗网格 + 有界 Brent 细化
# ==========================================
def grid_then_refine(fn, lo, hi, n_grid=201, maximize=False, xatol=1e-9):
    """返回 (x*, fn(x*)); 平局取网格上最小的 x"""
    sign = -1.0 if maximize else 1.0
    xs = np.linspace(lo, hi, n_grid)
    vals = np.array([fn(x) for x in xs])
    k = int(np.argmin(sign * vals))
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, n_grid - 1)]
    if b > a:
        res = sco.minimize_scalar(lambda x: sign * fn(x), bounds=(a, b),
                                  method="bounded", options={"xatol": xatol})
        if res.success and sign * fn(res.x) < sign * vals[k] - 1e-15:
            return float(res.x), float(fn(res.x))
    return float(xs[k]), float(vals[k])


# ==========================================
# 5. softmax 博弈 (N=2 同构信道, softmax-Bernoulli)
# ==========================================
@dataclass(frozen=True)
class SoftmaxGameSolution:
    alpha: float
    q_star: float
    d_star: float
    throughput: float


def solve_problem1(q, alpha, params, n_grid=201):
    """d* = argmin_d U^s(q, d); α=0 时目标与 d 无关, 返回 0.5"""
    if alpha == 0.0:
        return 0.5
    d_star, _ = grid_then_refine(lambda d: softmax_throughput(params, q, d, alpha),
                                 0.0, 1.0, n_grid=n_grid)
    return d_star


def _inner_value(q, alpha, params, n_grid):
    d_star = solve_problem1(q, alpha, params, n_grid=n_grid)
    return softmax_throughput(params, q, d_star, alpha), d_star


def solve_softmax_game(alpha, params, n_grid_q=101, n_grid_d=201):
    if not (0.0 <= alpha <= 1.0):
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return SoftmaxGameSolution(alpha, 1.0, 0.5, softmax_throughput(params, 1.0, 0.5, 0.0))
    if alpha == 1.0:
        return SoftmaxGameSolution(alpha, 0.5, 0.5, softmax_throughput(params, 0.5, 0.5, 1.0))

    q_star, u_star = grid_then_refine(lambda q: _inner_value(q, alpha, params, n_grid_d)[0],
                                      0.5, 1.0, n_grid=n_grid_q, maximize=True)
    _, d_star = _inner_value(q_star, alpha, params, n_grid_d)
    return SoftmaxGameSolution(alpha, q_star, d_star, u_star)


def solve_problem2(alpha, params, n_grid_q=101, n_grid_d=201):
    """q* = argmax_q U^s(q, d*(q)); α=0 -> 1, α=1 -> 0.5"""
    return solve_softmax_game(alpha, params, n_grid_q, n_grid_d).q_star


# ==========================================
# 6. 防御方选择 Q
# ==========================================
def _defender_value(q, beliefs, channels, alpha):
    if alpha == 0.0:
        return problem3_objective(np.zeros(len(q)), q, beliefs, channels, 0.0), None
    rep = solve_problem3(q, beliefs, channels, alpha)
    if not rep.converged:
        raise SolverError(f"inner attacker solve failed: {rep.message} (residual {rep.kkt_residual:.3e})")
    return rep.objective_value, rep.solution


def solve_problem4(beliefs, channels, alpha, parametrization="boltzmann_tau",
                   tau_bounds=(1e-3, 1e2), n_grid=41, simplex_step=0.02):
    beliefs = np.asarray(beliefs, dtype=float)
    if len(beliefs) != len(channels):
        raise ParameterError("beliefs and channels differ in length")

    if parametrization == "boltzmann_tau":
        lo, hi = np.log(tau_bounds[0]), np.log(tau_bounds[1])

        def value(log_tau):
            q = boltzmann_probs(beliefs, float(np.exp(log_tau)))
            return _defender_value(q, beliefs, channels, alpha)[0]

        log_tau, best = grid_then_refine(value, lo, hi, n_grid=n_grid, maximize=True, xatol=1e-6)
        tau_star = float(np.exp(log_tau))
        q = boltzmann_probs(beliefs, tau_star)
        _, d_star = _defender_value(q, beliefs, channels, alpha)
        logger.debug(f"defender tau search: alpha={alpha:g} -> tau*={tau_star:.4g}, value={best:.6f}")
        return SolverReport(tau_star, best, float("nan"), n_grid, True, "tau search",
                            extras={"q": q, "d": d_star})

    if parametrization == "full_simplex":
        n = len(beliefs)
        if n > 4:
            raise ParameterError(f"full-simplex search is limited to N <= 4, got N={n}")

        def batch(points):
            return np.array([_defender_value(row, beliefs, channels, alpha)[0] for row in points])

        rep = brute_force_simplex(batch, n, simplex_step, refine=1, maximize=True)
        _, d_star = _defender_value(rep.solution, beliefs, channels, alpha)
        rep.extras = {"q": rep.solution, "d": d_star}
        return rep

    raise ParameterError(f"unknown defender parametrization '{parametrization}'")
