"""
validate 命令: 解析式 / 求解器 / 蒙特卡洛 三方交叉检查。

每一行是一个检查: |observed - expected| <= tolerance。
kind = "hard" 的行失败会让命令以 ValidationFailure 退出;
kind = "info" 的行只做报告 (已知的建模差异, 例如 α>0 时被干扰后的信念偏差、SPRT 越界量)。
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from src.adversary import (
    AttackKind,
    AttackStrategySpec,
    attacker_cost,
    greedy_division,
    omega_division,
    uniform_division,
)
from src.channel_model import GilbertElliotParams, initial_beliefs, k_step_idle_prob, stationary_occupancy
from src.closed_form import (
    TpChainSpec,
    contrarian_tp_length,
    myopic_tp_length,
    myopic_tp_length_printed,
    omega_bar_fixed_point,
    softmax_tp_length,
    theorem4_alpha_threshold,
    theorem4_temperature_bound,
    throughput_from_tp,
    tp_chain_stationary,
)
from src.config import BASELINE_ROW, SE_MULTIPLIER, TABLE1_ROWS
from src.errors import ConfigError, ValidationFailure
from src.experiments import make_reporter
from src.optimizer import (
    brute_force_simplex,
    problem3_gradient,
    problem3_hessian_diag,
    problem3_objective,
    solve_problem3,
    solve_softmax_game,
)
from src.policy_engine import PolicySpec, boltzmann_probs
from src.sim_engine import DetectionSettings, SimConfig, SimulationEngine, action_trace, run_replications
from src.sprt_detection import (
    SprtHypotheses,
    asn_under_attack,
    simulate_sprt,
    wald_asn_constant,
    wald_thresholds,
)

logger = logging.getLogger("PYL.validation")

# 写进 CSV 头部: 哪些验收性质只报告不强制, 以及原因
INFO_ROWS_NOTE = (
    "contrarian and myopic MC TP length at alpha>0, Boltzmann vs myopic under uniform and omega attackers, "
    "SPRT samples at alpha<1 and the attack-strategy ordering are reported, not enforced: "
    "jam-caused failures bias the sensed belief low and Wald's ASN ignores threshold overshoot"
)


@dataclass
class CheckRow:
    check: str
    kind: str
    expected: float
    observed: float
    tolerance: float
    passed: bool
    note: str = ""


class OracleSuite:
    def __init__(self):
        self.rows = []

    def add(self, check, expected, observed, tolerance, hard=True, note=""):
        expected, observed, tolerance = float(expected), float(observed), float(tolerance)
        passed = (not math.isnan(tolerance)) and abs(observed - expected) <= tolerance
        kind = "hard" if hard else "info"
        self.rows.append(CheckRow(check, kind, expected, observed, tolerance, passed, note))
        icon = "✅" if passed else ("❌" if hard else "⚠️")
        log = logger.info if passed or not hard else logger.error
        log(f"{icon} [{kind}] {check}: observed={observed:.6g}, expected={expected:.6g} (tol {tolerance:.3g})")

    def flag(self, check, condition, hard=True, note=""):
        """布尔性质检查, 记为 1/0"""
        self.add(check, 1.0, 1.0 if condition else 0.0, 0.0, hard=hard, note=note)

    @property
    def failures(self):
        return [r for r in self.rows if r.kind == "hard" and not r.passed]

    def frame(self):
        return pd.DataFrame([r.__dict__ for r in self.rows],
                            columns=["check", "kind", "expected", "observed", "tolerance", "passed", "note"])


def _se_tol(stderr):
    return SE_MULTIPLIER * stderr if stderr == stderr else math.nan


# ==========================================
# 1. 解析式
# ==========================================
def closed_form_checks(suite, params):
    suite.add("stationary occupancy", 2.0 / 3.0, stationary_occupancy(params), 1e-12)
    suite.add("two-step idle probability", 0.34, k_step_idle_prob(params, 2), 1e-12)
    suite.add("myopic TP length alpha=0 (closed form)", 5.625, myopic_tp_length(params, 0.0), 1e-9)
    chain = tp_chain_stationary(TpChainSpec(params, 0.0))
    suite.add("myopic TP length alpha=0 (stationary chain)", 5.625, chain.mean_length, 1e-6)
    suite.add("myopic throughput alpha=0", 0.8222, throughput_from_tp(chain.mean_length), 1e-4)
    for alpha in (0.25, 0.5, 0.75):
        suite.add(f"chain vs closed form alpha={alpha:g}", myopic_tp_length(params, alpha),
                  tp_chain_stationary(TpChainSpec(params, alpha)).mean_length, 1e-6)
        suite.add(f"omega-bar fixed point alpha={alpha:g}",
                  tp_chain_stationary(TpChainSpec(params, alpha)).omega_bar,
                  omega_bar_fixed_point(params, alpha), 1e-8)
    suite.add("contrarian TP length alpha=0", 3.0, contrarian_tp_length(params, 0.0), 1e-12)
    suite.add("softmax TP length q=0.5 alpha=0", 4.3125, softmax_tp_length(params, 0.5, 0.5, 0.0), 1e-9)

    for alpha in (0.0, 0.5):
        rep = myopic_tp_length_printed(params, alpha)
        suite.add(f"printed omega-bar formula alpha={alpha:g}", rep.length_chain, rep.length_printed,
                  1e-6, hard=False,
                  note=(f"printed omega-bar={rep.omega_bar_printed:.6f} "
                        f"{'in' if rep.printed_in_range else 'OUTSIDE'} [0,1]; "
                        f"corrected omega-bar={rep.omega_bar_corrected:.6f}"))

    suite.add("temperature-bound alpha threshold N=4", 28.0 / 37.0, theorem4_alpha_threshold(params, 4), 1e-12)
    suite.add("temperature bound N=4 alpha=0.8", 2.5596, theorem4_temperature_bound(params, 4, 0.8), 1e-3)


def cost_checks(suite, params):
    suite.add("attacker cost alpha=0", 0.0, attacker_cost(0.0, params), 1e-12)
    suite.add("attacker cost alpha=1", 1.0, attacker_cost(1.0, params), 1e-12)
    suite.add("attacker cost alpha=0.5", 0.2717, attacker_cost(0.5, params), 1e-4)
    grid = np.round(np.arange(0.0, 1.0001, 0.05), 10)
    costs = np.array([attacker_cost(a, params) for a in grid])
    suite.flag("attacker cost strictly increasing", bool(np.all(np.diff(costs) > 0.0)))
    suite.add("ASN alpha=0.5 with C=ln(1/p10)", 3.680, asn_under_attack(0.5, params), 1e-3)
    asn = np.array([asn_under_attack(a, params) for a in grid[1:]])
    suite.flag("ASN strictly decreasing in alpha", bool(np.all(np.diff(asn) < 0.0)))


# ==========================================
# 2. 求解器
# ==========================================
def figure3_property_checks(suite, params):
    alphas = np.round(np.arange(0.0, 0.95 + 1e-9, 0.05), 10)
    worst_gap, strict_ok = math.inf, True
    for alpha in alphas:
        u_m = throughput_from_tp(myopic_tp_length(params, alpha))
        game = solve_softmax_game(alpha, params)
        worst_gap = min(worst_gap, game.throughput - u_m)
        if alpha >= 0.15 and game.throughput - u_m <= 0.01:
            strict_ok = False
        if alpha == 0.0:
            suite.add("softmax q* at alpha=0", 1.0, game.q_star, 0.0)
            suite.add("softmax = myopic at alpha=0", u_m, game.throughput, 1e-12)
    suite.flag("softmax >= myopic on the alpha grid", worst_gap >= -1e-9)
    suite.flag("softmax beats myopic by > 0.01 for alpha >= 0.15", strict_ok)


def problem3_checks(suite, rng):
    channels = tuple(GilbertElliotParams.from_row(r) for r in TABLE1_ROWS)
    beliefs = initial_beliefs(channels)
    q = boltzmann_probs(beliefs, 2.0)
    for alpha in (0.3, 0.5, 0.8):
        rep = solve_problem3(q, beliefs, channels, alpha)
        grid = brute_force_simplex(lambda pts: problem3_objective(pts, q, beliefs, channels, alpha),
                                   len(channels), 0.01, refine=2)
        suite.add(f"attacker division Newton vs grid alpha={alpha:g}", grid.objective_value, rep.objective_value, 1e-4)
        suite.add(f"attacker division KKT residual alpha={alpha:g}", 0.0, rep.kkt_residual, 1e-8)

    worst_grad = worst_diag = worst_offdiag = 0.0
    eps = 1e-6
    for _ in range(100):
        d = rng.dirichlet(np.ones(len(channels)))
        alpha = float(rng.uniform(0.1, 1.0))
        g = problem3_gradient(d, q, beliefs, channels, alpha)
        h = problem3_hessian_diag(d, q, beliefs, channels, alpha)
        for i in range(len(d)):
            e = np.zeros_like(d)
            e[i] = eps
            fd = (problem3_objective(d + e, q, beliefs, channels, alpha)
                  - problem3_objective(d - e, q, beliefs, channels, alpha)) / (2 * eps)
            worst_grad = max(worst_grad, abs(fd - g[i]) / abs(g[i]))
            column = (problem3_gradient(d + e, q, beliefs, channels, alpha)
                      - problem3_gradient(d - e, q, beliefs, channels, alpha)) / (2 * eps)
            worst_diag = max(worst_diag, abs(column[i] - h[i]) / abs(h[i]))
            worst_offdiag = max(worst_offdiag, float(np.delete(np.abs(column), i).max()))
    suite.add("attacker objective gradient vs finite differences (max rel)", 0.0, worst_grad, 1e-6)
    suite.add("attacker objective Hessian diagonal vs finite differences (max rel)", 0.0, worst_diag, 1e-5)
    suite.add("attacker objective Hessian off-diagonal (max abs)", 0.0, worst_offdiag, 1e-8)

    worst_margin, worst_resid = -math.inf, 0.0
    for _ in range(200):
        qr = rng.dirichlet(np.ones(len(channels)))
        omega = rng.uniform(0.05, 0.95, size=len(channels))
        alpha = float(rng.uniform(0.01, 1.0))
        rep = solve_problem3(qr, omega, channels, alpha)
        worst_resid = max(worst_resid, rep.kkt_residual if rep.converged else math.inf)
        others = (greedy_division(omega), uniform_division(len(channels)),
                  omega_division(omega, float(rng.uniform(0.1, 5.0))))
        best_other = min(problem3_objective(d, qr, omega, channels, alpha) for d in others)
        worst_margin = max(worst_margin, rep.objective_value - best_other)
    suite.add("attacker division KKT residual, random instances (max)", 0.0, worst_resid, 1e-8)
    suite.flag("alpha-optimal division <= greedy, uniform and omega objectives", worst_margin <= 1e-9,
               note=f"worst margin {worst_margin:.3e}")


# ==========================================
# 3. 蒙特卡洛
# ==========================================
def _sim(config, channels, policy, attack, alpha, **overrides):
    kwargs = dict(
        channels=channels, policy=policy, attack=attack, alpha=alpha,
        horizon=config.sim_value("horizon"), warmup=config.sim_value("warmup"),
        replications=config.sim_value("replications"), seed=config.seed,
        workers=config.sim_value("workers"),
    )
    kwargs.update(overrides)
    return SimConfig(**kwargs)


def simulation_checks(suite, config, params):
    channels = (params, params)
    optimal = AttackStrategySpec(AttackKind.ALPHA_OPTIMAL)
    greedy = AttackStrategySpec(AttackKind.GREEDY)

    s = run_replications(_sim(config, channels, PolicySpec.myopic(), greedy, 0.0))
    suite.add("MC myopic TP length alpha=0", 5.625, s.tp_mean, _se_tol(s.tp_stderr))
    suite.add("MC myopic throughput alpha=0", 0.8222, s.throughput_mean, _se_tol(s.throughput_stderr))
    suite.add("MC throughput identity 1-1/TP", s.throughput_mean, 1.0 - 1.0 / s.tp_mean,
              _se_tol(s.throughput_stderr))

    for alpha in (0.0, 0.25, 0.5):
        s = run_replications(_sim(config, channels, PolicySpec.contrarian(), optimal, alpha))
        suite.add(f"MC contrarian TP length alpha={alpha:g}", contrarian_tp_length(params, alpha),
                  s.tp_mean, _se_tol(s.tp_stderr), hard=(alpha == 0.0),
                  note="" if alpha == 0.0 else "jam-caused failures bias the sensed belief low")

    for alpha in (0.25, 0.5):
        s = run_replications(_sim(config, channels, PolicySpec.myopic(), greedy, alpha))
        suite.add(f"MC myopic TP length alpha={alpha:g}", myopic_tp_length(params, alpha),
                  s.tp_mean, _se_tol(s.tp_stderr), hard=False,
                  note="jam-caused failures bias the sensed belief low")
        suite.add(f"MC jam fraction alpha={alpha:g}", alpha, s.attack_fraction, _se_tol(s.attack_fraction_stderr))

    s = run_replications(_sim(config, channels, PolicySpec.myopic(), greedy, 1.0, replications=2, horizon=5_000,
                              warmup=0))
    suite.add("MC greedy alpha=1 vs myopic throughput", 0.0, s.throughput_mean, 0.0)

    # 公共随机数: 三种贪婪等价的策略给出同一条动作轨迹
    trace_cfg = dict(replications=1, horizon=100_000, warmup=0, initial_beliefs=(0.7, 0.6))
    base = action_trace(_sim(config, channels, PolicySpec.myopic(), greedy, 0.3, **trace_cfg))
    for policy in (PolicySpec.bernoulli(1.0), PolicySpec.boltzmann(1e-6)):
        other = action_trace(_sim(config, channels, policy, greedy, 0.3, **trace_cfg))
        suite.flag(f"CRN action trace myopic == {policy.label}", bool(np.array_equal(base, other)))


def theorem4_checks(suite, config, params):
    horizon = min(config.sim_value("horizon"), 20_000)
    reps = max(2, min(config.sim_value("replications"), 5))
    for n in (4, 10):
        channels = (params,) * n
        for kind in AttackKind:
            attack = AttackStrategySpec(kind, tau_a=2.0 if kind is AttackKind.OMEGA else None)
            s_m = run_replications(_sim(config, channels, PolicySpec.myopic(), attack, 0.8,
                                        horizon=horizon, warmup=horizon // 10, replications=reps))
            s_b = run_replications(_sim(config, channels, PolicySpec.boltzmann(3.0), attack, 0.8,
                                        horizon=horizon, warmup=horizon // 10, replications=reps))
            se = math.hypot(s_m.throughput_stderr, s_b.throughput_stderr)
            hard = kind in (AttackKind.GREEDY, AttackKind.ALPHA_OPTIMAL)
            suite.flag(f"Boltzmann(3) >= myopic at alpha=0.8, N={n}, {attack.label}",
                       s_b.throughput_mean >= s_m.throughput_mean - SE_MULTIPLIER * se, hard=hard,
                       note=f"U_boltzmann={s_b.throughput_mean:.4f}, U_myopic={s_m.throughput_mean:.4f}")


def _short_sims(config):
    horizon = min(config.sim_value("horizon"), 20_000)
    return dict(horizon=horizon, warmup=horizon // 10,
                replications=max(2, min(config.sim_value("replications"), 5)))


def randomization_drop_checks(suite, config, params):
    """myopic 的吞吐量下降应大于 Boltzmann(2), 攻击方为 α-optimal"""
    optimal = AttackStrategySpec(AttackKind.ALPHA_OPTIMAL)
    sizes = _short_sims(config)
    alphas = (0.1, 0.2, 0.3, 0.4, 0.5)
    for n in (4, 10):
        channels = (params,) * n
        u = {}
        for name, policy in (("myopic", PolicySpec.myopic()), ("softmax", PolicySpec.boltzmann(2.0))):
            for alpha in (0.0,) + alphas:
                cfg = _sim(config, channels, policy, optimal, alpha, **sizes)
                u[name, alpha] = run_replications(cfg).throughput_mean
        for alpha in alphas:
            drop_m = u["myopic", 0.0] - u["myopic", alpha]
            drop_s = u["softmax", 0.0] - u["softmax", alpha]
            suite.flag(f"myopic drop > Boltzmann(2) drop, N={n}, alpha={alpha:g}", drop_m > drop_s,
                       note=f"drop_myopic={drop_m:.4f}, drop_boltzmann={drop_s:.4f}")
        if n == 10:
            base = u["softmax", 0.0]
            suite.add("Boltzmann(2) throughput N=10 alpha=0.5 within 5% of alpha=0", base,
                      u["softmax", 0.5], 0.05 * base, hard=False,
                      note="jam-caused failures bias the sensed belief low")


def attack_ordering_checks(suite, config):
    """table1 信道, Boltzmann(2): 四种攻击策略的吞吐量排序"""
    channels = tuple(GilbertElliotParams.from_row(r) for r in TABLE1_ROWS)
    policy = PolicySpec.boltzmann(2.0)
    attacks = [AttackStrategySpec(kind, tau_a=2.0 if kind is AttackKind.OMEGA else None) for kind in AttackKind]
    sizes = _short_sims(config)
    note = "per-TP attacker objective; throughput ordering is reported"
    for alpha in (0.3, 0.5, 0.7, 0.9):
        s = {a.kind: run_replications(_sim(config, channels, policy, a, alpha, **sizes)) for a in attacks}
        u = {k: v.throughput_mean for k, v in s.items()}
        se = max(v.throughput_stderr for v in s.values())
        slack = SE_MULTIPLIER * math.sqrt(2.0) * se
        opt = u[AttackKind.ALPHA_OPTIMAL]
        suite.flag(f"alpha-optimal lowest throughput alpha={alpha:g}",
                   all(opt <= v + slack for v in u.values()), hard=False,
                   note=f"{note}; " + ", ".join(f"U_{k.value}={v:.4f}" for k, v in u.items()))
        suite.flag(f"greedy highest throughput alpha={alpha:g}",
                   all(u[AttackKind.GREEDY] >= v - slack for v in u.values()), hard=False, note=note)
        if alpha >= 0.7:
            suite.add(f"omega vs alpha-optimal throughput gap alpha={alpha:g}", opt, u[AttackKind.OMEGA],
                      0.02 + slack, hard=False, note=note)


def detection_checks(suite, config, params, rng):
    det = config.detection
    p_fa, p_m = det.get("p_fa", 0.01), det.get("p_m", 0.01)
    trials = int(det.get("trials", 10_000))
    thresholds = wald_thresholds(p_fa, p_m)
    c_wald = wald_asn_constant(thresholds, p_m)

    for alpha in (0.3, 0.5, 1.0):
        hyp = SprtHypotheses.from_attack(params, alpha)
        mc = simulate_sprt(hyp.theta1, hyp, thresholds, trials, rng)
        asn = asn_under_attack(alpha, params, c=c_wald)
        suite.add(f"SPRT samples under H1 alpha={alpha:g}", asn, mc.mean_samples, 0.1 * asn,
                  hard=(alpha == 1.0), note="" if alpha == 1.0 else "Wald's ASN ignores threshold overshoot")

    channels = (params, params)
    myopic, greedy = PolicySpec.myopic(), AttackStrategySpec(AttackKind.GREEDY)
    horizon = config.sim_value("horizon")
    settings = DetectionSettings(p_fa=p_fa, p_m=p_m, observe=det.get("observe", "continuation"))
    cfg = _sim(config, channels, myopic, greedy, 0.0, replications=trials, horizon=horizon, warmup=0)
    d0 = SimulationEngine(cfg).run_with_detection(settings).detection
    suite.add("detector false alarms with no attack", 0.0, d0.rate_h1, 2.0 * p_fa)

    settings_all = DetectionSettings(p_fa=p_fa, p_m=p_m, observe="all")
    cfg = _sim(config, channels, myopic, greedy, 1.0, replications=min(trials, 1_000), horizon=1_000, warmup=0)
    d1 = SimulationEngine(cfg).run_with_detection(settings_all).detection
    suite.add("detector samples alpha=1 (greedy, every slot)", d1.asn_formula, d1.mean_samples,
              0.1 * d1.asn_formula)
    suite.add("detector samples alpha=1 vs ASN with C=ln(1/p10)", asn_under_attack(1.0, params),
              d1.mean_samples, 0.1, hard=False, note="unit-normalized ASN")

    cfg = _sim(config, channels, myopic, greedy, 0.5, replications=min(trials, 2_000), horizon=horizon, warmup=0)
    d5 = SimulationEngine(cfg).run_with_detection(settings).detection
    suite.add("detector samples alpha=0.5", d5.asn_formula, d5.mean_samples, 0.1 * d5.asn_formula,
              hard=False, note="Wald's ASN ignores threshold overshoot")


# ==========================================
# 4. 入口
# ==========================================
def cmd_validate(config, reporter=None):
    if config.sim_value("replications") < 2:
        raise ConfigError("validate needs at least two replications for standard errors")
    reporter = reporter or make_reporter(config, "validate")
    params = config.channels_for(2)[0]
    if params != GilbertElliotParams.from_row(BASELINE_ROW):
        logger.warning("⚠️ validate oracles are tabulated for the baseline channel; other channels will fail")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed, 0xFACE])))

    suite = OracleSuite()
    logger.info("--- Closed forms ---")
    closed_form_checks(suite, params)
    cost_checks(suite, params)
    logger.info("--- Solvers ---")
    figure3_property_checks(suite, params)
    problem3_checks(suite, rng)
    logger.info("--- Monte Carlo ---")
    simulation_checks(suite, config, params)
    theorem4_checks(suite, config, params)
    randomization_drop_checks(suite, config, params)
    attack_ordering_checks(suite, config)
    logger.info("--- Detection ---")
    detection_checks(suite, config, params, rng)

    df = suite.frame()
    reporter.save_data(df, "validate", extra_metadata={"info_rows": INFO_ROWS_NOTE})
    failures = suite.failures
    if failures:
        names = ", ".join(r.check for r in failures)
        raise ValidationFailure(f"{len(failures)} oracle check(s) failed: {names}")
    logger.info(f"✅ All {sum(r.kind == 'hard' for r in suite.rows)} hard checks passed")
    return df
