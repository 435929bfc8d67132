"""
各图 / 表的实验命令。每个 cmd_* 接收 ExperimentConfig, 返回 DataFrame,
并通过 ReportManager 写出 CSV (以及可选的 SVG)。
"""
import logging

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.adversary import attacker_cost
from src.channel_model import initial_beliefs
from src.closed_form import (
    bernoulli_entropy,
    myopic_tp_length,
    performance,
    robustness,
    softmax_throughput,
    throughput_from_tp,
)
from src.errors import SpectrumLabError
from src.experiment_config import parse_attack, parse_policy
from src.optimizer import solve_problem1, solve_problem4, solve_softmax_game
from src.policy_engine import PolicySpec, ResampleMode
from src.reporting import ReportManager, line_figure
from src.sim_engine import SimConfig, run_replications
from src.sprt_detection import SprtHypotheses, asn_under_attack, bernoulli_kl

logger = logging.getLogger("PYL.experiments")


# ==========================================
# 公共工具
# ==========================================
def make_reporter(config, command=""):
    meta = {
        "experiment": config.experiment,
        "config_hash": config.config_hash,
        "seed": config.seed,
        "command": command or config.experiment,
    }
    return ReportManager(config.output_dir, metadata=meta, plots=config.plots)


def _progress(items, desc):
    return tqdm(items, desc=desc, leave=False, disable=not logger.isEnabledFor(logging.INFO))


def _resample_mode(config):
    return ResampleMode(config.sim.get("resample_mode", ResampleMode.TP_BOUNDARY.value))


def sim_config_for(config, channels, policy, attack, alpha):
    return SimConfig(
        channels=channels,
        policy=policy,
        attack=attack,
        alpha=alpha,
        horizon=config.sim_value("horizon"),
        warmup=config.sim_value("warmup"),
        replications=config.sim_value("replications"),
        seed=config.seed,
        workers=config.sim_value("workers"),
    )


def _simulate(config, channels, policy, attack, alpha):
    try:
        return run_replications(sim_config_for(config, channels, policy, attack, alpha))
    except SpectrumLabError as e:
        logger.error(f"❌ {policy.label} vs {attack.label} at alpha={alpha:g} failed: {e}")
        raise


def _attacks(config):
    tau_a = config.grid("tau_a", default=[2.0])[0]
    return [parse_attack(a, path=f"sweep.attacks[{i}]", tau_a=tau_a)
            for i, a in enumerate(config.grid("attacks", default=["alpha_optimal"]))]


def _finish(reporter, df, name, fig=None):
    reporter.save_data(df, name)
    if fig is not None:
        reporter.add_figure(fig, name)
    return df


# ==========================================
# figure3: N=2, myopic vs 最优 softmax
# ==========================================
def cmd_figure3(config, reporter=None):
    reporter = reporter or make_reporter(config, "figure3")
    params = config.channels_for(2)[0]
    rows = []
    for alpha in _progress(config.grid("alpha"), "figure3"):
        u_myopic = throughput_from_tp(myopic_tp_length(params, alpha))
        game = solve_softmax_game(alpha, params)
        rows.append({
            "alpha": alpha,
            "u_myopic": u_myopic,
            "u_softmax_opt": game.throughput,
            "q_star": game.q_star,
            "d_star": game.d_star,
        })
    df = pd.DataFrame(rows, columns=["alpha", "u_myopic", "u_softmax_opt", "q_star", "d_star"])
    fig = line_figure(df, "alpha", ["u_myopic", "u_softmax_opt"],
                      "Throughput vs attack probability (N=2)", "alpha", "throughput") if config.plots else None
    return _finish(reporter, df, "figure3", fig)


# ==========================================
# figure4: 随机化程度 vs 性能 / 鲁棒性
# ==========================================
def cmd_figure4(config, reporter=None):
    reporter = reporter or make_reporter(config, "figure4")
    params = config.channels_for(2)[0]
    alpha = config.grid("alpha", default=[0.5])[0]
    rows = []
    for q in _progress(config.grid("q"), "figure4"):
        u_zero = softmax_throughput(params, q, 0.5, 0.0)
        d_star = solve_problem1(q, alpha, params)
        u_alpha = softmax_throughput(params, q, d_star, alpha)
        rows.append({
            "q": q,
            "entropy": bernoulli_entropy(q),
            "performance": performance(u_zero),
            "robustness": robustness(u_zero, u_alpha),
            "u_alpha": u_alpha,
            "d_star": d_star,
        })
    df = pd.DataFrame(rows).sort_values("entropy", kind="mergesort").reset_index(drop=True)
    fig = line_figure(df, "entropy", ["performance", "robustness"],
                      f"Performance and robustness vs randomness (alpha={alpha:g})",
                      "entropy H(q)", "value") if config.plots else None
    return _finish(reporter, df, "figure4", fig)


# ==========================================
# figure56: N=4 / N=10, myopic vs Boltzmann(τ)
# ==========================================
def cmd_figure56(config, reporter=None):
    reporter = reporter or make_reporter(config, "figure56")
    tau = config.grid("tau", default=[2.0])[0]
    mode = _resample_mode(config)
    policies = {"myopic": PolicySpec.myopic(mode), "softmax": PolicySpec.boltzmann(tau, mode)}
    attack = _attacks(config)[0]
    alphas = config.grid("alpha")
    rows = []
    for n in config.grid("n", default=[4, 10]):
        channels = config.channels_for(int(n))
        for alpha in _progress(alphas, f"figure56 N={int(n)}"):
            row = {"n": int(n), "alpha": alpha}
            for name, policy in policies.items():
                summary = _simulate(config, channels, policy, attack, alpha)
                row[f"u_{name}"] = summary.throughput_mean
                row[f"se_{name}"] = summary.throughput_stderr
            rows.append(row)
    df = pd.DataFrame(rows)
    for name in policies:
        base = df.groupby("n")[f"u_{name}"].transform("first")
        df[f"drop_{name}"] = base - df[f"u_{name}"]
    logger.info(f"✅ figure56: {len(df)} points, attacker {attack.label}, tau={tau:g}")

    _finish(reporter, df, "figure56")
    if config.plots:
        for n, part in df.groupby("n"):
            reporter.add_figure(line_figure(part, "alpha", ["u_myopic", "u_softmax"],
                                            f"Throughput vs attack probability (N={n}, tau={tau:g})",
                                            "alpha", "throughput"), f"figure56_n{n}")
    return df


# ==========================================
# figure7: 四种攻击策略 (table1 信道)
# ==========================================
def cmd_figure7(config, reporter=None):
    reporter = reporter or make_reporter(config, "figure7")
    channels = config.channels_for()
    tau = config.grid("tau", default=[2.0])[0]
    policy = PolicySpec.boltzmann(tau, _resample_mode(config))
    attacks = _attacks(config)
    rows = []
    for alpha in _progress(config.grid("alpha"), "figure7"):
        row = {"alpha": alpha}
        for attack in attacks:
            summary = _simulate(config, channels, policy, attack, alpha)
            row[f"u_{attack.kind.value}"] = summary.throughput_mean
            row[f"se_{attack.kind.value}"] = summary.throughput_stderr
        rows.append(row)
    df = pd.DataFrame(rows)
    fig = line_figure(df, "alpha", [f"u_{a.kind.value}" for a in attacks],
                      f"Attack strategies vs Boltzmann(tau={tau:g})", "alpha", "throughput") if config.plots else None
    return _finish(reporter, df, "figure7", fig)


# ==========================================
# figure8: 最优温度 τ*(α)
# ==========================================
def cmd_figure8(config, reporter=None):
    reporter = reporter or make_reporter(config, "figure8")
    channels = config.channels_for()
    beliefs = initial_beliefs(channels)
    rows = []
    for alpha in _progress(config.grid("alpha"), "figure8"):
        rep = solve_problem4(beliefs, channels, alpha, parametrization="boltzmann_tau")
        rows.append({
            "alpha": alpha,
            "tau_star": rep.solution,
            "tp_value": rep.objective_value,
            "u_star": throughput_from_tp(rep.objective_value),
        })
    df = pd.DataFrame(rows)
    fig = line_figure(df, "alpha", ["tau_star"], "Optimal temperature vs attack probability",
                      "alpha", "tau*", logy=True) if config.plots else None
    return _finish(reporter, df, "figure8", fig)


# ==========================================
# figure9: 攻击代价
# ==========================================
def cmd_figure9(config, reporter=None):
    reporter = reporter or make_reporter(config, "figure9")
    params = config.channels_for(2)[0]
    rows = []
    for alpha in config.grid("alpha"):
        hyp = SprtHypotheses.from_attack(params, alpha)
        rows.append({
            "alpha": alpha,
            "theta0": hyp.theta0,
            "theta1": hyp.theta1,
            "kl": bernoulli_kl(hyp.theta1, hyp.theta0),
            "cost": attacker_cost(alpha, params),
            "asn": asn_under_attack(alpha, params) if alpha > 0.0 else np.inf,
        })
    df = pd.DataFrame(rows)
    fig = line_figure(df, "alpha", ["cost"], "Attacker cost vs attack probability",
                      "alpha", "cost") if config.plots else None
    return _finish(reporter, df, "figure9", fig)


# ==========================================
# 通用扫描: α × 策略 × 攻击
# ==========================================
def cmd_sweep(config, reporter=None):
    reporter = reporter or make_reporter(config, "sweep")
    mode = _resample_mode(config)
    policies = [parse_policy(p, path=f"sweep.policies[{i}]", resample_mode=mode)
                for i, p in enumerate(config.grid("policies", default=["myopic"]))]
    attacks = _attacks(config)
    ns = config.sweep.get("n", [config.n])
    rows = []
    for n in ns:
        channels = config.channels_for(int(n) if n is not None else None)
        points = [(p, a, alpha) for p in policies for a in attacks for alpha in config.grid("alpha")]
        for policy, attack, alpha in _progress(points, f"sweep N={len(channels)}"):
            s = _simulate(config, channels, policy, attack, alpha)
            rows.append({
                "n": len(channels),
                "policy": policy.label,
                "attack": attack.label,
                "alpha": alpha,
                "throughput": s.throughput_mean,
                "throughput_stderr": s.throughput_stderr,
                "ci_lo": s.throughput_ci[0],
                "ci_hi": s.throughput_ci[1],
                "tp_mean": s.tp_mean,
                "tp_stderr": s.tp_stderr,
                "attack_fraction": s.attack_fraction,
            })
    df = pd.DataFrame(rows)
    if config.plots:
        wide = df.assign(series=df["policy"] + " / " + df["attack"] + " / N=" + df["n"].astype(str))
        wide = wide.pivot(index="alpha", columns="series", values="throughput").reset_index()
        reporter.add_figure(line_figure(wide, "alpha", [c for c in wide.columns if c != "alpha"],
                                        "Throughput sweep", "alpha", "throughput"), "sweep")
    reporter.save_data(df, "sweep")
    return df
