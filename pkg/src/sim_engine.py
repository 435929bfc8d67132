"""
逐时隙蒙特卡洛仿真: 信道演化 -> 防御方选信道 -> 攻击方干扰 -> 观测 / 奖励 -> 信念更新

随机数约定 (公共随机数): 每个时隙固定消耗 N+3 个均匀数,
顺序为 信道 0..N-1, 策略 1 个, 攻击方 2 个 (是否攻击, 攻击目标)。
第 r 次重复使用 Philox(SeedSequence([seed, r])) 子流, 与并行顺序无关。
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np
from statsmodels.stats.weightstats import DescrStatsW

from src.adversary import (
    AttackKind,
    AttackStrategySpec,
    DivisionCache,
    attack_from_uniforms,
    check_alpha,
    division_for,
)
from src.channel_model import GilbertElliotParams, channel_arrays, initial_beliefs
from src.config import SIM_DEFAULTS
from src.errors import ParameterError
from src.policy_engine import PolicySpec, ResampleMode, select_action, selection_probs
from src.sprt_detection import (
    Decision,
    SprtHypotheses,
    SprtState,
    asn_under_attack,
    sprt_step,
    wald_asn_constant,
    wald_thresholds,
)

logger = logging.getLogger("PYL.sim_engine")

UNIFORM_BLOCK = 1024


# ==========================================
# 1. 配置与记录类型
# ==========================================
@dataclass(frozen=True)
class SimConfig:
    channels: tuple
    policy: PolicySpec
    attack: AttackStrategySpec
    alpha: float = 0.0
    horizon: int = SIM_DEFAULTS["horizon"]
    warmup: int = SIM_DEFAULTS["warmup"]
    replications: int = SIM_DEFAULTS["replications"]
    seed: int = 0
    initial_beliefs: Optional[tuple] = None     # None = 平稳分布
    workers: int = SIM_DEFAULTS["workers"]

    def __post_init__(self):
        channels = tuple(self.channels)
        if len(channels) < 2:
            raise ParameterError(f"need at least two channels, got {len(channels)}")
        if not all(isinstance(c, GilbertElliotParams) for c in channels):
            raise ParameterError("channels must be GilbertElliotParams instances")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        if self.horizon < 1:
            raise ParameterError(f"horizon must be positive, got {self.horizon}")
        if not (0 <= self.warmup < self.horizon):
            raise ParameterError(f"need 0 <= warmup < horizon, got warmup={self.warmup}, horizon={self.horizon}")
        if self.replications < 1:
            raise ParameterError(f"replications must be positive, got {self.replications}")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.workers < 1:
            raise ParameterError(f"workers must be positive, got {self.workers}")
        if self.initial_beliefs is not None:
            object.__setattr__(self, "initial_beliefs", tuple(float(x) for x in self.initial_beliefs))
            initial_beliefs(channels, self.initial_beliefs)

    @property
    def n_channels(self):
        return len(self.channels)

    @cached_property
    def p11(self):
        return channel_arrays(self.channels)[0]

    @cached_property
    def p01(self):
        return channel_arrays(self.channels)[1]

    def start_beliefs(self):
        return initial_beliefs(self.channels, self.initial_beliefs)


@dataclass(frozen=True)
class DetectionSettings:
    """
    observe = "continuation": 只把紧跟一次成功之后 (同一 TP 内) 的时隙送进 SPRT,
    无攻击时这些时隙的失败概率恰为 p10;
    observe = "all": 每个发送时隙都送进去。
    detector_channel: 只监听该信道上的发送 (None = 所有信道), 假设检验用该信道 (默认 0) 的参数。
    alternative_alpha: H1 假设的攻击概率; None = 仿真配置的 α (α=0 时取 0.5)。
    """
    p_fa: float = 0.01
    p_m: float = 0.01
    c: Optional[float] = None
    observe: str = "continuation"
    detector_channel: Optional[int] = None
    alternative_alpha: Optional[float] = None

    def __post_init__(self):
        wald_thresholds(self.p_fa, self.p_m)
        if self.alternative_alpha is not None and not (0.0 < self.alternative_alpha <= 1.0):
            raise ParameterError(f"alternative_alpha must lie in (0, 1], got {self.alternative_alpha}")
        if self.observe not in ("continuation", "all"):
            raise ParameterError(f"observe must be 'continuation' or 'all', got '{self.observe}'")
        if self.c is not None and not (self.c > 0.0):
            raise ParameterError(f"C must be positive, got {self.c}")

    @property
    def thresholds(self):
        return wald_thresholds(self.p_fa, self.p_m)


@dataclass
class EpisodeState:
    slot: int
    beliefs: np.ndarray
    states: Optional[np.ndarray] = None
    current: Optional[int] = None           # None = 下一个时隙是新 TP 的开始
    division: Optional[np.ndarray] = None   # 本 TP 内攻击方的分配概率


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    beliefs_before: np.ndarray
    action: int
    jam_target: Optional[int]
    true_states: np.ndarray
    transmission_success: bool
    tp_start: bool

    @property
    def reward(self):
        return int(self.transmission_success)


@dataclass(frozen=True)
class TpMeasurement:
    lengths: np.ndarray
    mean: float
    distribution: dict


@dataclass(frozen=True)
class DetectionSummary:
    trials: int
    mean_samples: float
    stderr_samples: float
    rate_h1: float
    rate_h0: float
    undecided: int
    asn_formula: float
    theta0: float
    theta1: float
    observe: str


@dataclass(frozen=True)
class SimSummary:
    throughput_mean: float
    throughput_stderr: float
    throughput_ci: tuple
    tp_mean: float
    tp_stderr: float
    tp_distribution: dict
    attack_fraction: float
    attack_fraction_stderr: float
    replication_throughputs: tuple
    replications: int
    detection: Optional[DetectionSummary] = None


@dataclass
class EpisodeResult:
    replication: int
    success: np.ndarray
    jammed: np.ndarray
    actions: np.ndarray
    decision: Optional[Decision] = None
    samples: int = 0
    cache_stats: dict = field(default_factory=dict)


# ==========================================
# 2. 单个时隙
# ==========================================
def new_episode(config):
    return EpisodeState(slot=0, beliefs=config.start_beliefs())


def replication_rng(seed, replication):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(replication)])))


def run_slot(state, config, rng=None, uniforms=None, cache=None):
    """推进一个时隙, 返回 (SlotRecord, 新的 EpisodeState); 传入的 state 不被修改"""
    n = config.n_channels
    u = rng.random(n + 3) if uniforms is None else uniforms
    p11, p01 = config.p11, config.p01
    beliefs = state.beliefs

    if state.states is None:
        # t = 0: 按初始信念抽真实状态
        states = (u[:n] < beliefs).astype(np.int8)
    else:
        states = (u[:n] < np.where(state.states == 1, p11, p01)).astype(np.int8)

    tp_start = state.current is None
    if tp_start or config.policy.resample_mode is ResampleMode.EVERY_SLOT:
        action = select_action(config.policy, beliefs, u[n])
    else:
        action = state.current

    division = state.division
    if tp_start:
        q = selection_probs(config.policy, beliefs)
        division = division_for(config.attack, beliefs, q, config.channels, config.alpha, cache)

    jam = attack_from_uniforms(division, config.alpha, u[n + 1], u[n + 2])
    success = bool(states[action] == 1 and jam != action)

    new_beliefs = np.clip(beliefs * p11 + (1.0 - beliefs) * p01, 0.0, 1.0)
    new_beliefs[action] = p11[action] if success else p01[action]

    record = SlotRecord(
        slot=state.slot,
        beliefs_before=beliefs,
        action=action,
        jam_target=jam,
        true_states=states,
        transmission_success=success,
        tp_start=tp_start,
    )
    new_state = EpisodeState(
        slot=state.slot + 1,
        beliefs=new_beliefs,
        states=states,
        current=action if success else None,
        division=division,
    )
    return record, new_state


# ==========================================
# 3. TP 统计
# ==========================================
def tp_lengths_from_outcomes(success, warmup=0):
    """失败时隙结束一个 TP (失败时隙计入该 TP); 丢弃预热期跨过来的残段和末尾未结束的 TP"""
    success = np.asarray(success, dtype=bool)
    window = success[warmup:]
    fails = np.flatnonzero(~window)
    if warmup == 0 or not success[warmup - 1]:
        bounds = np.concatenate(([-1], fails))
    else:
        bounds = fails
    return np.diff(bounds)


def _distribution(lengths):
    if lengths.size == 0:
        return {}
    values, counts = np.unique(lengths, return_counts=True)
    return {int(v): float(c) / lengths.size for v, c in zip(values, counts)}


def measure_tp_lengths(records):
    success = np.array([r.transmission_success for r in records], dtype=bool)
    lengths = tp_lengths_from_outcomes(success)
    mean = float(lengths.mean()) if lengths.size else math.nan
    return TpMeasurement(lengths=lengths, mean=mean, distribution=_distribution(lengths))


# ==========================================
# 4. Episode / 重复实验
# ==========================================
def _run_episode(args):
    config, replication, detection = args
    rng = replication_rng(config.seed, replication)
    cache = DivisionCache()
    n = config.n_channels
    state = new_episode(config)

    success = np.zeros(config.horizon, dtype=bool)
    jammed = np.zeros(config.horizon, dtype=bool)
    actions = np.zeros(config.horizon, dtype=np.int16)

    hyp = thresholds = sprt = None
    decision = None
    if detection is not None:
        hyp = detection_hypotheses(config, detection)
        thresholds = detection.thresholds
        sprt = SprtState()

    t = 0
    while t < config.horizon:
        block = rng.random((min(UNIFORM_BLOCK, config.horizon - t), n + 3))
        for row in block:
            continuing = state.current is not None
            record, state = run_slot(state, config, uniforms=row, cache=cache)
            success[t] = record.transmission_success
            jammed[t] = record.jam_target is not None
            actions[t] = record.action
            t += 1
            if sprt is not None and _observed(record, continuing, detection):
                step, sprt = sprt_step(sprt, int(not record.transmission_success), hyp, thresholds)
                if step is not Decision.CONTINUE:
                    decision = step
                    break
        if decision is not None:
            break

    return EpisodeResult(
        replication=replication,
        success=success[:t].copy(),
        jammed=jammed[:t].copy(),
        actions=actions[:t].copy(),
        decision=decision,
        samples=sprt.samples_seen if sprt is not None else 0,
        cache_stats={"hits": cache.hits, "misses": cache.misses},
    )


def detection_hypotheses(config, detection):
    watched = detection.detector_channel if detection.detector_channel is not None else 0
    if not (0 <= watched < config.n_channels):
        raise ParameterError(f"detector_channel {watched} outside 0..{config.n_channels - 1}")
    alpha = detection.alternative_alpha
    if alpha is None:
        alpha = config.alpha if config.alpha > 0.0 else 0.5
    return SprtHypotheses.from_attack(config.channels[watched], alpha)


def _observed(record, continuing, detection):
    if detection.detector_channel is not None and record.action != detection.detector_channel:
        return False
    if detection.observe == "all":
        return True
    return continuing


def _stderr(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return math.nan
    return float(values.std(ddof=1) / math.sqrt(values.size))


def _confint(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return math.nan, math.nan
    if np.all(values == values[0]):
        return float(values[0]), float(values[0])
    lo, hi = DescrStatsW(values).tconfint_mean(alpha=0.05)
    return float(lo), float(hi)


class SimulationEngine:
    def __init__(self, config):
        self.config = config

    def _episodes(self, detection=None):
        cfg = self.config
        jobs = [(cfg, r, detection) for r in range(cfg.replications)]
        if cfg.workers > 1 and cfg.replications > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                # map 按提交顺序返回, 聚合与完成顺序无关
                return list(pool.map(_run_episode, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
        return [_run_episode(job) for job in jobs]

    def run_episode(self, replication=0):
        return _run_episode((self.config, replication, None))

    def run_replications(self):
        cfg = self.config
        logger.debug(
            f"🎲 {cfg.policy.label} vs {cfg.attack.label}, alpha={cfg.alpha:g}, "
            f"N={cfg.n_channels}, T={cfg.horizon}, R={cfg.replications}"
        )
        episodes = self._episodes()
        if cfg.attack.kind is AttackKind.ALPHA_OPTIMAL:
            hits = sum(e.cache_stats.get("hits", 0) for e in episodes)
            misses = sum(e.cache_stats.get("misses", 0) for e in episodes)
            logger.debug(f"🗂️ alpha-optimal division cache: {hits} hits, {misses} solves")
        return summarize(episodes, cfg.warmup)

    def run_with_detection(self, settings):
        cfg = self.config
        episodes = self._episodes(settings)
        decided = [e for e in episodes if e.decision is not None]
        samples = np.array([e.samples for e in decided], dtype=float)
        hyp = detection_hypotheses(cfg, settings)
        params = cfg.channels[settings.detector_channel or 0]
        c = settings.c if settings.c is not None else wald_asn_constant(settings.thresholds, settings.p_m)
        asn = asn_under_attack(cfg.alpha, params, c=c) if cfg.alpha > 0.0 else math.inf

        detection = DetectionSummary(
            trials=len(episodes),
            mean_samples=float(samples.mean()) if samples.size else math.nan,
            stderr_samples=_stderr(samples),
            rate_h1=sum(e.decision is Decision.ACCEPT_H1 for e in episodes) / len(episodes),
            rate_h0=sum(e.decision is Decision.ACCEPT_H0 for e in episodes) / len(episodes),
            undecided=len(episodes) - len(decided),
            asn_formula=asn,
            theta0=hyp.theta0,
            theta1=hyp.theta1,
            observe=settings.observe,
        )
        if detection.undecided:
            logger.warning(f"⚠️ {detection.undecided}/{detection.trials} detection runs reached the horizon undecided")
        # 检测实验提前停止, 吞吐量只在运行过的时隙上统计, 不扣除预热
        base = summarize(episodes, 0)
        return replace(base, detection=detection)


def summarize(episodes, warmup):
    """把各次重复的 EpisodeResult 聚合成 SimSummary (按 replication 编号排序)"""
    episodes = sorted(episodes, key=lambda e: e.replication)
    throughputs, tp_means, jam_fracs, pooled = [], [], [], []
    for e in episodes:
        w = min(warmup, max(len(e.success) - 1, 0))
        throughputs.append(float(e.success[w:].mean()) if len(e.success) else math.nan)
        jam_fracs.append(float(e.jammed[w:].mean()) if len(e.jammed) else math.nan)
        lengths = tp_lengths_from_outcomes(e.success, w) if len(e.success) else np.array([], dtype=int)
        tp_means.append(float(lengths.mean()) if lengths.size else math.nan)
        pooled.append(lengths)

    throughputs = np.array(throughputs)
    tp_means = np.array(tp_means)
    jam_fracs = np.array(jam_fracs)
    valid_tp = tp_means[~np.isnan(tp_means)]
    pooled = np.concatenate(pooled) if pooled else np.array([], dtype=int)
    return SimSummary(
        throughput_mean=float(throughputs.mean()),
        throughput_stderr=_stderr(throughputs),
        throughput_ci=_confint(throughputs),
        tp_mean=float(valid_tp.mean()) if valid_tp.size else math.nan,
        tp_stderr=_stderr(valid_tp),
        tp_distribution=_distribution(pooled),
        attack_fraction=float(jam_fracs.mean()),
        attack_fraction_stderr=_stderr(jam_fracs),
        replication_throughputs=tuple(float(x) for x in throughputs),
        replications=len(episodes),
    )


# ==========================================
# 5. 模块级入口
# ==========================================
def run_replications(config):
    return SimulationEngine(config).run_replications()


def run_with_detection(config, settings):
    return SimulationEngine(config).run_with_detection(settings)


def action_trace(config, replication=0):
    """一次 episode 的动作序列, 用于公共随机数下的策略对比"""
    return SimulationEngine(config).run_episode(replication).actions
