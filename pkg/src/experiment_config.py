"""
实验配置: YAML 文件 (或内置默认) -> ExperimentConfig

顶层键: experiment, channels, sweep, sim, output, seed, plots
任何一层出现未知键都直接报 ConfigError (键路径写在消息里)。
"""
import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from src.adversary import AttackKind, AttackStrategySpec
from src.channel_model import GilbertElliotParams
from src.config import BUILTIN_CHANNEL_SETS, OUTPUT_DIR, SIM_DEFAULTS
from src.errors import ConfigError, ParameterError
from src.policy_engine import PolicyKind, PolicySpec, ResampleMode

logger = logging.getLogger("PYL.experiment_config")

COMMANDS = ("figure3", "figure4", "figure56", "figure7", "figure8", "figure9", "sweep", "validate")

# ==========================================
# 1. 允许的键
# ==========================================
TOP_KEYS = {"experiment", "channels", "sweep", "sim", "output", "seed", "plots"}
CHANNEL_KEYS = {"set", "n", "rows"}
SWEEP_KEYS = {"alpha", "tau", "q", "n", "tau_a", "policies", "attacks"}
SIM_KEYS = {"horizon", "warmup", "replications", "workers", "resample_mode", "detection"}
DETECTION_KEYS = {"p_fa", "p_m", "c", "observe", "detector_channel", "alternative_alpha", "trials"}
OUTPUT_KEYS = {"dir"}
GRID_KEYS = {"start", "stop", "step"}
POLICY_KEYS = {"kind", "q", "tau"}
ATTACK_KEYS = {"kind", "tau_a"}


def _grid(start, stop, step):
    return {"start": start, "stop": stop, "step": step}


FIGURE_SIM = {"horizon": 20_000, "warmup": 2_000, "replications": 10, "workers": 1}

DEFAULT_CONFIGS = {
    "figure3": {
        "channels": {"set": "baseline", "n": 2},
        "sweep": {"alpha": _grid(0.0, 1.0, 0.05)},
    },
    "figure4": {
        "channels": {"set": "baseline", "n": 2},
        "sweep": {"alpha": [0.5], "q": _grid(0.5, 1.0, 0.025)},
    },
    "figure56": {
        "channels": {"set": "baseline"},
        "sweep": {"alpha": _grid(0.0, 1.0, 0.1), "tau": [2.0], "n": [4, 10],
                  "attacks": ["alpha_optimal"]},
        "sim": dict(FIGURE_SIM),
    },
    "figure7": {
        "channels": {"set": "table1"},
        "sweep": {"alpha": _grid(0.1, 1.0, 0.1), "tau": [2.0], "tau_a": [2.0],
                  "attacks": ["greedy", "uniform", "omega", "alpha_optimal"]},
        "sim": dict(FIGURE_SIM),
    },
    "figure8": {
        "channels": {"set": "table1"},
        "sweep": {"alpha": _grid(0.0, 1.0, 0.05)},
    },
    "figure9": {
        "channels": {"set": "baseline", "n": 2},
        "sweep": {"alpha": _grid(0.0, 1.0, 0.05)},
    },
    "sweep": {
        "channels": {"set": "baseline", "n": 4},
        "sweep": {"alpha": _grid(0.0, 1.0, 0.25),
                  "policies": ["myopic", {"kind": "boltzmann", "tau": 2.0}],
                  "attacks": ["greedy", "alpha_optimal"]},
        "sim": dict(FIGURE_SIM),
    },
    "validate": {
        "channels": {"set": "baseline", "n": 2},
        "sim": {"horizon": 100_000, "warmup": 1_000, "replications": 10, "workers": 1,
                "detection": {"p_fa": 0.01, "p_m": 0.01, "observe": "continuation", "trials": 10_000}},
    },
}


# ==========================================
# 2. ExperimentConfig
# ==========================================
@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    channel_set: str
    channel_rows: tuple
    n: Optional[int]
    sweep: dict
    sim: dict
    detection: dict
    output_dir: Path
    seed: int = 0
    plots: bool = True
    source: Optional[str] = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def channels_for(self, n=None):
        """按 N 生成信道列表: baseline 复制 N 份; table1 / explicit 取前 N 行"""
        n = n if n is not None else self.n
        if self.channel_set == "baseline":
            n = 2 if n is None else n
            if n < 2:
                raise ConfigError(f"channels.n must be >= 2, got {n}")
            rows = self.channel_rows * n
        else:
            rows = self.channel_rows
            if n is not None:
                if n > len(rows):
                    raise ConfigError(f"channel set '{self.channel_set}' has {len(rows)} rows, {n} requested")
                rows = rows[:n]
        return tuple(GilbertElliotParams.from_row(r) for r in rows)

    def grid(self, name, default=None):
        values = self.sweep.get(name)
        if values is None:
            if default is None:
                raise ConfigError(f"sweep.{name} is required for '{self.experiment}'")
            return list(default)
        return list(values)

    def sim_value(self, key):
        return self.sim.get(key, SIM_DEFAULTS.get(key))

    def canonical(self):
        """参与哈希的规范化字典"""
        return {
            "experiment": self.experiment,
            "channels": {"set": self.channel_set, "rows": [list(r) for r in self.channel_rows], "n": self.n},
            "sweep": self.sweep,
            "sim": self.sim,
            "detection": self.detection,
            "seed": self.seed,
        }

    @property
    def config_hash(self):
        payload = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# ==========================================
# 3. 解析与校验
# ==========================================
def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError(f"'{path or '<root>'}' must be a mapping, got {type(obj).__name__}")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        prefix = f"{path}." if path else ""
        raise ConfigError(f"unknown config key '{prefix}{unknown[0]}'")


def _deep_merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _parse_grid(value, path):
    if isinstance(value, dict):
        _check_keys(value, GRID_KEYS, path)
        try:
            start, stop, step = float(value["start"]), float(value["stop"]), float(value["step"])
        except KeyError as e:
            raise ConfigError(f"'{path}' range needs start/stop/step, missing {e}") from None
        if step <= 0.0 or stop < start:
            raise ConfigError(f"'{path}' range is empty: start={start}, stop={stop}, step={step}")
        count = int(round((stop - start) / step)) + 1
        values = np.round(np.linspace(start, start + (count - 1) * step, count), 10)
        return [float(v) for v in values]
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, list) and value:
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(f"'{path}' must be a list of numbers") from None
    raise ConfigError(f"'{path}' must be a nonempty list or a start/stop/step range")


def parse_policy(entry, path="sweep.policies", resample_mode=ResampleMode.TP_BOUNDARY):
    if isinstance(entry, str):
        entry = {"kind": entry}
    _check_keys(entry, POLICY_KEYS, path)
    try:
        kind = PolicyKind(entry.get("kind"))
    except ValueError:
        raise ConfigError(f"'{path}' has unknown policy kind '{entry.get('kind')}'") from None
    try:
        return PolicySpec(kind, q=entry.get("q"), tau=entry.get("tau"), resample_mode=resample_mode)
    except ParameterError as e:
        raise ConfigError(f"'{path}': {e}") from None


def parse_attack(entry, path="sweep.attacks", tau_a=None):
    if isinstance(entry, str):
        entry = {"kind": entry}
    _check_keys(entry, ATTACK_KEYS, path)
    try:
        kind = AttackKind(entry.get("kind"))
    except ValueError:
        raise ConfigError(f"'{path}' has unknown attack kind '{entry.get('kind')}'") from None
    tau = entry.get("tau_a", tau_a if kind is AttackKind.OMEGA else None)
    try:
        return AttackStrategySpec(kind, tau_a=tau)
    except ParameterError as e:
        raise ConfigError(f"'{path}': {e}") from None


def _parse_channels(block):
    _check_keys(block, CHANNEL_KEYS, "channels")
    name = block.get("set", "baseline")
    n = block.get("n")
    if n is not None and (not isinstance(n, int) or n < 2):
        raise ConfigError(f"'channels.n' must be an integer >= 2, got {n}")
    if name == "explicit":
        rows = block.get("rows")
        if not isinstance(rows, list) or len(rows) < 2:
            raise ConfigError("'channels.rows' needs at least two [p11, p10, p00, p01] rows")
    else:
        if name not in BUILTIN_CHANNEL_SETS:
            raise ConfigError(f"unknown channel set '{name}' (builtin: {sorted(BUILTIN_CHANNEL_SETS)})")
        if "rows" in block:
            raise ConfigError("'channels.rows' is only valid with set: explicit")
        rows = BUILTIN_CHANNEL_SETS[name]
    parsed = []
    for i, row in enumerate(rows):
        if not isinstance(row, (list, tuple)) or len(row) != 4:
            raise ConfigError(f"'channels.rows[{i}]' must be [p11, p10, p00, p01]")
        try:
            GilbertElliotParams.from_row(row)
        except ParameterError as e:
            raise ConfigError(f"'channels.rows[{i}]': {e}") from None
        parsed.append(tuple(float(x) for x in row))
    return name, tuple(parsed), n


def _parse_sweep(block):
    _check_keys(block, SWEEP_KEYS, "sweep")
    sweep = {}
    for key in ("alpha", "tau", "q", "tau_a"):
        if key in block:
            sweep[key] = _parse_grid(block[key], f"sweep.{key}")
    if "n" in block:
        ns = block["n"] if isinstance(block["n"], list) else [block["n"]]
        if not ns or not all(isinstance(v, int) and v >= 2 for v in ns):
            raise ConfigError(f"'sweep.n' must be a nonempty list of integers >= 2, got {block['n']}")
        sweep["n"] = list(ns)
    for key in ("policies", "attacks"):
        if key in block:
            if not isinstance(block[key], list) or not block[key]:
                raise ConfigError(f"'sweep.{key}' must be a nonempty list")
            sweep[key] = copy.deepcopy(block[key])
    for i, entry in enumerate(sweep.get("policies", [])):
        parse_policy(entry, path=f"sweep.policies[{i}]")
    for i, entry in enumerate(sweep.get("attacks", [])):
        parse_attack(entry, path=f"sweep.attacks[{i}]", tau_a=1.0)

    for a in sweep.get("alpha", []):
        if not (0.0 <= a <= 1.0):
            raise ConfigError(f"'sweep.alpha' value {a} outside [0, 1]")
    for key in ("tau", "tau_a"):
        for t in sweep.get(key, []):
            if not (t > 0.0):
                raise ConfigError(f"'sweep.{key}' value {t} must be positive")
    for q in sweep.get("q", []):
        if not (0.5 <= q <= 1.0):
            raise ConfigError(f"'sweep.q' value {q} outside [0.5, 1]")
    return sweep


def _parse_sim(block):
    _check_keys(block, SIM_KEYS, "sim")
    sim = {k: v for k, v in block.items() if k != "detection"}
    for key in ("horizon", "warmup", "replications", "workers"):
        if key in sim and (not isinstance(sim[key], int) or sim[key] < 0):
            raise ConfigError(f"'sim.{key}' must be a nonnegative integer, got {sim[key]}")
    for key in ("horizon", "replications", "workers"):
        if key in sim and sim[key] == 0:
            raise ConfigError(f"'sim.{key}' must be positive")
    horizon = sim.get("horizon", SIM_DEFAULTS["horizon"])
    warmup = sim.get("warmup", SIM_DEFAULTS["warmup"])
    if warmup >= horizon:
        raise ConfigError(f"'sim.warmup' ({warmup}) must be smaller than 'sim.horizon' ({horizon})")
    if "resample_mode" in sim:
        try:
            sim["resample_mode"] = ResampleMode(sim["resample_mode"]).value
        except ValueError:
            raise ConfigError("'sim.resample_mode' must be tp_boundary or every_slot") from None

    detection = block.get("detection", {}) or {}
    _check_keys(detection, DETECTION_KEYS, "sim.detection")
    return sim, dict(detection)


def build_config(raw, experiment, source=None):
    _check_keys(raw, TOP_KEYS, "")
    name = raw.get("experiment", experiment)
    if name != experiment:
        raise ConfigError(f"config is for experiment '{name}', not '{experiment}'")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or not (0 <= seed < 2 ** 64):
        raise ConfigError(f"'seed' must be a 64-bit unsigned integer, got {seed}")
    plots = raw.get("plots", True)
    if not isinstance(plots, bool):
        raise ConfigError(f"'plots' must be true or false, got {plots}")

    channel_set, rows, n = _parse_channels(raw.get("channels", {}) or {})
    sweep = _parse_sweep(raw.get("sweep", {}) or {})
    sim, detection = _parse_sim(raw.get("sim", {}) or {})

    output = raw.get("output", {}) or {}
    _check_keys(output, OUTPUT_KEYS, "output")
    out_dir = Path(output["dir"]) if "dir" in output else OUTPUT_DIR / experiment

    return ExperimentConfig(
        experiment=experiment,
        channel_set=channel_set,
        channel_rows=rows,
        n=n,
        sweep=sweep,
        sim=sim,
        detection=detection,
        output_dir=out_dir,
        seed=seed,
        plots=plots,
        source=source,
        raw=raw,
    )


def load_config(experiment, path=None):
    """path 为 None 时用内置默认配置; 文件中缺省的键由默认配置补齐"""
    if experiment not in COMMANDS:
        raise ConfigError(f"unknown experiment '{experiment}'")
    defaults = copy.deepcopy(DEFAULT_CONFIGS[experiment])
    if path is None:
        logger.debug(f"Using builtin configuration for '{experiment}'")
        return build_config(defaults, experiment)

    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    _check_keys(raw, TOP_KEYS, "")
    logger.info(f"📂 Loaded config: {path}")
    return build_config(_deep_merge(defaults, raw), experiment, source=str(path))


def apply_overrides(config, seed=None, out=None, replications=None, no_plots=False):
    """命令行参数覆盖文件中的值"""
    changes = {}
    if seed is not None:
        if not (0 <= seed < 2 ** 64):
            raise ConfigError(f"--seed must be a 64-bit unsigned integer, got {seed}")
        changes["seed"] = seed
    if out is not None:
        changes["output_dir"] = Path(out)
    if replications is not None:
        if replications < 1:
            raise ConfigError(f"--replications must be positive, got {replications}")
        changes["sim"] = {**config.sim, "replications": replications}
    if no_plots:
        changes["plots"] = False
    return replace(config, **changes) if changes else config
