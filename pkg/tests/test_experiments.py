"""
Experiment command tests on small grids (closed forms exact, simulations tiny).
"""
import math

import numpy as np
import pytest
import yaml

from src.experiment_config import load_config
from src.experiments import (
    cmd_figure3,
    cmd_figure4,
    cmd_figure7,
    cmd_figure8,
    cmd_figure9,
    cmd_figure56,
    cmd_sweep,
    make_reporter,
)

TINY_SIM = {"horizon": 300, "warmup": 10, "replications": 2, "workers": 1}


def small_config(tmp_path, command, **overrides):
    payload = {"output": {"dir": str(tmp_path)}, "plots": False}
    payload.update(overrides)
    tmp_path.mkdir(parents=True, exist_ok=True)
    path = tmp_path / f"{command}.yaml"
    path.write_text(yaml.safe_dump(payload), encoding="utf-8")
    return load_config(command, path)


class TestClosedFormFigures:
    def test_figure3(self, tmp_path):
        df = cmd_figure3(small_config(tmp_path, "figure3", sweep={"alpha": [0.0, 0.5]}))
        assert list(df.columns) == ["alpha", "u_myopic", "u_softmax_opt", "q_star", "d_star"]
        assert df.loc[0, "u_myopic"] == pytest.approx(0.8222, abs=1e-4)
        assert df.loc[0, "q_star"] == 1.0
        assert df.loc[1, "u_softmax_opt"] > df.loc[1, "u_myopic"]
        assert (tmp_path / "figure3.csv").exists()
        assert not (tmp_path / "figure3.svg").exists()

    def test_figure4(self, tmp_path):
        df = cmd_figure4(small_config(tmp_path, "figure4", sweep={"alpha": [0.5], "q": [0.5, 0.75, 1.0]}))
        assert np.all(np.diff(df["entropy"]) >= 0)
        assert df.loc[0, "q"] == 1.0
        assert df.loc[0, "performance"] == pytest.approx(0.8222, abs=1e-4)
        assert df["robustness"].between(0.0, 1.0).all()

    def test_figure8_default_grid(self, tmp_path):
        df = cmd_figure8(small_config(tmp_path, "figure8"))
        assert len(df) == 21
        assert df.loc[0, "tau_star"] == pytest.approx(1e-3, rel=1e-9)
        assert (df["tau_star"].diff().dropna() >= -1e-3 * df["tau_star"].shift().dropna()).all()
        assert df["u_star"].between(0.0, 1.0).all()

    def test_figure9(self, tmp_path):
        df = cmd_figure9(small_config(tmp_path, "figure9"))
        assert len(df) == 21
        row = df[df["alpha"] == 0.5].iloc[0]
        assert row["cost"] == pytest.approx(0.2717, abs=1e-4)
        assert row["theta1"] == pytest.approx(0.55)
        assert math.isinf(df.loc[0, "asn"])
        assert df["cost"].is_monotonic_increasing


class TestSimulatedFigures:
    def test_figure56(self, tmp_path):
        config = small_config(tmp_path, "figure56", sweep={"alpha": [0.0, 0.5], "n": [4]}, sim=TINY_SIM)
        df = cmd_figure56(config)
        assert set(df.columns) >= {"n", "alpha", "u_myopic", "se_myopic", "u_softmax", "drop_myopic"}
        assert df.loc[0, "drop_myopic"] == 0.0
        assert (df["n"] == 4).all()

    def test_figure7(self, tmp_path):
        config = small_config(tmp_path, "figure7", sweep={"alpha": [0.1, 0.5]}, sim=TINY_SIM)
        df = cmd_figure7(config)
        kinds = ["greedy", "uniform", "omega", "alpha_optimal"]
        assert list(df.columns) == ["alpha"] + [f"{p}_{k}" for k in kinds for p in ("u", "se")]
        assert df[[f"u_{k}" for k in kinds]].stack().between(0.0, 1.0).all()
        assert (tmp_path / "figure7.csv").exists()

    def test_sweep_full_attack(self, tmp_path):
        config = small_config(tmp_path, "sweep", channels={"set": "baseline", "n": 2},
                              sweep={"alpha": [0.0, 1.0], "policies": ["myopic"], "attacks": ["greedy"]},
                              sim=TINY_SIM)
        df = cmd_sweep(config)
        assert len(df) == 2
        assert df.loc[1, "throughput"] == 0.0
        assert df.loc[1, "attack_fraction"] == 1.0
        assert df.loc[0, "throughput"] > 0.5

    def test_sweep_reproducible(self, tmp_path):
        kwargs = dict(sweep={"alpha": [0.4], "policies": [{"kind": "boltzmann", "tau": 1.0}],
                             "attacks": ["uniform"]}, sim=TINY_SIM)
        a = cmd_sweep(small_config(tmp_path / "a", "sweep", **kwargs))
        b = cmd_sweep(small_config(tmp_path / "b", "sweep", **kwargs))
        assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()
        assert a.equals(b)


class TestReporterMetadata:
    def test_metadata(self, tmp_path):
        config = small_config(tmp_path, "figure9")
        rm = make_reporter(config, "figure9")
        assert rm.metadata["config_hash"] == config.config_hash
        assert rm.metadata["command"] == "figure9"
        assert rm.report_dir == tmp_path
