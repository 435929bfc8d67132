"""
Oracle suite tests: bookkeeping plus the cheap closed-form and solver oracles.
"""
import numpy as np
import pytest
import yaml

from src.channel_model import GilbertElliotParams
from src.config import BASELINE_ROW
from src.experiment_config import load_config
from src.validation import (
    OracleSuite,
    attack_ordering_checks,
    closed_form_checks,
    cost_checks,
    problem3_checks,
    randomization_drop_checks,
)


@pytest.fixture
def baseline():
    return GilbertElliotParams.from_row(BASELINE_ROW)


class TestOracleSuite:
    def test_pass_and_fail(self):
        suite = OracleSuite()
        suite.add("close", 1.0, 1.05, 0.1)
        suite.add("far", 1.0, 2.0, 0.1)
        assert [r.passed for r in suite.rows] == [True, False]
        assert [r.check for r in suite.failures] == ["far"]

    def test_info_rows_never_fail(self):
        suite = OracleSuite()
        suite.add("informational", 1.0, 5.0, 0.1, hard=False)
        assert suite.failures == []
        assert suite.rows[0].kind == "info"

    def test_nan_tolerance_fails(self):
        suite = OracleSuite()
        suite.add("no stderr", 1.0, 1.0, float("nan"))
        assert len(suite.failures) == 1

    def test_flag(self):
        suite = OracleSuite()
        suite.flag("holds", True)
        suite.flag("broken", False)
        assert [r.check for r in suite.failures] == ["broken"]

    def test_frame_columns(self):
        suite = OracleSuite()
        suite.add("x", 0.0, 0.0, 0.0, note="n")
        df = suite.frame()
        assert list(df.columns) == ["check", "kind", "expected", "observed", "tolerance", "passed", "note"]


class TestCheapOracles:
    def test_closed_forms_pass(self, baseline):
        suite = OracleSuite()
        closed_form_checks(suite, baseline)
        assert suite.failures == []
        info = [r for r in suite.rows if r.kind == "info"]
        assert len(info) == 2
        assert all("printed" in r.check for r in info)

    def test_costs_pass(self, baseline):
        suite = OracleSuite()
        cost_checks(suite, baseline)
        assert suite.failures == []

    def test_solver_oracles_pass(self):
        suite = OracleSuite()
        problem3_checks(suite, np.random.default_rng(0))
        assert suite.failures == []


@pytest.fixture
def tiny_validate_config(tmp_path):
    path = tmp_path / "validate.yaml"
    payload = {"output": {"dir": str(tmp_path)}, "plots": False,
               "sim": {"horizon": 300, "warmup": 10, "replications": 2}}
    path.write_text(yaml.safe_dump(payload), encoding="utf-8")
    return load_config("validate", path)


class TestFigureLevelRows:
    def test_randomization_drop_rows(self, tiny_validate_config, baseline):
        suite = OracleSuite()
        randomization_drop_checks(suite, tiny_validate_config, baseline)
        hard = [r for r in suite.rows if r.kind == "hard"]
        info = [r for r in suite.rows if r.kind == "info"]
        assert len(hard) == 10
        assert all("drop" in r.check for r in hard)
        assert [r.check for r in info] == ["Boltzmann(2) throughput N=10 alpha=0.5 within 5% of alpha=0"]

    def test_attack_ordering_rows_are_reported(self, tiny_validate_config):
        suite = OracleSuite()
        attack_ordering_checks(suite, tiny_validate_config)
        assert len(suite.rows) == 4 * 2 + 2
        assert all(r.kind == "info" for r in suite.rows)
        assert suite.failures == []
        assert all("U_alpha_optimal=" in r.note for r in suite.rows if r.check.startswith("alpha-optimal"))
