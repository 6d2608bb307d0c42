#!/usr/bin/env python3
"""
Unit tests for run configuration, suite orchestration and reports
"""

import csv
import json
import os
import shutil
import sys
import tempfile
import unittest
from pathlib import Path
from unittest.mock import Mock, patch

import numpy as np

# Add project root to path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from tractlab_base import BoundCheck, ComparisonError, ConfigError, FlowError
from tractlab_core import (
    ENV_OUTPUT_DIR,
    ENV_THREADS,
    ConfigManager,
    ConfigValidator,
    Report,
    RunConfig,
    SuiteResult,
    SuiteRunner,
    compare_reports,
    load_report,
    run_suite,
    write_report,
)


def small_config(**overrides) -> RunConfig:
    data = {"surface": "catenoid", "radius": 10.0, "grid": [32, 48], "suites": ["distortion"]}
    data.update(overrides)
    return RunConfig.from_dict(data)


class TestRunConfig(unittest.TestCase):
    """Test RunConfig parsing and validation"""

    def test_defaults_are_valid(self):
        config = RunConfig()
        self.assertEqual(ConfigValidator.problems(config), [])
        self.assertEqual(config.alpha, 2.0)

    def test_unknown_keys(self):
        with self.assertRaises(ConfigError) as ctx:
            RunConfig.from_dict({"surface": "plane", "colour": "red"})
        self.assertEqual(ctx.exception.problems, ["colour"])

    def test_alpha_must_exceed_one(self):
        problems = ConfigValidator.problems(small_config(alpha=1.0))
        self.assertTrue(any("alpha must exceed 1" in p for p in problems))

    def test_unknown_suite(self):
        problems = ConfigValidator.problems(small_config(suites=["bogus"]))
        self.assertTrue(any("unknown suites" in p for p in problems))

    def test_tubular_suite_needs_tubular_surface(self):
        problems = ConfigValidator.problems(small_config(surface="plane", suites=["tubular"]))
        self.assertTrue(any("tubular" in p for p in problems))
        self.assertEqual(ConfigValidator.problems(small_config(suites=["tubular"])), [])

    def test_closed_form_suites_need_alpha_two(self):
        problems = ConfigValidator.problems(small_config(alpha=3.0, suites=["frequency"]))
        self.assertEqual(len(problems), 1)
        self.assertEqual(ConfigValidator.problems(small_config(alpha=3.0, suites=["energy"])), [])

    def test_grid_and_tau_checks(self):
        problems = ConfigValidator.problems(small_config(grid=[2, 48], tau_grid=[4.0, 2.0]))
        self.assertEqual(len(problems), 2)

    def test_validate_raises_with_problems(self):
        with self.assertRaises(ConfigError) as ctx:
            ConfigValidator.validate(small_config(surface="torus"))
        self.assertIn("unknown surface 'torus'", ctx.exception.problems)


class TestConfigManager(unittest.TestCase):
    """Test layering of defaults, environment, file and overrides"""

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp())
        self.config_path = self.test_dir / "run.json"
        with open(self.config_path, "w", encoding="utf-8") as f:
            json.dump({"surface": "plane", "suites": ["humps"], "slab": 3.0}, f)

    def tearDown(self):
        if self.test_dir.exists():
            shutil.rmtree(self.test_dir)

    def test_precedence(self):
        with patch.dict(os.environ, {ENV_OUTPUT_DIR: str(self.test_dir / "env_out")}):
            config = ConfigManager.build(self.config_path, {"surface": "catenoid", "alpha": None})
        self.assertEqual(config.surface, "catenoid")
        self.assertEqual(config.suites, ["humps"])
        self.assertEqual(config.slab, 3.0)
        self.assertEqual(config.output_dir, str(self.test_dir / "env_out"))

    def test_file_overrides_environment(self):
        with open(self.config_path, "w", encoding="utf-8") as f:
            json.dump({"output_dir": "from_file"}, f)
        with patch.dict(os.environ, {ENV_OUTPUT_DIR: "from_env"}):
            self.assertEqual(ConfigManager.build(self.config_path).output_dir, "from_file")

    def test_missing_file_uses_defaults(self):
        self.assertEqual(ConfigManager.load_config_file(self.test_dir / "missing.json"), {})

    def test_malformed_file(self):
        bad = self.test_dir / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        with self.assertRaises(ConfigError):
            ConfigManager.load_config_file(bad)
        bad.write_text("[1, 2]", encoding="utf-8")
        with self.assertRaises(ConfigError):
            ConfigManager.load_config_file(bad)

    def test_invalid_override_rejected(self):
        with self.assertRaises(ConfigError):
            ConfigManager.build(self.config_path, {"alpha": 0.5})

    def test_save_round_trip(self):
        config = small_config(tau_grid=[1.5, 3.0])
        path = self.test_dir / "saved" / "config.json"
        ConfigManager.save_config(path, config)
        self.assertEqual(RunConfig.from_dict(ConfigManager.load_config_file(path)), config)

    def test_thread_cap(self):
        self.assertEqual(ConfigManager.thread_cap(small_config(threads=3)), 3)
        with patch.dict(os.environ, {ENV_THREADS: "5"}):
            self.assertEqual(ConfigManager.thread_cap(), 5)
        with patch.dict(os.environ, {ENV_THREADS: "many"}):
            self.assertEqual(ConfigManager.thread_cap(), min(4, os.cpu_count() or 1))


class TestReport(unittest.TestCase):
    """Test report assembly, serialization and comparison"""

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp())
        suite = SuiteResult("distortion", checks=[BoundCheck("distortion", 1.0, 1.0)],
                            quantities={"K": 1.0, "V2": np.inf, "counts": np.array([1, 2])},
                            runtime=2.5,
                            tables={"levels": [{"t": 1.0, "J": 2.0}]},
                            documents={"forest": {"tau_grid": [2.0]}})
        self.report = Report(small_config(), {"distortion": suite})

    def tearDown(self):
        if self.test_dir.exists():
            shutil.rmtree(self.test_dir)

    def test_json_is_deterministic(self):
        data = json.loads(self.report.to_json())
        self.assertNotIn("runtime", data["suites"]["distortion"])
        self.assertEqual(data["suites"]["distortion"]["quantities"]["V2"], "inf")
        self.assertEqual(data["suites"]["distortion"]["quantities"]["counts"], [1, 2])
        self.assertTrue(data["satisfied"])
        self.assertEqual(self.report.exit_code, 0)

    def test_summary_rows_carry_runtime(self):
        rows = self.report.summary_rows()
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]["runtime"], 2.5)

    def test_write_report(self):
        written = write_report(self.report, self.test_dir / "out")
        for name in ("report", "summary", "levels", "forest", "config"):
            self.assertTrue(written[name].exists(), name)
        self.assertNotIn("obj", written)
        with open(written["levels"], newline="", encoding="utf-8") as f:
            self.assertEqual(list(csv.DictReader(f)), [{"t": "1.0", "J": "2.0"}])
        self.assertEqual(load_report(written["report"])["config"]["surface"], "catenoid")

    def test_identical_reports_have_no_diff(self):
        data = json.loads(self.report.to_json())
        self.assertEqual(compare_reports(data, data), {})

    def test_diff_above_tolerance(self):
        first = json.loads(self.report.to_json())
        second = json.loads(self.report.to_json())
        second["suites"]["distortion"]["quantities"]["K"] = 1.1
        diff = compare_reports(first, second, tolerance=0.05)
        self.assertEqual(list(diff), ["distortion.quantities.K"])
        self.assertAlmostEqual(diff["distortion.quantities.K"]["relative"], 0.1 / 1.1)
        self.assertEqual(compare_reports(first, second, tolerance=0.2), {})

    def test_mismatched_reports(self):
        first = json.loads(self.report.to_json())
        second = json.loads(self.report.to_json())
        second["config"]["surface"] = "plane"
        with self.assertRaises(ComparisonError):
            compare_reports(first, second)
        second["config"]["surface"] = "catenoid"
        second["suites"]["humps"] = {}
        with self.assertRaises(ComparisonError):
            compare_reports(first, second)


class TestSuiteRunner(unittest.TestCase):
    """Test suite execution and error capture"""

    def setUp(self):
        self.runner = SuiteRunner(small_config(), threads=2)

    def test_distortion_suite(self):
        result = self.runner.run_one("distortion")
        self.assertTrue(result.success, result.error)
        self.assertIn("derivative_agreement", [c.name for c in result.checks])
        self.assertIn("K", result.quantities)
        self.assertGreater(result.runtime, 0.0)

    def test_library_error_is_recorded(self):
        self.runner._handlers["distortion"] = Mock(side_effect=FlowError("flow varies"))
        result = self.runner.run_one("distortion")
        self.assertEqual(result.status, "error")
        self.assertEqual(result.error, "flow varies")
        self.assertFalse(result.satisfied)

    def test_unexpected_error_is_recorded(self):
        self.runner._handlers["distortion"] = Mock(side_effect=RuntimeError("boom"))
        result = self.runner.run_one("distortion")
        self.assertEqual(result.error, "RuntimeError: boom")

    def test_failing_suite_does_not_abort_others(self):
        runner = SuiteRunner(small_config(suites=["distortion", "humps"]), threads=2)
        runner._handlers["humps"] = Mock(side_effect=RuntimeError("boom"))
        report = runner.run_suite()
        self.assertEqual(sorted(report.suites), ["distortion", "humps"])
        self.assertTrue(report.suites["distortion"].success)
        self.assertEqual(report.exit_code, 1)

    def test_index_suite_with_infinite_volume(self):
        runner = SuiteRunner(small_config(surface="helicoid", direction=[0.0, 0.0, 1.0], suites=["index"]),
                             threads=1)
        runner.volume_estimate = Mock(return_value=Mock(diverged=True, V2=float("inf")))
        result = runner.run_one("index")
        self.assertTrue(result.success, result.error)
        check = next(c for c in result.checks if c.name == "index_theorem")
        self.assertTrue(check.satisfied)
        self.assertTrue(result.satisfied)
        self.assertIn("projective volume infinite: index bound trivially holds", result.notes)

    def test_frequency_suite_exports_level_sets(self):
        runner = SuiteRunner(small_config(grid=[64, 100], suites=["frequency"]), threads=2)
        result = runner.run_one("frequency")
        self.assertTrue(result.success, result.error)
        rows = result.tables["level_sets"]
        self.assertGreater(len(rows), 0)
        self.assertEqual(set(rows[0]), {"t", "component", "kind", "u", "v", "x", "y", "z", "theta"})
        self.assertEqual({row["t"] for row in rows}, {row["t"] for row in result.tables["frequency"]})
        test_dir = Path(tempfile.mkdtemp())
        try:
            written = write_report(Report(runner.config, {"frequency": result}), test_dir)
            with open(written["level_sets"], newline="", encoding="utf-8") as f:
                self.assertEqual(len(list(csv.DictReader(f))), len(rows))
        finally:
            shutil.rmtree(test_dir)

    def test_stop_check_skips_pending_suites(self):
        report = self.runner.run_suite(stop_check=lambda: True)
        self.assertEqual(report.suites, {})

    def test_invalid_config_rejected(self):
        with self.assertRaises(ConfigError):
            SuiteRunner(small_config(alpha=0.5))

    def test_module_level_run_suite(self):
        report = run_suite(small_config(), threads=1)
        self.assertEqual(list(report.suites), ["distortion"])
        self.assertEqual(report.config.surface, "catenoid")


if __name__ == '__main__':
    unittest.main()
