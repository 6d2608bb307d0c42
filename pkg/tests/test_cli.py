#!/usr/bin/env python3
"""
Tests for the command-line interface: argument parsing, exit codes and report comparison
"""

import json
import sys
import unittest
from pathlib import Path

# Add project root to path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from tractlab_base import BoundCheck
from tractlab_cli import EXIT_CONFIG, EXIT_OK, EXIT_UNSATISFIED, create_parser, main
from tractlab_core import Report, RunConfig, SuiteResult


def make_report(surface: str = "catenoid", K: float = 1.0, satisfied: bool = True) -> Report:
    check = BoundCheck("distortion", K, 1.0 if satisfied else 0.5)
    suite = SuiteResult("distortion", checks=[check], quantities={"K": K})
    return Report(RunConfig(surface=surface, suites=["distortion"]), {"distortion": suite})


class TestParser(unittest.TestCase):
    """Test argument parsing"""

    def setUp(self):
        self.parser = create_parser()

    def test_run_arguments(self):
        args = self.parser.parse_args(["run", "--surface", "plane", "--grid", "32,48", "--t-grid", "2,6,5,log",
                                       "--suite", "humps", "--suite", "distortion", "-e", "0,1,0"])
        self.assertEqual(args.command, "run")
        self.assertEqual(args.grid, [32, 48])
        self.assertEqual(args.t_grid, {"start": 2.0, "stop": 6.0, "num": 5, "spacing": "log"})
        self.assertEqual(args.suite, ["humps", "distortion"])
        self.assertEqual(args.direction, [0.0, 1.0, 0.0])
        self.assertIsNone(args.alpha)

    def test_t_grid_defaults_to_linear(self):
        args = self.parser.parse_args(["run", "--t-grid", "1,3,4"])
        self.assertEqual(args.t_grid["spacing"], "linear")

    def test_compare_arguments(self):
        args = self.parser.parse_args(["compare", "a.json", "b.json", "--tolerance", "0.01", "--fail-on-diff"])
        self.assertEqual((args.first, args.second), ("a.json", "b.json"))
        self.assertEqual(args.tolerance, 0.01)
        self.assertTrue(args.fail_on_diff)

    def test_bad_arguments_exit_with_config_code(self):
        self.assertEqual(main(["run", "--t-grid", "1,2"]), EXIT_CONFIG)
        self.assertEqual(main(["run", "--suite", "nonsense"]), EXIT_CONFIG)
        self.assertEqual(main([]), EXIT_CONFIG)

    def test_quiet_and_verbose_conflict(self):
        self.assertEqual(main(["-q", "-v", "run", "--dry-run"]), EXIT_CONFIG)


def test_dry_run_valid_config():
    assert main(["-q", "run", "--surface", "plane", "--suite", "humps", "--dry-run"]) == EXIT_OK


def test_dry_run_invalid_config():
    assert main(["-q", "run", "--alpha", "0.5", "--dry-run"]) == EXIT_CONFIG
    assert main(["-q", "run", "--surface", "plane", "--suite", "tubular", "--dry-run"]) == EXIT_CONFIG


def test_dry_run_reads_config_file(tmp_path):
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps({"surface": "helicoid", "suites": ["projective_volume"]}), encoding="utf-8")
    assert main(["-q", "run", "--config", str(config_path), "--dry-run"]) == EXIT_OK
    config_path.write_text(json.dumps({"surface": "helicoid", "suits": ["index"]}), encoding="utf-8")
    assert main(["-q", "run", "--config", str(config_path), "--dry-run"]) == EXIT_CONFIG


def test_run_exit_code_follows_report(mocker, tmp_path):
    runner_cls = mocker.patch("tractlab_cli.SuiteRunner")
    writer = mocker.patch("tractlab_cli.write_report", return_value={"report": tmp_path / "report.json"})

    runner_cls.return_value.run_suite.return_value = make_report(satisfied=True)
    assert main(["-q", "run", "--suite", "distortion", "-o", str(tmp_path)]) == EXIT_OK

    runner_cls.return_value.run_suite.return_value = make_report(K=2.0, satisfied=False)
    assert main(["-q", "run", "--suite", "distortion", "-o", str(tmp_path)]) == EXIT_UNSATISFIED
    assert writer.call_count == 2


def test_cli_overrides_reach_runner(mocker, tmp_path):
    runner_cls = mocker.patch("tractlab_cli.SuiteRunner")
    mocker.patch("tractlab_cli.write_report", return_value={"report": tmp_path / "report.json"})
    runner_cls.return_value.run_suite.return_value = make_report()
    main(["-q", "run", "--surface", "plane", "--slab", "3", "--suite", "humps", "-o", str(tmp_path)])
    config = runner_cls.call_args[0][0]
    assert config.surface == "plane"
    assert config.slab == 3.0
    assert config.suites == ["humps"]
    assert config.output_dir == str(tmp_path)


def test_small_real_run(tmp_path):
    out = tmp_path / "run"
    code = main(["-q", "run", "--surface", "catenoid", "--radius", "10", "--grid", "32,48",
                 "--suite", "distortion", "-o", str(out)])
    assert code in (EXIT_OK, EXIT_UNSATISFIED)
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["config"]["surface"] == "catenoid"
    assert (out / "summary.csv").exists()
    assert (out / "config.json").exists()


def _write(path: Path, report: Report) -> str:
    path.write_text(report.to_json(), encoding="utf-8")
    return str(path)


def test_compare_identical(tmp_path):
    first = _write(tmp_path / "a.json", make_report())
    assert main(["-q", "compare", first, first, "--fail-on-diff"]) == EXIT_OK


def test_compare_differences(tmp_path):
    first = _write(tmp_path / "a.json", make_report(K=1.0))
    second = _write(tmp_path / "b.json", make_report(K=1.2))
    assert main(["-q", "compare", first, second]) == EXIT_OK
    assert main(["-q", "compare", first, second, "--fail-on-diff"]) == EXIT_UNSATISFIED
    assert main(["-q", "compare", first, second, "--tolerance", "0.5", "--fail-on-diff"]) == EXIT_OK


def test_compare_mismatched_surfaces(tmp_path):
    first = _write(tmp_path / "a.json", make_report("catenoid"))
    second = _write(tmp_path / "b.json", make_report("plane"))
    assert main(["-q", "compare", first, second]) == EXIT_UNSATISFIED


def test_compare_missing_file(tmp_path):
    assert main(["-q", "compare", str(tmp_path / "none.json"), str(tmp_path / "none.json")]) == EXIT_CONFIG


if __name__ == '__main__':
    unittest.main()
