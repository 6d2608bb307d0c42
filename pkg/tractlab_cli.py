#!/usr/bin/env python3
"""
TractLab - CLI Application
Run theorem suites on catalog minimal surfaces and compare reports
Designed for Linux terminal environments
"""

import argparse
import logging
import os
import signal
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Third-party imports
try:
    from rich.console import Console
    from rich.logging import RichHandler
    from rich.panel import Panel
    from rich.table import Table
except ImportError as e:
    print(f"❌ Missing required package: {e}")
    print("📦 Install with: pip install -r requirements_cli.txt")
    sys.exit(1)

# Local imports
try:
    from tractlab_base import ComparisonError, ConfigError
    from tractlab_core import (ENV_LOG_LEVEL, SUITES, ConfigManager, Report, SuiteRunner, compare_reports,
                               load_report, write_report)
except ImportError as e:
    print(f"❌ Missing core module: {e}")
    print("💡 Make sure the tractlab_*.py modules are in the same directory")
    sys.exit(1)

EXIT_OK = 0
EXIT_UNSATISFIED = 1
EXIT_CONFIG = 2
EXIT_INTERRUPTED = 130


class TractLabCLI:
    """Command-line interface for TractLab runs"""

    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console()
        self.is_processing = False
        self.stop_requested = False

        # Signal handler for graceful shutdown
        signal.signal(signal.SIGINT, self.signal_handler)
        signal.signal(signal.SIGTERM, self.signal_handler)

    def signal_handler(self, signum, frame):
        """Handle interrupt signals: pending suites are skipped, then exit 130"""
        self.console.print("\n🛑 [yellow]Run interrupted by user[/yellow]")
        self.stop_requested = True
        if signum == signal.SIGINT and not self.is_processing:
            sys.exit(EXIT_INTERRUPTED)

    def setup_logging(self, log_file: Optional[str] = None, verbose: bool = False, quiet: bool = False):
        """Setup logging configuration"""
        level_name = os.environ.get(ENV_LOG_LEVEL, "").upper()
        level = logging.DEBUG if verbose else getattr(logging, level_name, logging.INFO)
        if quiet:
            level = logging.WARNING

        handlers: List[logging.Handler] = [RichHandler(console=self.console, rich_tracebacks=True)]
        if log_file:
            file_handler = logging.FileHandler(log_file)
            file_handler.setFormatter(logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"))
            handlers.append(file_handler)

        logging.basicConfig(level=level, format="%(message)s", handlers=handlers, force=True)
        self.logger = logging.getLogger(__name__)

    # -- run ----------------------------------------------------------------

    @staticmethod
    def collect_overrides(args) -> Dict[str, Any]:
        """CLI flags that override the JSON document (None means not given)."""
        return {
            "surface": args.surface,
            "profile": args.profile,
            "alpha": args.alpha,
            "direction": args.direction,
            "grid": args.grid,
            "radius": args.radius,
            "t_grid": args.t_grid,
            "tau_grid": args.tau_grid,
            "suites": args.suite,
            "slab": args.slab,
            "probe_tracts": args.probe_tracts,
            "seed": args.seed,
            "threads": args.threads,
            "output_dir": args.output_dir,
            "export_obj": True if args.export_obj else None,
        }

    def run_mode(self, args) -> int:
        self.console.print(Panel.fit("∮ TractLab theorem suites", style="bold green"))
        try:
            config = ConfigManager.build(Path(args.config) if args.config else None, self.collect_overrides(args))
        except ConfigError as e:
            self.console.print(f"❌ [red]{e}[/red]")
            return EXIT_CONFIG

        self.console.print(f"📐 Surface: [cyan]{config.surface}[/cyan]  α = {config.alpha:g}")
        self.console.print(f"🧪 Suites: {', '.join(config.suites)}")
        self.console.print(f"📁 Output: {config.output_dir}")
        if args.dry_run:
            self.console.print("🧪 [yellow]DRY RUN MODE[/yellow] configuration is valid")
            return EXIT_OK

        runner = SuiteRunner(config)
        self.is_processing = True
        report = runner.run_suite(progress=not args.quiet, stop_check=lambda: self.stop_requested)
        self.is_processing = False
        written = write_report(report, Path(config.output_dir), runner.grid)
        self.print_report(report)
        self.console.print(f"💾 Report written to [bold]{written['report']}[/bold]")
        if self.stop_requested:
            return EXIT_INTERRUPTED
        return report.exit_code

    def print_report(self, report: Report):
        table = Table(show_header=True, header_style="bold")
        table.add_column("Suite")
        table.add_column("Status")
        table.add_column("Checks", justify="right")
        table.add_column("Runtime", justify="right")
        table.add_column("Notes")
        for name in sorted(report.suites):
            suite = report.suites[name]
            passed = sum(1 for c in suite.checks if c.satisfied)
            if suite.status != "ok":
                status = "[red]error[/red]"
            elif suite.satisfied:
                status = "[green]satisfied[/green]"
            else:
                status = "[yellow]violated[/yellow]"
            notes = suite.error or "; ".join(suite.notes[:2])
            table.add_row(name, status, f"{passed}/{len(suite.checks)}", f"{suite.runtime:.1f}s", notes)
        style = "green" if report.satisfied else "red"
        self.console.print(Panel(table, title=f"{report.config.surface} report", border_style=style))
        for suite in report.suites.values():
            for check in suite.checks:
                if not check.satisfied:
                    self.console.print(f"  ❌ {suite.name}: {check.name}: {check.lhs:.6g} {check.relation} "
                                       f"{check.rhs:.6g} (tol {check.tolerance})")

    # -- compare ------------------------------------------------------------

    def compare_mode(self, args) -> int:
        try:
            first = load_report(Path(args.first))
            second = load_report(Path(args.second))
        except (OSError, ValueError) as e:
            self.console.print(f"❌ [red]Cannot read reports: {e}[/red]")
            return EXIT_CONFIG
        try:
            diff = compare_reports(first, second, args.tolerance)
        except ComparisonError as e:
            self.console.print(f"❌ [red]{e}[/red]")
            return EXIT_UNSATISFIED
        if not diff:
            self.console.print("✅ [green]Reports agree[/green]")
            return EXIT_OK
        table = Table(show_header=True, header_style="bold")
        table.add_column("Quantity")
        table.add_column("First", justify="right")
        table.add_column("Second", justify="right")
        table.add_column("Relative", justify="right")
        for key, entry in diff.items():
            table.add_row(key, f"{entry['first']:.6g}", f"{entry['second']:.6g}", f"{entry['relative']:.2%}")
        self.console.print(Panel(table, title=f"{len(diff)} differing quantities", border_style="yellow"))
        return EXIT_UNSATISFIED if args.fail_on_diff else EXIT_OK

    def run(self, args) -> int:
        """Main execution method"""
        self.setup_logging(getattr(args, "log_file", None), getattr(args, "verbose", False),
                           getattr(args, "quiet", False))
        if args.command == "compare":
            return self.compare_mode(args)
        return self.run_mode(args)


def _floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _t_grid(text: str) -> Dict[str, Any]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError("t grid is start,stop,num[,log|linear]")
    try:
        spec = {"start": float(parts[0]), "stop": float(parts[1]), "num": int(parts[2])}
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid t grid {text!r}")
    spec["spacing"] = parts[3] if len(parts) == 4 else "linear"
    return spec


def create_parser() -> argparse.ArgumentParser:
    """Create command-line argument parser"""
    parser = argparse.ArgumentParser(
        prog="tractlab",
        description="TractLab - numerical checks of growth, tract and projective-volume bounds on minimal surfaces",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Projective volume of the catenoid
  %(prog)s run --surface catenoid --suite projective_volume

  # All suites from a JSON document, overriding the surface
  %(prog)s run --config workflows/catenoid_full.json --surface plane -o results/plane

  # Grid-refinement regression
  %(prog)s compare results/coarse/report.json results/fine/report.json --tolerance 0.01
        """
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable debug output")
    parser.add_argument("--quiet", "-q", action="store_true", help="Warnings only, no progress bar")
    parser.add_argument("--log-file", "-l", help="Also write the log to this file")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run theorem suites")
    run.add_argument("--config", "-c", help="JSON run configuration")
    run.add_argument("--surface", "-s", help="Catalog surface (plane, catenoid, helicoid, enneper, graph)")
    run.add_argument("--profile", help="Graph profile (paraboloid, saddle)")
    run.add_argument("--alpha", "-a", type=float, help="Exponent alpha > 1")
    run.add_argument("--direction", "-e", type=_floats, help="Direction e, e.g. 1,0,0")
    run.add_argument("--grid", type=_ints, help="Parameter nodes nu,nv")
    run.add_argument("--radius", type=float, help="Truncation radius of the chart box")
    run.add_argument("--t-grid", type=_t_grid, help="Exhaustion levels start,stop,num[,log|linear]")
    run.add_argument("--tau-grid", type=_floats, help="Superlevel thresholds, e.g. 2,4,8")
    run.add_argument("--suite", action="append", choices=SUITES,
                     help="Suite to run (repeatable; default from config)")
    run.add_argument("--slab", type=float, help="Slab half-width a for hump counts")
    run.add_argument("--probe-tracts", type=int, help="N used by the tract-count bound")
    run.add_argument("--seed", type=int, help="Seed for randomized checks")
    run.add_argument("--threads", type=int, help="Worker threads (default TRACTLAB_THREADS)")
    run.add_argument("--output-dir", "-o", help="Output directory (default TRACTLAB_OUTPUT_DIR)")
    run.add_argument("--export-obj", action="store_true", help="Also write the sampled chart as OBJ")
    run.add_argument("--dry-run", action="store_true", help="Validate the configuration only")

    compare = subparsers.add_parser("compare", help="Compare two report.json files")
    compare.add_argument("first", help="First report.json")
    compare.add_argument("second", help="Second report.json")
    compare.add_argument("--tolerance", type=float, default=0.0,
                         help="Relative difference below which quantities count as equal")
    compare.add_argument("--fail-on-diff", action="store_true", help="Exit 1 when any quantity differs")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK

    if args.quiet and args.verbose:
        print("Error: --quiet and --verbose cannot be used together")
        return EXIT_CONFIG

    cli = TractLabCLI()
    try:
        return cli.run(args)
    except KeyboardInterrupt:
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
