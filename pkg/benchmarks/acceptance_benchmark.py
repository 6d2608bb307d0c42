#!/usr/bin/env python3
"""
Acceptance benchmark for TractLab suites
Times the reference runs on the surface catalog and samples memory use
"""

import gc
import json
import os
import statistics
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Tuple

import psutil

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from tractlab_core import RunConfig, SuiteRunner  # noqa: E402

# (label, config overrides) of the reference runs
ACCEPTANCE_RUNS: List[Tuple[str, Dict[str, Any]]] = [
    ("catenoid projective volume", {"surface": "catenoid", "suites": ["projective_volume"]}),
    ("plane bernstein", {"surface": "plane", "suites": ["bernstein"]}),
    ("enneper bernstein", {"surface": "enneper", "suites": ["bernstein"]}),
    ("catenoid humps", {"surface": "catenoid", "suites": ["humps"], "radius": 20.0}),
    ("catenoid index", {"surface": "catenoid", "suites": ["index"]}),
    ("catenoid tubular", {"surface": "catenoid", "suites": ["tubular"], "radius": 3000.0,
                          "exhaustion": "axis", "grid": [128, 400],
                          "t_grid": {"start": 1.0, "stop": 8.0, "num": 15, "spacing": "linear"}}),
]


class AcceptanceBenchmark:
    """Wall-clock and memory profile of the acceptance runs"""

    def __init__(self, threads: int = 1):
        self.process = psutil.Process(os.getpid())
        self.threads = threads
        self.results: Dict[str, Any] = {}

    def _memory_mb(self) -> float:
        return self.process.memory_info().rss / 1024 / 1024

    def benchmark_runs(self, repeats: int = 1) -> Dict[str, Any]:
        """Run each acceptance configuration ``repeats`` times."""
        print("🧮 수용 실행 벤치마크 중...")

        runs = {}
        for label, overrides in ACCEPTANCE_RUNS:
            config = RunConfig(**overrides)
            times = []
            memory_increase = 0.0
            satisfied = True
            for _ in range(repeats):
                gc.collect()
                before = self._memory_mb()
                start = time.perf_counter()
                report = SuiteRunner(config, self.threads).run_suite()
                times.append(time.perf_counter() - start)
                memory_increase = max(memory_increase, self._memory_mb() - before)
                satisfied = satisfied and report.satisfied
            runs[label] = {
                "mean_time": statistics.mean(times),
                "min_time": min(times),
                "max_time": max(times),
                "std_time": statistics.stdev(times) if len(times) > 1 else 0.0,
                "memory_increase": memory_increase,
                "satisfied": satisfied,
            }
            print(f"  {label}: {runs[label]['mean_time']:.2f}s, "
                  f"+{memory_increase:.1f}MB, {'✅' if satisfied else '❌'}")

        self.results["acceptance_runs"] = runs
        return runs

    def benchmark_threads(self, thread_counts: List[int]) -> Dict[str, Any]:
        """Scaling of a multi-suite run with the worker count."""
        print("⚡ 스레드 확장성 벤치마크 중...")

        config = RunConfig(surface="catenoid", suites=["projective_volume", "humps", "index", "distortion"])
        scaling = {}
        for threads in thread_counts:
            start = time.perf_counter()
            SuiteRunner(config, threads).run_suite()
            elapsed = time.perf_counter() - start
            scaling[f"{threads}_threads"] = {"time": elapsed, "suites_per_second": len(config.suites) / elapsed}
            print(f"  {threads} threads: {elapsed:.2f}s")

        self.results["thread_scaling"] = scaling
        return scaling

    def generate_report(self) -> str:
        lines = ["# TractLab 수용 벤치마크", "",
                 f"**실행 시간**: {time.strftime('%Y-%m-%d %H:%M:%S')}",
                 f"**CPU**: {psutil.cpu_count()} cores",
                 f"**메모리**: {psutil.virtual_memory().total / 1024 ** 3:.1f}GB", ""]
        if "acceptance_runs" in self.results:
            lines += ["## 수용 실행", "", "| 실행 | 평균 시간 (s) | 메모리 증가 (MB) | 만족 |",
                      "|------|---------------|------------------|------|"]
            for label, metrics in self.results["acceptance_runs"].items():
                lines.append(f"| {label} | {metrics['mean_time']:.2f} | {metrics['memory_increase']:.1f} | "
                             f"{'예' if metrics['satisfied'] else '아니오'} |")
            lines.append("")
        if "thread_scaling" in self.results:
            lines += ["## 스레드 확장성", "", "| 설정 | 시간 (s) | 스위트/초 |", "|------|----------|-----------|"]
            for key, metrics in self.results["thread_scaling"].items():
                lines.append(f"| {key} | {metrics['time']:.2f} | {metrics['suites_per_second']:.2f} |")
            lines.append("")
        return "\n".join(lines)

    def save_results(self, filepath: Path):
        """Save benchmark results to JSON file"""
        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(self.results, f, indent=2, ensure_ascii=False)


def main():
    """Run the acceptance benchmark"""
    print("🚀 TractLab 수용 벤치마크 시작\n")

    benchmark = AcceptanceBenchmark()
    benchmark.benchmark_runs()
    benchmark.benchmark_threads([1, 2, 4])

    report = benchmark.generate_report()
    print("\n" + "=" * 60)
    print(report)

    results_dir = Path(__file__).parent.parent / "benchmark_results"
    results_dir.mkdir(exist_ok=True)
    timestamp = time.strftime('%Y%m%d_%H%M%S')
    report_file = results_dir / f"acceptance_report_{timestamp}.md"
    results_file = results_dir / f"acceptance_results_{timestamp}.json"
    with open(report_file, 'w', encoding='utf-8') as f:
        f.write(report)
    benchmark.save_results(results_file)

    print("\n💾 결과 저장됨:")
    print(f"  리포트: {report_file}")
    print(f"  데이터: {results_file}")

    failed = [label for label, m in benchmark.results["acceptance_runs"].items() if not m["satisfied"]]
    return 1 if failed else 0


if __name__ == '__main__':
    sys.exit(main())
