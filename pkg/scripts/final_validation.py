#!/usr/bin/env python3
"""
TractLab 릴리스 전 검증 스크립트
"""

import importlib
import json
import subprocess
import sys
import tempfile
import time
from pathlib import Path
from typing import Any, Dict


class FinalValidator:
    """Pre-release validation of the TractLab tree"""

    REQUIRED_FILES = [
        'tractlab_base.py',
        'tractlab_geometry.py',
        'tractlab_levelset.py',
        'tractlab_spectra.py',
        'tractlab_energy.py',
        'tractlab_tracts.py',
        'tractlab_invariants.py',
        'tractlab_core.py',
        'tractlab_cli.py',
        'README.md',
    ]

    REQUIRED_DEPS = {
        'numpy': 'numpy',
        'scipy': 'scipy',
        'skimage': 'scikit-image',
        'rich': 'rich',
        'tqdm': 'tqdm',
        'tenacity': 'tenacity',
        'dotenv': 'python-dotenv',
    }

    OPTIONAL_DEPS = {
        'psutil': 'psutil',
        'pytest': 'pytest',
        'pytest_mock': 'pytest-mock',
    }

    def __init__(self):
        self.project_root = Path(__file__).parent.parent
        self.errors = []
        self.warnings = []
        self.info = []

        print("🚀 TractLab 최종 검증 시작")
        print(f"📁 프로젝트 경로: {self.project_root}")
        print("=" * 60)

    def validate_project_structure(self):
        print("📂 프로젝트 구조 검증 중...")
        for file_path in self.REQUIRED_FILES:
            full_path = self.project_root / file_path
            if not full_path.exists():
                self.errors.append(f"필수 파일 누락: {file_path}")
            elif full_path.stat().st_size == 0:
                self.errors.append(f"빈 파일: {file_path}")
            else:
                self.info.append(f"✓ {file_path} 존재 확인")
        for directory in ('tests', 'benchmarks', 'workflows'):
            if not (self.project_root / directory).exists():
                self.warnings.append(f"디렉토리 누락: {directory}")
        print("✅ 프로젝트 구조 검증 완료")

    def validate_dependencies(self):
        print("📦 의존성 검증 중...")
        for module, package in self.REQUIRED_DEPS.items():
            try:
                importlib.import_module(module)
                self.info.append(f"✓ {package} 사용 가능")
            except ImportError:
                self.errors.append(f"필수 의존성 누락: {package}")
        for module, package in self.OPTIONAL_DEPS.items():
            try:
                importlib.import_module(module)
                self.info.append(f"✓ {package} 사용 가능 (선택적)")
            except ImportError:
                self.warnings.append(f"선택적 의존성 누락: {package}")
        print("✅ 의존성 검증 완료")

    def validate_imports(self):
        print("🔧 모듈 임포트 검증 중...")
        old_path = sys.path[:]
        sys.path.insert(0, str(self.project_root))
        try:
            for file_path in self.REQUIRED_FILES:
                if not file_path.endswith('.py'):
                    continue
                module = file_path[:-3]
                try:
                    importlib.import_module(module)
                    self.info.append(f"✓ {module} 임포트 성공")
                except Exception as e:
                    self.errors.append(f"모듈 임포트 실패: {module} - {str(e)[:100]}")
        finally:
            sys.path = old_path
        print("✅ 모듈 임포트 검증 완료")

    def validate_workflows(self):
        """Every bundled workflow config must pass a dry run."""
        print("⚙️ 워크플로 설정 검증 중...")
        for config in sorted((self.project_root / 'workflows').glob('*.json')):
            result = subprocess.run([sys.executable, 'tractlab_cli.py', '-q', 'run', '--config', str(config),
                                     '--dry-run'], capture_output=True, text=True, cwd=self.project_root,
                                    timeout=120)
            if result.returncode == 0:
                self.info.append(f"✓ {config.name} 설정 유효")
            else:
                self.errors.append(f"설정 오류: {config.name} (exit {result.returncode})")
        print("✅ 워크플로 설정 검증 완료")

    def run_smoke_test(self):
        """A small end-to-end run must write report.json and agree with itself."""
        print("💨 스모크 테스트 실행 중...")
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / 'smoke'
            result = subprocess.run([sys.executable, 'tractlab_cli.py', '-q', 'run', '--surface', 'catenoid',
                                     '--suite', 'distortion', '--grid', '32,48', '-o', str(out)],
                                    capture_output=True, text=True, cwd=self.project_root, timeout=300)
            report = out / 'report.json'
            if result.returncode not in (0, 1) or not report.exists():
                self.errors.append(f"스모크 실행 실패 (exit {result.returncode}): {result.stderr[:200]}")
                return
            compare = subprocess.run([sys.executable, 'tractlab_cli.py', '-q', 'compare', str(report),
                                      str(report), '--fail-on-diff'], capture_output=True, text=True,
                                     cwd=self.project_root, timeout=60)
            if compare.returncode == 0:
                self.info.append("✓ 스모크 리포트 자기 비교 일치")
            else:
                self.errors.append("스모크 리포트 자기 비교 불일치")
        print("✅ 스모크 테스트 완료")

    def run_tests(self):
        print("🧪 테스트 실행 중...")
        try:
            result = subprocess.run([sys.executable, '-m', 'pytest', 'tests', '-q', '--tb=short'],
                                    capture_output=True, text=True, cwd=self.project_root, timeout=1800)
        except subprocess.TimeoutExpired:
            self.errors.append("테스트 타임아웃")
            return
        summary = result.stdout.strip().splitlines()[-1:] or ["(출력 없음)"]
        if result.returncode == 0:
            self.info.append(f"✓ 테스트 통과: {summary[0]}")
        else:
            self.errors.append(f"테스트 실패: {summary[0]}")
        print("✅ 테스트 실행 완료")

    def generate_report(self) -> Dict[str, Any]:
        return {
            'validation_status': 'PASS' if not self.errors else 'FAIL',
            'timestamp': time.strftime('%Y-%m-%d %H:%M:%S'),
            'project_root': str(self.project_root),
            'errors': self.errors,
            'warnings': self.warnings,
            'info': self.info,
            'summary': {
                'total_errors': len(self.errors),
                'total_warnings': len(self.warnings),
                'total_info': len(self.info),
            },
        }

    def run_validation(self) -> bool:
        validation_steps = [
            self.validate_project_structure,
            self.validate_dependencies,
            self.validate_imports,
            self.validate_workflows,
            self.run_smoke_test,
            self.run_tests,
        ]
        for step in validation_steps:
            try:
                step()
                print()
            except Exception as e:
                self.errors.append(f"검증 단계 실패: {step.__name__} - {str(e)}")
                print(f"❌ {step.__name__} 실패: {str(e)}\n")

        report = self.generate_report()
        print("=" * 60)
        print("📊 최종 검증 결과")
        print("=" * 60)
        if report['validation_status'] == 'PASS':
            print("🎉 검증 성공!")
        else:
            print("❌ 검증 실패! 다음 문제들을 해결하세요:")
            for error in self.errors:
                print(f"  🚨 {error}")
        if self.warnings:
            print(f"\n⚠️ 경고사항 ({len(self.warnings)}개):")
            for warning in self.warnings[:5]:
                print(f"  • {warning}")

        report_file = self.project_root / 'validation_report.json'
        with open(report_file, 'w', encoding='utf-8') as f:
            json.dump(report, f, indent=2, ensure_ascii=False)
        print(f"\n💾 상세 리포트 저장됨: {report_file}")
        return report['validation_status'] == 'PASS'


def main():
    validator = FinalValidator()
    sys.exit(0 if validator.run_validation() else 1)


if __name__ == "__main__":
    main()
