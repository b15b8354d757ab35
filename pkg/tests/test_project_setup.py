"""
프로젝트 설정 검증 테스트

프로젝트 구조, 매니페스트, 예제 설정, 기본 import 등을 테스트합니다.
"""

import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent.parent
PACKAGES = [
    "common",
    "common.config",
    "common.models",
    "common.utils",
    "navlab",
    "navlab.autodiff",
    "navlab.gridnav",
    "navlab.demos",
    "navlab.policy",
    "navlab.bc",
    "navlab.ppo",
    "navlab.rollout",
    "navlab.evaluation",
    "navlab.harness",
    "navlab.cli",
]


def test_project_structure():
    """프로젝트 디렉토리 구조가 올바른지 검증"""
    required_dirs = ["src", "tests", "tests/navlab", "data/configs"] + [
        "src/" + name.replace(".", "/") for name in PACKAGES
    ]

    for dir_path in required_dirs:
        full_path = PROJECT_ROOT / dir_path
        assert full_path.is_dir(), f"디렉토리가 존재하지 않음: {dir_path}"


def test_init_files():
    """__init__.py 파일들이 존재하는지 확인"""
    for name in PACKAGES:
        init_file = PROJECT_ROOT / "src" / name.replace(".", "/") / "__init__.py"
        assert init_file.exists(), f"__init__.py가 없음: {name}"


def test_pyproject_toml():
    """pyproject.toml의 기본 구조 확인"""
    content = (PROJECT_ROOT / "pyproject.toml").read_text(encoding="utf-8")

    # 필수 섹션 확인
    assert "[tool.poetry]" in content, "[tool.poetry] 섹션 없음"
    assert "[tool.poetry.dependencies]" in content, "[tool.poetry.dependencies] 섹션 없음"
    assert "[tool.poetry.group.dev.dependencies]" in content, "dev dependencies 섹션 없음"
    assert 'navlab = "navlab.cli.main:cli"' in content, "CLI 엔트리포인트 없음"

    # 핵심 의존성 확인
    for dep in ["numpy", "scipy", "pydantic", "click", "rich", "tqdm", "diskcache"]:
        assert dep in content, f"{dep} 의존성 없음"

    # 개발 도구 확인
    for tool in ["black", "mypy", "pytest"]:
        assert tool in content, f"{tool} 없음"


def test_example_config_loads():
    """data/configs 의 예제 설정이 검증을 통과하는지 확인"""
    sys.path.insert(0, str(PROJECT_ROOT / "src"))
    from common.config import load_config

    configs = sorted((PROJECT_ROOT / "data" / "configs").glob("*.json"))
    assert configs, "예제 설정 없음"
    for path in configs:
        config = load_config(path)
        sizes = config.harness.hd_scaling_steps
        assert sizes == sorted(sizes), f"{path.name}: scaling 크기가 증가 순이 아님"


def test_basic_imports():
    """기본 패키지 import 테스트"""
    src_path = PROJECT_ROOT / "src"
    if str(src_path) not in sys.path:
        sys.path.insert(0, str(src_path))

    import importlib

    for name in PACKAGES:
        try:
            importlib.import_module(name)
        except ImportError as e:
            assert False, f"모듈 import 실패: {name} ({e})"


if __name__ == "__main__":
    # 간단한 테스트 러너
    import traceback

    tests = [
        test_project_structure,
        test_init_files,
        test_pyproject_toml,
        test_example_config_loads,
        test_basic_imports,
    ]

    passed = 0
    failed = 0

    for test_func in tests:
        try:
            test_func()
            print(f"✓ {test_func.__name__}")
            passed += 1
        except AssertionError as e:
            print(f"✗ {test_func.__name__}: {e}")
            failed += 1
        except Exception as e:
            print(f"✗ {test_func.__name__}: {e}")
            traceback.print_exc()
            failed += 1

    print(f"\n총 {passed + failed}개 테스트 중 {passed}개 성공, {failed}개 실패")
    sys.exit(0 if failed == 0 else 1)
