"""
콘솔 출력 / 로깅

진행 상황은 rich Console 로, 경고와 오류는 RichHandler 가 붙은 logger 로 남깁니다.
"""

import logging
from typing import Iterable, Iterator, Optional, TypeVar

from rich.console import Console
from rich.logging import RichHandler
from tqdm import tqdm

T = TypeVar("T")

console = Console()

_LOGGER_ROOT = "navlab"
_configured = False


def get_logger(name: str, level: int = logging.INFO) -> logging.Logger:
    """
    RichHandler 가 설정된 logger 반환

    Args:
        name: logger 이름 (navlab 하위로 배치됨)
        level: 로그 레벨

    Returns:
        logging.Logger
    """
    global _configured
    root = logging.getLogger(_LOGGER_ROOT)
    if not _configured:
        handler = RichHandler(console=console, show_path=False, rich_tracebacks=True)
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        root.addHandler(handler)
        root.setLevel(level)
        root.propagate = False
        _configured = True

    if name.startswith(_LOGGER_ROOT):
        return logging.getLogger(name)
    return logging.getLogger(f"{_LOGGER_ROOT}.{name}")


def progress(
    iterable: Iterable[T],
    desc: str,
    total: Optional[int] = None,
    enabled: bool = True,
) -> Iterator[T]:
    """tqdm 진행 막대 (enabled=False 면 원본 iterable 그대로)"""
    if not enabled:
        return iter(iterable)
    return iter(tqdm(iterable, desc=desc, total=total, leave=False))


def print_success(message: str) -> None:
    console.print(f"[green]✓[/green] {message}")


def print_failure(message: str) -> None:
    console.print(f"[red]✗[/red] {message}")


def print_warning(message: str) -> None:
    console.print(f"[yellow]⚠[/yellow] {message}")


def progress_bar(total: int, desc: str, unit: str = "step", enabled: bool = True) -> tqdm:
    """수동 update 용 tqdm 막대 (enabled=False 면 비활성)"""
    return tqdm(total=total, desc=desc, unit=unit, leave=False, disable=not enabled)
