"""
Common utilities
"""

from .console import (
    console,
    get_logger,
    print_failure,
    print_success,
    print_warning,
    progress,
    progress_bar,
)
from .jsonl import (
    JsonlError,
    atomic_write_bytes,
    atomic_write_text,
    dumps_sorted,
    read_jsonl,
    write_jsonl,
)
from .metrics import MetricsLog, format_cell, read_metrics

__all__ = [
    "console",
    "get_logger",
    "progress",
    "progress_bar",
    "print_success",
    "print_failure",
    "print_warning",
    "JsonlError",
    "atomic_write_bytes",
    "atomic_write_text",
    "dumps_sorted",
    "read_jsonl",
    "write_jsonl",
    "MetricsLog",
    "format_cell",
    "read_metrics",
]
