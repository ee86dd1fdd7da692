"""
工具模块
"""

from .logger import get_logger, setup_logger
from .file_utils import (
    ensure_dir, ensure_parent, get_file_size, get_file_hash,
    write_bytes_atomic, write_text_atomic
)
from .format_utils import (
    format_time, format_size, format_number, format_metric
)
from .device_utils import (
    get_cpu_info, get_memory_info, get_optimal_thread_count, resolve_thread_count
)

__all__ = [
    'get_logger',
    'setup_logger',
    'ensure_dir',
    'ensure_parent',
    'get_file_size',
    'get_file_hash',
    'write_bytes_atomic',
    'write_text_atomic',
    'format_time',
    'format_size',
    'format_number',
    'format_metric',
    'get_cpu_info',
    'get_memory_info',
    'get_optimal_thread_count',
    'resolve_thread_count',
]
