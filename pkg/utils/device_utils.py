"""
设备工具
"""

import platform
from typing import Dict, Optional

import psutil

from utils.logger import get_logger

logger = get_logger(__name__)


def get_cpu_info() -> Dict:
    """
    获取CPU信息

    Returns:
        CPU信息字典
    """
    return {
        'processor': platform.processor(),
        'architecture': platform.machine(),
        'cores_physical': psutil.cpu_count(logical=False),
        'cores_logical': psutil.cpu_count(logical=True),
    }


def get_memory_info() -> Dict:
    """
    获取内存信息

    Returns:
        内存信息字典
    """
    mem = psutil.virtual_memory()
    return {
        'total': mem.total,
        'available': mem.available,
        'percent': mem.percent,
    }


def get_optimal_thread_count() -> int:
    """
    获取默认工作线程数（物理核数，取不到时用逻辑核数）
    """
    cpu_count = psutil.cpu_count(logical=False) or psutil.cpu_count(logical=True) or 1
    return max(1, int(cpu_count))


def resolve_thread_count(requested: Optional[int]) -> int:
    """
    解析 --threads 参数

    Args:
        requested: 用户指定的线程数，0 或 None 表示自动

    Returns:
        实际使用的线程数（不超过逻辑核数）
    """
    logical = psutil.cpu_count(logical=True) or 1
    if not requested or requested <= 0:
        return get_optimal_thread_count()
    if requested > logical:
        logger.warning(f"请求的线程数 {requested} 超过逻辑核数 {logical}, 已截断")
        return logical
    return int(requested)
