"""
格式化工具
"""

import math
from typing import Union


def format_time(seconds: float, format: str = "HH:MM:SS") -> str:
    """
    格式化耗时

    Args:
        seconds: 秒数
        format: HH:MM:SS 或 verbose（如 "3分钟12.5秒"）

    Returns:
        格式化的时间字符串
    """
    hours, rest = divmod(max(0.0, float(seconds)), 3600)
    minutes, secs = divmod(rest, 60)

    if format == "HH:MM:SS":
        return f"{int(hours):02d}:{int(minutes):02d}:{int(secs):02d}"
    if format == "verbose":
        parts = []
        if hours:
            parts.append(f"{int(hours)}小时")
        if minutes:
            parts.append(f"{int(minutes)}分钟")
        if secs or not parts:
            parts.append(f"{secs:.1f}秒")
        return "".join(parts)
    raise ValueError(f"不支持的格式: {format}")


def format_size(num_bytes: int, precision: int = 1) -> str:
    """检查点 / 立方体文件大小（1024 进制）"""
    size = float(num_bytes)
    for unit in ('B', 'KB', 'MB', 'GB'):
        if size < 1024 or unit == 'GB':
            return f"{size:.{precision}f} {unit}"
        size /= 1024
    return f"{size:.{precision}f} GB"


def format_number(number: Union[int, float], precision: int = 2) -> str:
    """
    千位分隔的数字（参数量等），如 2,404,361
    """
    if isinstance(number, int) and not isinstance(number, bool):
        return f"{number:,}"
    return f"{number:,.{precision}f}"


def format_metric(value: float, precision: int = 4) -> str:
    """
    格式化评价指标，+inf 哨兵值输出为 inf
    """
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{precision}f}"
