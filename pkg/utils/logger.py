"""
日志工具
"""

import sys
from pathlib import Path
from typing import Optional
from loguru import logger
import config


def setup_logger(level: Optional[str] = None,
                 log_file: Optional[str] = None,
                 to_file: Optional[bool] = None):
    """
    设置日志系统

    Args:
        level: 日志级别（默认使用config.LOG_LEVEL）
        log_file: 日志文件路径（默认使用config.LOG_FILE）
        to_file: 是否写入文件（默认使用config.LOG_TO_FILE）
    """
    level = level or config.LOG_LEVEL
    log_file = log_file or config.LOG_FILE
    to_file = config.LOG_TO_FILE if to_file is None else to_file

    # 移除已有处理器
    logger.remove()
    logger.configure(extra={'name': 'smcnn'})

    # 控制台输出
    logger.add(
        sys.stderr,
        format=config.LOG_FORMAT,
        level=level,
        colorize=True
    )

    # 文件输出
    if to_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            log_file,
            format=config.LOG_FORMAT,
            level=level,
            rotation=f"{config.LOG_MAX_SIZE} MB",
            retention=config.LOG_BACKUP_COUNT,
            compression="zip",
            encoding="utf-8"
        )

    logger.debug(f"日志系统初始化完成: level={level}")


def get_logger(name: str = None):
    """
    获取日志记录器

    Args:
        name: 模块名称

    Returns:
        日志记录器
    """
    if name:
        return logger.bind(name=name)
    return logger


# 初始化日志系统
setup_logger()
