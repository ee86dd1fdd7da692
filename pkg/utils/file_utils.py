"""
文件工具
"""

import hashlib
import os
import tempfile
from pathlib import Path
from typing import Union

from utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]


def ensure_dir(path: PathLike) -> Path:
    """
    确保目录存在

    Args:
        path: 目录路径

    Returns:
        Path对象
    """
    dir_path = Path(path)
    dir_path.mkdir(parents=True, exist_ok=True)
    return dir_path


def ensure_parent(path: PathLike) -> Path:
    """确保文件所在目录存在，返回文件 Path"""
    file_path = Path(path)
    if file_path.parent and str(file_path.parent) not in ('', '.'):
        ensure_dir(file_path.parent)
    return file_path


def get_file_size(file_path: PathLike) -> int:
    """
    获取文件大小（字节）
    """
    return os.path.getsize(file_path)


def get_file_hash(file_path: PathLike, algorithm: str = 'sha256') -> str:
    """
    计算文件哈希值

    Args:
        file_path: 文件路径
        algorithm: 哈希算法 (md5, sha1, sha256)

    Returns:
        哈希值
    """
    if algorithm not in ('md5', 'sha1', 'sha256'):
        raise ValueError(f"不支持的哈希算法: {algorithm}")
    hasher = hashlib.new(algorithm)

    with open(file_path, 'rb') as f:
        while chunk := f.read(8192):
            hasher.update(chunk)

    return hasher.hexdigest()


def write_bytes_atomic(path: PathLike, data: bytes) -> Path:
    """
    先写入同目录临时文件再替换，避免中断时留下半截文件

    Args:
        path: 目标路径
        data: 文件内容

    Returns:
        目标 Path
    """
    target = ensure_parent(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=str(target.parent))
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp, target)
    except Exception:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    logger.debug(f"写入文件: {target} ({len(data)} 字节)")
    return target


def write_text_atomic(path: PathLike, text: str) -> Path:
    """以 UTF-8 原子写入文本"""
    return write_bytes_atomic(path, text.encode('utf-8'))
