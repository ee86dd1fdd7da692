"""
立方体文件读写
功能：.hcube 二进制格式（小端、按波段顺序存储）的读写与校验

文件布局：
    8 字节魔数 "HCUBE\\0v1"
    u32 M, u32 N, u32 B, u32 数据类型（0 = float32, 1 = float64）
    u8 波长标志
    [B 个 float64 波长（微米）]
    M·N·B 个数值，按波段顺序，波段内行优先
"""

import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from models.hsi_cube import HsiCube
from utils.file_utils import write_bytes_atomic
from utils.logger import get_logger
from .exceptions import (
    BadMagicError, CubeFormatError, DimensionMismatchError,
    DimensionOverflowError, TruncatedPayloadError,
)

logger = get_logger(__name__)

MAGIC = b"HCUBE\x00v1"
HEADER = struct.Struct('<IIIIB')

DTYPE_CODES = {
    0: np.dtype('<f4'),
    1: np.dtype('<f8'),
}

# 单个文件允许的最大数值个数
MAX_VALUES = 1 << 36


def encode_cube(cube: HsiCube, dtype: str = 'float64') -> bytes:
    """
    将立方体编码为 .hcube 字节串

    Args:
        cube: 立方体
        dtype: 存储精度 float32 / float64

    Returns:
        字节串
    """
    code = {'float32': 0, 'float64': 1}.get(dtype)
    if code is None:
        raise CubeFormatError(f"不支持的存储精度: {dtype}")

    has_wavelengths = cube.wavelengths is not None
    parts = [
        MAGIC,
        HEADER.pack(cube.rows, cube.cols, cube.bands, code, 1 if has_wavelengths else 0),
    ]
    if has_wavelengths:
        parts.append(cube.wavelengths.astype('<f8').tobytes())

    # M×N×B -> B×M×N
    payload = np.ascontiguousarray(np.transpose(cube.data, (2, 0, 1)), dtype=DTYPE_CODES[code])
    parts.append(payload.tobytes())
    return b''.join(parts)


def decode_cube(raw: bytes, name: str = "") -> HsiCube:
    """
    解码 .hcube 字节串

    Raises:
        BadMagicError: 魔数错误
        TruncatedPayloadError: 文件头或数据被截断
        DimensionOverflowError: 维度为零或过大
        DimensionMismatchError: 数值个数与文件头维度不符
    """
    if len(raw) < len(MAGIC):
        raise TruncatedPayloadError(f"文件过短（{len(raw)} 字节）, 无法读取魔数")
    if raw[:len(MAGIC)] != MAGIC:
        raise BadMagicError(f"魔数错误: {raw[:len(MAGIC)]!r}, 期望 {MAGIC!r}")

    offset = len(MAGIC)
    if len(raw) < offset + HEADER.size:
        raise TruncatedPayloadError("文件头被截断")
    rows, cols, bands, code, flag = HEADER.unpack_from(raw, offset)
    offset += HEADER.size

    if code not in DTYPE_CODES:
        raise CubeFormatError(f"未知的数据类型编码: {code}")
    if flag not in (0, 1):
        raise CubeFormatError(f"波长标志非法: {flag}")
    if min(rows, cols, bands) == 0:
        raise DimensionOverflowError(f"维度不能为零: {rows}×{cols}×{bands}")
    expected = rows * cols * bands
    if expected > MAX_VALUES:
        raise DimensionOverflowError(f"维度过大: {rows}×{cols}×{bands}")

    wavelengths: Optional[np.ndarray] = None
    if flag:
        size = bands * 8
        if len(raw) < offset + size:
            raise TruncatedPayloadError("波长表被截断")
        wavelengths = np.frombuffer(raw, dtype='<f8', count=bands, offset=offset).astype(np.float64)
        offset += size

    dtype = DTYPE_CODES[code]
    payload = len(raw) - offset
    if payload % dtype.itemsize != 0:
        raise TruncatedPayloadError(
            f"数据被截断: 剩余 {payload} 字节不是 {dtype.itemsize} 字节的整数倍"
        )
    count = payload // dtype.itemsize
    if count != expected:
        raise DimensionMismatchError(
            f"文件头维度 {rows}×{cols}×{bands} 需要 {expected} 个数值, 实际 {count} 个"
        )

    values = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    data = values.reshape(bands, rows, cols).transpose(1, 2, 0).astype(np.float64)
    return HsiCube(data=data, wavelengths=wavelengths, name=name)


def save_cube(cube: HsiCube, path: Union[str, Path], dtype: str = 'float64'):
    """
    保存立方体

    Args:
        cube: 立方体
        path: 输出路径
        dtype: 存储精度
    """
    path = write_bytes_atomic(path, encode_cube(cube, dtype))
    logger.info(f"立方体已保存: {path} ({cube.rows}×{cube.cols}×{cube.bands}, {dtype})")


def load_cube(path: Union[str, Path]) -> HsiCube:
    """
    读取立方体

    Args:
        path: .hcube 文件路径

    Returns:
        立方体

    Raises:
        CubeFormatError: 文件格式错误（各子类区分具体原因）
        FileNotFoundError: 文件不存在
    """
    path = Path(path)
    cube = decode_cube(path.read_bytes(), name=path.stem)
    logger.info(f"立方体已读取: {path} ({cube.rows}×{cube.cols}×{cube.bands})")
    return cube
