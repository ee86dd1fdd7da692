"""
模型检查点读写
功能：SMCKPT1 二进制格式（小端）

布局：
    魔数 b"SMCKPT1\\x00"
    配置块 <8×u32 + u8>: K, C, n_ssmrb, skip_taps, skip_channels,
                       branch_channels, modulation_channels, patch_size, 变体编码
    u32 卷积核尺寸个数，随后每个 u32
    u32 参数个数，随后逐个参数记录：
        u32 名称长度, UTF-8 名称, u32 维数, 每维 u32 尺寸, float32 数据
"""

import struct
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from models.model_config import ModelConfig, Variant
from utils.file_utils import get_file_size, write_bytes_atomic
from utils.format_utils import format_number, format_size
from utils.logger import get_logger
from .exceptions import CheckpointError, ModelConfigError
from .sm_cnn import SMCNN, layout
from .tensor import Tensor

logger = get_logger(__name__)

MAGIC = b"SMCKPT1\x00"
CONFIG_FIELDS = ('K', 'C', 'n_ssmrb', 'skip_taps', 'skip_channels',
                 'branch_channels', 'modulation_channels', 'patch_size')
CONFIG_BLOCK = struct.Struct('<' + 'I' * len(CONFIG_FIELDS) + 'B')
U32 = struct.Struct('<I')
PARAM_DTYPE = '<f4'


class _Reader:
    """带越界检查的顺序读取器"""

    def __init__(self, raw: bytes):
        self.raw = raw
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.raw):
            raise CheckpointError(
                f"检查点被截断: 读取 {what} 需要 {size} 字节, 剩余 {len(self.raw) - self.offset}"
            )
        chunk = self.raw[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self, what: str) -> int:
        return U32.unpack(self.take(U32.size, what))[0]


def encode_checkpoint(model: SMCNN) -> bytes:
    """
    序列化模型

    Args:
        model: 模型

    Returns:
        SMCKPT1 字节串
    """
    cfg = model.config
    parts = [MAGIC, CONFIG_BLOCK.pack(*(getattr(cfg, f) for f in CONFIG_FIELDS), cfg.variant.code)]
    parts.append(U32.pack(len(cfg.kernel_sizes)))
    parts.extend(U32.pack(k) for k in cfg.kernel_sizes)
    parts.append(U32.pack(len(model.params)))

    for name, param in model.named_parameters():
        encoded = name.encode('utf-8')
        parts.append(U32.pack(len(encoded)))
        parts.append(encoded)
        parts.append(U32.pack(param.ndim))
        parts.extend(U32.pack(d) for d in param.shape)
        parts.append(np.ascontiguousarray(param.data, dtype=PARAM_DTYPE).tobytes())

    return b"".join(parts)


def quantize_state(state: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """按检查点存储精度（float32）取整后的参数副本，仍以 float64 保存"""
    return OrderedDict(
        (name, np.asarray(value, dtype=PARAM_DTYPE).astype(np.float64)) for name, value in state.items()
    )


def _decode_config(reader: _Reader) -> ModelConfig:
    values = CONFIG_BLOCK.unpack(reader.take(CONFIG_BLOCK.size, "配置块"))
    fields = dict(zip(CONFIG_FIELDS, values[:-1]))
    try:
        fields['variant'] = Variant.from_code(values[-1])
    except ModelConfigError as e:
        raise CheckpointError(f"配置字段 variant 非法: {e}")

    count = reader.u32("卷积核尺寸个数")
    if count == 0 or count > 16:
        raise CheckpointError(f"配置字段 kernel_sizes 个数非法: {count}")
    fields['kernel_sizes'] = tuple(reader.u32(f"kernel_sizes[{i}]") for i in range(count))

    try:
        return ModelConfig(**fields)
    except ModelConfigError as e:
        raise CheckpointError(f"检查点中的配置非法: {e}")


def decode_checkpoint(raw: bytes) -> SMCNN:
    """
    反序列化模型

    Raises:
        CheckpointError: 魔数、配置或参数记录非法（指明出错字段 / 参数）
    """
    if raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"检查点魔数错误: {raw[:len(MAGIC)]!r}")

    reader = _Reader(raw)
    reader.take(len(MAGIC), "魔数")
    cfg = _decode_config(reader)

    expected: Dict[str, Tuple[int, ...]] = OrderedDict((s.name, s.shape) for s in layout(cfg))
    count = reader.u32("参数个数")
    if count != len(expected):
        raise CheckpointError(f"参数个数 {count} 与配置要求的 {len(expected)} 不符")

    itemsize = np.dtype(PARAM_DTYPE).itemsize
    params: Dict[str, Tensor] = OrderedDict()
    for index in range(count):
        length = reader.u32(f"第 {index} 个参数的名称长度")
        try:
            name = reader.take(length, f"第 {index} 个参数的名称").decode('utf-8')
        except UnicodeDecodeError:
            raise CheckpointError(f"第 {index} 个参数的名称不是合法 UTF-8")
        if name not in expected:
            raise CheckpointError(f"检查点包含未知参数 {name}")
        if name in params:
            raise CheckpointError(f"参数 {name} 重复出现")

        rank = reader.u32(f"参数 {name} 的维数")
        if rank > 8:
            raise CheckpointError(f"参数 {name} 的维数 {rank} 非法")
        shape = tuple(reader.u32(f"参数 {name} 的尺寸") for _ in range(rank))
        if shape != expected[name]:
            raise CheckpointError(f"参数 {name} 形状 {shape} 与配置要求 {expected[name]} 不符")

        size = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(reader.take(size * itemsize, f"参数 {name} 的数据"), dtype=PARAM_DTYPE)
        params[name] = Tensor(data.reshape(shape).astype(np.float64), requires_grad=True, name=name)

    if reader.offset != len(raw):
        raise CheckpointError(f"检查点末尾存在 {len(raw) - reader.offset} 字节多余数据")

    # 按布局顺序排列
    ordered = OrderedDict((name, params[name]) for name in expected)
    return SMCNN(cfg, ordered)


def save_checkpoint(model: SMCNN, path: Union[str, Path]) -> Path:
    """
    保存检查点

    Args:
        model: 模型
        path: 输出路径

    Returns:
        写入的路径
    """
    target = write_bytes_atomic(path, encode_checkpoint(model))
    logger.info(
        f"检查点已保存: {target} ({model.config.variant.value}, "
        f"{format_number(model.count_params())} 个参数, {format_size(get_file_size(target))})"
    )
    return target


def load_checkpoint(path: Union[str, Path]) -> SMCNN:
    """
    读取检查点

    Raises:
        CheckpointError: 格式错误
        FileNotFoundError: 文件不存在
    """
    path = Path(path)
    model = decode_checkpoint(path.read_bytes())
    logger.info(
        f"检查点已读取: {path} (variant={model.config.variant.value}, "
        f"K={model.config.K}, C={model.config.C})"
    )
    return model
