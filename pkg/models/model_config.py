"""
网络结构配置模型
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Tuple

from core.exceptions import ModelConfigError


class Variant(str, Enum):
    """网络变体"""

    SMCNN = 'smcnn'
    WMCNN = 'wmcnn'
    SMCNNLITE = 'smcnnlite'

    @classmethod
    def parse(cls, value) -> 'Variant':
        if isinstance(value, Variant):
            return value
        text = str(value).strip().lower().replace('-', '').replace('_', '')
        try:
            return cls(text)
        except ValueError:
            raise ModelConfigError(f"未知的网络变体: {value}（可选 smcnn / wmcnn / smcnnlite）")

    @property
    def code(self) -> int:
        return list(Variant).index(self)

    @classmethod
    def from_code(cls, code: int) -> 'Variant':
        variants = list(Variant)
        if not 0 <= code < len(variants):
            raise ModelConfigError(f"未知的网络变体编码: {code}")
        return variants[code]


# 最多可用的跳连接数（输入分支、入口卷积、两个深层块）
MAX_SKIP_TAPS = 4


@dataclass
class ModelConfig:
    """网络结构配置"""

    K: int = 24
    C: int = 60
    n_ssmrb: int = 2
    skip_taps: int = 4
    skip_channels: int = 15
    branch_channels: int = 20
    modulation_channels: int = 128
    variant: Variant = Variant.SMCNN
    patch_size: int = 20
    kernel_sizes: Tuple[int, ...] = field(default=(3, 5, 7))

    def __post_init__(self):
        self.variant = Variant.parse(self.variant)
        self.kernel_sizes = tuple(int(k) for k in self.kernel_sizes)
        self.validate()

    def validate(self):
        """
        校验配置

        Raises:
            ModelConfigError: 配置非法
        """
        if self.K < 2 or self.K % 2 != 0:
            raise ModelConfigError(f"K 必须为正偶数, 当前 {self.K}")
        for key in ('C', 'n_ssmrb', 'skip_channels', 'branch_channels',
                    'modulation_channels', 'patch_size'):
            if getattr(self, key) < 1:
                raise ModelConfigError(f"{key} 必须为正整数, 当前 {getattr(self, key)}")
        if not 1 <= self.skip_taps <= MAX_SKIP_TAPS:
            raise ModelConfigError(f"skip_taps 必须位于 [1, {MAX_SKIP_TAPS}], 当前 {self.skip_taps}")
        if not self.kernel_sizes or any(k < 1 or k % 2 == 0 for k in self.kernel_sizes):
            raise ModelConfigError(f"kernel_sizes 必须为奇数, 当前 {self.kernel_sizes}")

    @property
    def ssmrb_count(self) -> int:
        """实际的 SSMRB 数量（Lite 变体固定为 1）"""
        return 1 if self.variant == Variant.SMCNNLITE else self.n_ssmrb

    @property
    def available_taps(self) -> int:
        return 2 + self.ssmrb_count

    @property
    def tap_count(self) -> int:
        """实际使用的跳连接数（保留最后 skip_taps 个）"""
        return min(self.skip_taps, self.available_taps)

    @property
    def modulation_bands(self) -> int:
        """调制输入的通道数"""
        return 1 if self.variant == Variant.WMCNN else self.K

    def spectral_depth(self, kernel: int) -> int:
        """3D 分支在光谱维上的卷积核长度"""
        return min(kernel, self.K)

    def to_dict(self) -> Dict:
        """转换为字典"""
        return {
            'variant': self.variant.value,
            'K': self.K,
            'C': self.C,
            'n_ssmrb': self.n_ssmrb,
            'skip_taps': self.skip_taps,
            'skip_channels': self.skip_channels,
            'branch_channels': self.branch_channels,
            'modulation_channels': self.modulation_channels,
            'patch_size': self.patch_size,
            'kernel_sizes': list(self.kernel_sizes),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ModelConfig':
        """从字典创建"""
        return cls(
            K=int(data.get('K', 24)),
            C=int(data.get('C', 60)),
            n_ssmrb=int(data.get('n_ssmrb', 2)),
            skip_taps=int(data.get('skip_taps', 4)),
            skip_channels=int(data.get('skip_channels', 15)),
            branch_channels=int(data.get('branch_channels', 20)),
            modulation_channels=int(data.get('modulation_channels', 128)),
            variant=data.get('variant', Variant.SMCNN),
            patch_size=int(data.get('patch_size', 20)),
            kernel_sizes=tuple(data.get('kernel_sizes', (3, 5, 7))),
        )
