"""
高光谱立方体模型
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from core.exceptions import CubeError


@dataclass
class HsiCube:
    """
    高光谱立方体 M×N×B

    data 以 (行, 列, 波段) 存储，载入后只读；wavelengths 单位为微米。
    """

    data: np.ndarray
    wavelengths: Optional[np.ndarray] = None

    # 元数据
    name: str = ""
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise CubeError(f"立方体必须为 M×N×B 三维数组, 当前形状 {data.shape}")
        if not np.all(np.isfinite(data)):
            raise CubeError("立方体包含非有限值 (NaN / inf)")
        data.flags.writeable = False
        self.data = data

        if self.wavelengths is not None:
            wavelengths = np.array(self.wavelengths, dtype=np.float64).reshape(-1)
            if wavelengths.shape[0] != data.shape[2]:
                raise CubeError(
                    f"波长数量 {wavelengths.shape[0]} 与波段数 {data.shape[2]} 不一致"
                )
            if wavelengths.shape[0] > 1 and not np.all(np.diff(wavelengths) > 0):
                raise CubeError("波长必须严格递增")
            wavelengths.flags.writeable = False
            self.wavelengths = wavelengths

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def band(self, index: int) -> np.ndarray:
        """第 index 个波段 (M×N)"""
        if not 0 <= index < self.bands:
            raise CubeError(f"波段索引 {index} 超出范围 [0, {self.bands})")
        return self.data[:, :, index]

    def wavelength(self, index: int) -> Optional[float]:
        if self.wavelengths is None:
            return None
        return float(self.wavelengths[index])

    def with_data(self, data: np.ndarray, name: Optional[str] = None) -> 'HsiCube':
        """同一波长元数据下的新立方体"""
        return HsiCube(
            data=data,
            wavelengths=self.wavelengths,
            name=self.name if name is None else name,
            metadata=dict(self.metadata),
        )

    def select_bands(self, indices: Sequence[int]) -> 'HsiCube':
        indices = list(indices)
        return HsiCube(
            data=self.data[:, :, indices],
            wavelengths=None if self.wavelengths is None else self.wavelengths[indices],
            name=self.name,
            metadata=dict(self.metadata),
        )

    def crop(self, rows: slice, cols: slice) -> 'HsiCube':
        """空间裁剪（保留全部波段）"""
        return self.with_data(self.data[rows, cols, :])

    def equals(self, other: 'HsiCube') -> bool:
        """数据与波长逐位相等"""
        if self.shape != other.shape or not np.array_equal(self.data, other.data):
            return False
        if (self.wavelengths is None) != (other.wavelengths is None):
            return False
        return self.wavelengths is None or np.array_equal(self.wavelengths, other.wavelengths)

    def to_dict(self) -> Dict:
        """转换为字典（摘要，不含数据）"""
        return {
            'name': self.name,
            'rows': self.rows,
            'cols': self.cols,
            'bands': self.bands,
            'min': float(self.data.min()),
            'max': float(self.data.max()),
            'has_wavelengths': self.wavelengths is not None,
            'metadata': self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'HsiCube':
        """从字典创建（需包含 data 数组）"""
        return cls(
            data=np.asarray(data['data']),
            wavelengths=data.get('wavelengths'),
            name=data.get('name', ''),
            metadata=data.get('metadata', {}),
        )
