"""
训练样本模型
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np


@dataclass
class PatchSample:
    """单个训练样本 {(y_s, y_λ), x_s}"""

    y_s: np.ndarray
    y_lambda: np.ndarray
    x_s: np.ndarray
    band_index: int
    patch_origin: Tuple[int, int]
    rotation: int = 0

    # 目标波段的波长（微米），WM-CNN 调制使用
    wavelength_um: Optional[float] = None

    @property
    def patch_size(self) -> int:
        return self.y_s.shape[0]

    def to_dict(self) -> Dict:
        """转换为字典（不含数组）"""
        return {
            'band_index': self.band_index,
            'patch_origin': list(self.patch_origin),
            'rotation': self.rotation,
            'patch_size': self.patch_size,
            'window': self.y_lambda.shape[-1],
            'wavelength_um': self.wavelength_um,
        }


@dataclass
class SampleBatch:
    """堆叠后的样本批次"""

    y_s: np.ndarray           # S×h×w
    y_lambda: np.ndarray      # S×h×w×K
    x_s: np.ndarray           # S×h×w
    band_index: np.ndarray    # S
    wavelength_um: Optional[np.ndarray] = None

    metadata: Dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.y_s.shape[0]

    def take(self, indices) -> 'SampleBatch':
        """按索引取子批次"""
        return SampleBatch(
            y_s=self.y_s[indices],
            y_lambda=self.y_lambda[indices],
            x_s=self.x_s[indices],
            band_index=self.band_index[indices],
            wavelength_um=None if self.wavelength_um is None else self.wavelength_um[indices],
            metadata=self.metadata,
        )

    @classmethod
    def stack(cls, samples: List[PatchSample]) -> 'SampleBatch':
        """将样本列表堆叠为批次"""
        wavelengths = [s.wavelength_um for s in samples]
        return cls(
            y_s=np.stack([s.y_s for s in samples]),
            y_lambda=np.stack([s.y_lambda for s in samples]),
            x_s=np.stack([s.x_s for s in samples]),
            band_index=np.array([s.band_index for s in samples], dtype=np.int64),
            wavelength_um=None if any(w is None for w in wavelengths)
            else np.array(wavelengths, dtype=np.float64),
        )
