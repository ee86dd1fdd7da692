"""
评价指标报告模型
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pandas as pd

from utils.file_utils import ensure_parent

# CSV 头部注释
SAM_UNIT_NOTE = "# sam unit: radians"


@dataclass
class MetricReport:
    """逐波段 PSNR/SSIM、逐像素 SAM 及其均值"""

    per_band_psnr: np.ndarray
    per_band_ssim: np.ndarray
    sam_map: np.ndarray
    mpsnr: float
    mssim: float
    sam_mean: float

    wavelengths: Optional[np.ndarray] = None
    infinite_bands: int = 0
    zero_norm_pixels: int = 0

    metadata: Dict = field(default_factory=dict)

    @property
    def bands(self) -> int:
        return int(self.per_band_psnr.shape[0])

    def to_frame(self) -> pd.DataFrame:
        """逐波段曲线"""
        wavelengths = (self.wavelengths if self.wavelengths is not None
                       else np.full(self.bands, np.nan))
        return pd.DataFrame({
            'band_index': np.arange(self.bands),
            'wavelength_um': wavelengths,
            'psnr_db': self.per_band_psnr,
            'ssim': self.per_band_ssim,
        })

    def save_csv(self, path: str):
        """写入逐波段 CSV（首行注明 SAM 单位）"""
        ensure_parent(path)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(SAM_UNIT_NOTE + "\n")
            self.to_frame().to_csv(f, index=False, float_format='%.10g')

    def summary_row(self) -> Dict:
        return {
            'mpsnr': self.mpsnr,
            'mssim': self.mssim,
            'sam_mean': self.sam_mean,
        }

    def save_summary(self, path: str):
        ensure_parent(path)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(SAM_UNIT_NOTE + "\n")
            pd.DataFrame([self.summary_row()]).to_csv(f, index=False, float_format='%.10g')

    def summary_line(self) -> str:
        """汇总行: MPSNR / MSSIM / SAM"""
        mpsnr = 'inf' if math.isinf(self.mpsnr) else f"{self.mpsnr:.3f}"
        return f"MPSNR={mpsnr} MSSIM={self.mssim:.4f} SAM={self.sam_mean:.4f}"

    def to_dict(self) -> Dict:
        """转换为字典"""
        return {
            'bands': self.bands,
            'mpsnr': self.mpsnr,
            'mssim': self.mssim,
            'sam_mean': self.sam_mean,
            'infinite_bands': self.infinite_bands,
            'zero_norm_pixels': self.zero_norm_pixels,
            'per_band_psnr': self.per_band_psnr.tolist(),
            'per_band_ssim': self.per_band_ssim.tolist(),
            'metadata': self.metadata,
        }
