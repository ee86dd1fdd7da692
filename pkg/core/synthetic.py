"""
合成场景生成
功能：由平滑随机端元光谱与平滑丰度图线性混合生成干净立方体
"""

from typing import Tuple

import numpy as np

from models.hsi_cube import HsiCube
from utils.logger import get_logger
from .exceptions import CubeError
from .hsi_pipeline import scale_to_unit

logger = get_logger(__name__)


def _smooth_spectrum(wavelengths: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """若干高斯吸收 / 反射峰叠加在线性基线上"""
    span = wavelengths[-1] - wavelengths[0] if len(wavelengths) > 1 else 1.0
    spectrum = rng.uniform(0.2, 0.6) + rng.uniform(-0.2, 0.2) * (wavelengths - wavelengths[0]) / span
    for _ in range(rng.integers(2, 5)):
        center = rng.uniform(wavelengths[0], wavelengths[-1])
        width = rng.uniform(0.08, 0.3) * span
        spectrum = spectrum + rng.uniform(-0.3, 0.3) * np.exp(-0.5 * ((wavelengths - center) / width) ** 2)
    return spectrum


def _smooth_field(rows: int, cols: int, rng: np.random.Generator, terms: int = 6) -> np.ndarray:
    """低频余弦叠加得到的平滑二维场"""
    y = np.arange(rows)[:, None] / rows
    x = np.arange(cols)[None, :] / cols
    field = np.zeros((rows, cols))
    for _ in range(terms):
        fy, fx = rng.uniform(0.2, 2.0, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        field += rng.normal() * np.cos(2 * np.pi * (fy * y + fx * x) + phase)
    return field


def make_synthetic_cube(rows: int = 32, cols: int = 32, bands: int = 16,
                        n_endmembers: int = 4, seed: int = 0,
                        wavelength_range: Tuple[float, float] = (0.4, 2.5)) -> HsiCube:
    """
    生成平滑的随机端元混合立方体（已缩放到 [0, 1]）

    Args:
        rows: 行数
        cols: 列数
        bands: 波段数
        n_endmembers: 端元数
        seed: 随机种子
        wavelength_range: 波长范围（微米）

    Returns:
        带波长元数据的立方体
    """
    if min(rows, cols, bands, n_endmembers) < 1:
        raise CubeError(f"合成立方体参数非法: {rows}×{cols}×{bands}, 端元 {n_endmembers}")

    rng = np.random.default_rng(seed)
    wavelengths = np.linspace(wavelength_range[0], wavelength_range[1], bands)

    spectra = np.stack([_smooth_spectrum(wavelengths, rng) for _ in range(n_endmembers)])
    logits = np.stack([_smooth_field(rows, cols, rng) for _ in range(n_endmembers)], axis=-1)
    logits = 2.0 * logits
    abundances = np.exp(logits - logits.max(axis=-1, keepdims=True))
    abundances /= abundances.sum(axis=-1, keepdims=True)

    data = abundances @ spectra
    cube = HsiCube(data=data, wavelengths=wavelengths, name=f"synthetic_{seed}")
    cube = scale_to_unit(cube)
    cube.metadata.update({'endmembers': n_endmembers, 'seed': seed})

    logger.info(f"合成立方体: {rows}×{cols}×{bands}, 端元 {n_endmembers}, seed={seed}")
    return cube
