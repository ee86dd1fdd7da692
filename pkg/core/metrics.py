"""
评价指标
功能：逐波段 PSNR / SSIM、逐像素 SAM 及其均值（MPSNR / MSSIM / SAM）
"""

import math
from typing import Optional, Tuple

import numpy as np
from skimage.metrics import peak_signal_noise_ratio, structural_similarity

from models.hsi_cube import HsiCube
from models.metric_report import MetricReport
from utils.logger import get_logger
from .exceptions import MetricError

logger = get_logger(__name__)

# SSIM 常数
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5

# PSNR 哨兵值（两波段完全相同）
PSNR_INF = math.inf


def _check_pair(a: np.ndarray, b: np.ndarray, what: str) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError(f"{what}: 形状不一致 {a.shape} vs {b.shape}")
    return a, b


def psnr(band: np.ndarray, ref: np.ndarray, peak: float = 1.0) -> float:
    """
    峰值信噪比 10·log10(peak² / MSE)

    Args:
        band: 待评价波段
        ref: 参考波段
        peak: 峰值（数据已缩放到 [0, 1] 时为 1）

    Returns:
        dB 值；MSE 为 0 时返回 +inf 哨兵
    """
    band, ref = _check_pair(band, ref, 'psnr')
    if np.array_equal(band, ref):
        return PSNR_INF
    return float(peak_signal_noise_ratio(ref, band, data_range=peak))


def ssim(band: np.ndarray, ref: np.ndarray, data_range: float = 1.0) -> float:
    """
    结构相似度（11×11 高斯窗，σ=1.5，K1=0.01，K2=0.03，总体协方差）

    Raises:
        MetricError: 形状不一致或尺寸小于窗口
    """
    band, ref = _check_pair(band, ref, 'ssim')
    if band.ndim != 2:
        raise MetricError(f"ssim: 需要二维波段, 当前形状 {band.shape}")
    if min(band.shape) < SSIM_WINDOW:
        raise MetricError(f"ssim: 波段尺寸 {band.shape} 小于窗口 {SSIM_WINDOW}×{SSIM_WINDOW}")
    return float(structural_similarity(band, ref, gaussian_weights=True, sigma=SSIM_SIGMA,
                                       use_sample_covariance=False, data_range=data_range))


def sam(cube: np.ndarray, ref: np.ndarray) -> Tuple[np.ndarray, float, int]:
    """
    光谱角

    Args:
        cube: M×N×B 待评价数据
        ref: M×N×B 参考数据

    Returns:
        (M×N 弧度角图, 均值, 零范数像素数)；零范数像素的角度记为 0
    """
    cube, ref = _check_pair(cube, ref, 'sam')
    if cube.ndim != 3:
        raise MetricError(f"sam: 需要 M×N×B 立方体, 当前形状 {cube.shape}")

    norm_a = np.linalg.norm(cube, axis=-1, keepdims=True)
    norm_b = np.linalg.norm(ref, axis=-1, keepdims=True)
    zero = (norm_a[..., 0] == 0) | (norm_b[..., 0] == 0)

    with np.errstate(invalid='ignore', divide='ignore'):
        unit_a = np.where(norm_a > 0, cube / norm_a, 0.0)
        unit_b = np.where(norm_b > 0, ref / norm_b, 0.0)

    # 与 arccos(clip(cos)) 等价，且在小角度时不损失精度
    angles = 2.0 * np.arctan2(np.linalg.norm(unit_a - unit_b, axis=-1),
                              np.linalg.norm(unit_a + unit_b, axis=-1))
    angles = np.where(zero, 0.0, angles)

    zero_count = int(zero.sum())
    if zero_count:
        logger.warning(f"SAM: {zero_count} 个像素的光谱范数为 0, 角度记为 0")
    return angles, float(angles.mean()), zero_count


def mean_psnr(per_band: np.ndarray) -> Tuple[float, int]:
    """
    排除 +inf 哨兵后的 MPSNR

    Returns:
        (MPSNR, 被排除的波段数)；全部为 +inf 时返回 +inf
    """
    per_band = np.asarray(per_band, dtype=np.float64)
    finite = np.isfinite(per_band)
    excluded = int((~finite).sum())
    if excluded:
        logger.warning(f"MPSNR: {excluded} 个波段与参考完全相同 (PSNR=+inf), 不参与平均")
    if not finite.any():
        return PSNR_INF, excluded
    return float(per_band[finite].mean()), excluded


def report(estimate: HsiCube, clean: HsiCube, peak: float = 1.0,
           wavelengths: Optional[np.ndarray] = None) -> MetricReport:
    """
    汇总三项指标

    Args:
        estimate: 含噪或去噪后的立方体
        clean: 干净参考立方体
        peak: PSNR 峰值
        wavelengths: 逐波段波长（默认取自两个立方体之一）

    Returns:
        指标报告

    Raises:
        MetricError: 尺寸不一致
    """
    if estimate.shape != clean.shape:
        raise MetricError(f"待评价立方体 {estimate.shape} 与参考立方体 {clean.shape} 尺寸不一致")

    bands = clean.bands
    per_band_psnr = np.array([psnr(estimate.band(b), clean.band(b), peak) for b in range(bands)])
    per_band_ssim = np.array([ssim(estimate.band(b), clean.band(b), peak) for b in range(bands)])
    sam_map, sam_mean, zero_count = sam(estimate.data, clean.data)
    mpsnr, infinite = mean_psnr(per_band_psnr)

    if wavelengths is None:
        wavelengths = clean.wavelengths if clean.wavelengths is not None else estimate.wavelengths

    result = MetricReport(
        per_band_psnr=per_band_psnr,
        per_band_ssim=per_band_ssim,
        sam_map=sam_map,
        mpsnr=mpsnr,
        mssim=float(per_band_ssim.mean()),
        sam_mean=sam_mean,
        wavelengths=None if wavelengths is None else np.asarray(wavelengths, dtype=np.float64),
        infinite_bands=infinite,
        zero_norm_pixels=zero_count,
        metadata={'estimate': estimate.name, 'reference': clean.name, 'peak': peak},
    )
    logger.info(f"评价完成 ({bands} 个波段): {result.summary_line()}")
    return result
