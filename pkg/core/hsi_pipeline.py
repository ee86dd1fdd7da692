"""
高光谱数据流水线
功能：归一化、光谱端点翻转补齐、光谱窗口提取、空间切块与旋转增强
"""

from typing import List, Sequence, Tuple

import numpy as np

from models.hsi_cube import HsiCube
from models.patch_sample import PatchSample, SampleBatch
from utils.logger import get_logger
from .exceptions import CubeError, PipelineError

logger = get_logger(__name__)

ROTATIONS = (0, 90, 180, 270)


def scale_to_unit(cube: HsiCube) -> HsiCube:
    """
    全局最小值映射到 0、最大值映射到 1

    Raises:
        CubeError: 常数立方体（缩放无定义）
    """
    low = float(cube.data.min())
    high = float(cube.data.max())
    if not high > low:
        raise CubeError(f"常数立方体无法缩放到 [0, 1]（min = max = {low}）")
    return cube.with_data((cube.data - low) / (high - low))


def flip_pad_spectral(cube: HsiCube, K: int) -> HsiCube:
    """
    光谱两端各翻转补齐 K/2 个波段

    前端补上前 K/2 个波段的逆序，后端补上后 K/2 个波段的逆序，
    例如 B=3, K=2 时输出 [b1, b1, b2, b3, b3]。

    Args:
        cube: 原立方体（B 个波段）
        K: 光谱窗口长度（正偶数）

    Returns:
        B+K 个波段的立方体（不带波长，metadata 记录补齐量）

    Raises:
        PipelineError: K 非正偶数或 K/2 > B
    """
    if K < 2 or K % 2 != 0:
        raise PipelineError(f"K 必须为正偶数, 当前 {K}")
    half = K // 2
    if half > cube.bands:
        raise PipelineError(f"K/2 = {half} 超过波段数 B = {cube.bands}")

    data = cube.data
    front = data[:, :, :half][:, :, ::-1]
    back = data[:, :, cube.bands - half:][:, :, ::-1]
    padded = np.concatenate([front, data, back], axis=2)

    metadata = dict(cube.metadata)
    metadata['spectral_pad'] = K
    metadata['source_bands'] = cube.bands
    return HsiCube(data=padded, name=cube.name, metadata=metadata)


def spectral_window(padded: HsiCube, index: int, K: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    取第 index 个原始波段的光谱窗口

    Args:
        padded: flip_pad_spectral 的输出
        index: 原始波段序号 0..B-1
        K: 窗口长度

    Returns:
        (y_s: M×N 目标波段, y_lambda: M×N×K 窗口，目标位于偏移 K/2)

    Raises:
        PipelineError: 序号越界或补齐量不一致
    """
    pad = padded.metadata.get('spectral_pad')
    if pad is not None and pad != K:
        raise PipelineError(f"立方体按 K={pad} 补齐, 无法按 K={K} 取窗口")
    bands = padded.bands - K
    if bands < 1:
        raise PipelineError(f"补齐后的立方体波段数 {padded.bands} 不足以容纳 K={K}")
    if not 0 <= index < bands:
        raise PipelineError(f"波段序号 {index} 超出范围 [0, {bands})")

    y_lambda = padded.data[:, :, index:index + K]
    y_s = padded.data[:, :, index + K // 2]
    return y_s, y_lambda


def patch_origins(length: int, size: int, stride: int) -> List[int]:
    """
    一维切块起点；相邻起点间距不超过 size，最后一块对齐到边缘，保证完全覆盖
    """
    if size > length:
        raise PipelineError(f"切块尺寸 {size} 大于图像尺寸 {length}")
    if stride < 1:
        raise PipelineError(f"步长必须为正, 当前 {stride}")
    origins = [0]
    while origins[-1] + size < length:
        origins.append(min(origins[-1] + min(stride, size), length - size))
    return origins


def patch_grid(rows: int, cols: int, size: int, stride: int) -> List[Tuple[int, int]]:
    """光栅扫描顺序的二维切块起点"""
    return [(r, c) for r in patch_origins(rows, size, stride)
            for c in patch_origins(cols, size, stride)]


def extract_patches(cube: HsiCube, size: int = 20,
                    stride: int = 10) -> List[Tuple[Tuple[int, int], HsiCube]]:
    """
    空间切块

    Args:
        cube: 立方体
        size: 切块边长
        stride: 步长

    Returns:
        [(起点, 子立方体)]，光栅扫描顺序
    """
    if size > min(cube.rows, cube.cols):
        raise PipelineError(f"切块尺寸 {size} 大于图像尺寸 {cube.rows}×{cube.cols}")
    return [((r, c), cube.crop(slice(r, r + size), slice(c, c + size)))
            for r, c in patch_grid(cube.rows, cube.cols, size, stride)]


def rotate_sample(sample: PatchSample, quarter_turns: int) -> PatchSample:
    """
    将样本的全部平面同步旋转 90°×quarter_turns

    Raises:
        PipelineError: 非正方形切块
    """
    h, w = sample.y_s.shape
    if h != w or sample.y_lambda.shape[:2] != (h, w) or sample.x_s.shape != (h, w):
        raise PipelineError(f"旋转需要正方形切块, 当前 {sample.y_s.shape}")
    k = quarter_turns % 4
    return PatchSample(
        y_s=np.rot90(sample.y_s, k, axes=(0, 1)).copy(),
        y_lambda=np.rot90(sample.y_lambda, k, axes=(0, 1)).copy(),
        x_s=np.rot90(sample.x_s, k, axes=(0, 1)).copy(),
        band_index=sample.band_index,
        patch_origin=sample.patch_origin,
        rotation=(sample.rotation + 90 * k) % 360,
        wavelength_um=sample.wavelength_um,
    )


def rotations(sample: PatchSample) -> List[PatchSample]:
    """0°、90°、180°、270° 四个旋转版本"""
    return [rotate_sample(sample, k) for k in range(len(ROTATIONS))]


class HsiPipeline:
    """训练 / 测试样本流水线"""

    def __init__(self, K: int, patch_size: int = 20, stride: int = 10, augment: bool = True):
        """
        初始化流水线

        Args:
            K: 光谱窗口长度
            patch_size: 切块边长
            stride: 切块步长
            augment: 是否做旋转增强
        """
        if K < 2 or K % 2 != 0:
            raise PipelineError(f"K 必须为正偶数, 当前 {K}")
        self.K = K
        self.patch_size = patch_size
        self.stride = stride
        self.augment = augment

        logger.info(f"数据流水线初始化: K={K}, patch={patch_size}, stride={stride}, augment={augment}")

    def dataset_size(self, cube: HsiCube) -> int:
        """样本数 = 切块数 × 波段数 × 旋转数"""
        patches = len(patch_grid(cube.rows, cube.cols, self.patch_size, self.stride))
        return patches * cube.bands * (len(ROTATIONS) if self.augment else 1)

    def build_samples(self, noisy: HsiCube, clean: HsiCube,
                      bands: Sequence[int] = None) -> List[PatchSample]:
        """
        生成样本流（顺序确定：波段 → 切块 → 旋转）

        Args:
            noisy: 含噪立方体
            clean: 干净立方体
            bands: 只处理这些波段（默认全部）

        Returns:
            样本列表

        Raises:
            PipelineError: 两个立方体尺寸不一致
        """
        if noisy.shape != clean.shape:
            raise PipelineError(f"含噪立方体 {noisy.shape} 与干净立方体 {clean.shape} 尺寸不一致")

        padded = flip_pad_spectral(noisy, self.K)
        origins = patch_grid(noisy.rows, noisy.cols, self.patch_size, self.stride)
        size = self.patch_size
        band_indices = range(noisy.bands) if bands is None else bands

        samples: List[PatchSample] = []
        for index in band_indices:
            y_s, y_lambda = spectral_window(padded, index, self.K)
            x_s = clean.band(index)
            wavelength = clean.wavelength(index)
            if wavelength is None:
                wavelength = noisy.wavelength(index)

            for r, c in origins:
                sample = PatchSample(
                    y_s=y_s[r:r + size, c:c + size].copy(),
                    y_lambda=y_lambda[r:r + size, c:c + size, :].copy(),
                    x_s=x_s[r:r + size, c:c + size].copy(),
                    band_index=index,
                    patch_origin=(r, c),
                    wavelength_um=wavelength,
                )
                if self.augment:
                    samples.extend(rotations(sample))
                else:
                    samples.append(sample)

        logger.info(
            f"样本生成完成: {len(band_indices)} 个波段 × {len(origins)} 个切块"
            f"{' × 4 个旋转' if self.augment else ''} = {len(samples)} 个样本"
        )
        return samples

    def build_batch(self, noisy: HsiCube, clean: HsiCube) -> SampleBatch:
        """生成并堆叠样本"""
        samples = self.build_samples(noisy, clean)
        if not samples:
            raise PipelineError("样本流为空")
        return SampleBatch.stack(samples)
