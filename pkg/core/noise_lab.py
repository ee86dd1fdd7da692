"""
噪声实验室
功能：按 Y = X + S + N 生成五种模拟退化场景，并可根据噪声日志逐位重放
"""

import math
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np

from models.hsi_cube import HsiCube
from models.noise_spec import KIND_ORDER, SPARSE_KINDS, NoiseCase, NoiseLog, NoiseSpec
from utils.logger import get_logger
from .exceptions import NoiseSpecError
import config

logger = get_logger(__name__)

# Case 5 中每个波段的稀疏噪声组合（全部非空子集）
SPARSE_SUBSETS: List[Tuple[str, ...]] = [
    subset for size in range(1, len(SPARSE_KINDS) + 1)
    for subset in combinations(SPARSE_KINDS, size)
]

_SEED_BOUND = 2 ** 63 - 1


def _gaussian_component(shape: Tuple[int, int], sigma: float, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(shape) * sigma


def _impulse_component(shape: Tuple[int, int], density: float,
                       seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """返回 (替换掩码, 替换值 0/1)"""
    gen = np.random.default_rng(seed)
    mask = gen.random(shape) < density
    values = (gen.random(shape) < 0.5).astype(np.float64)
    return mask, values


class NoiseLab:
    """噪声实验室"""

    def __init__(self, spec: NoiseSpec):
        """
        初始化噪声实验室

        Args:
            spec: 噪声配置
        """
        spec.validate()
        self.spec = spec

        logger.info(
            f"噪声实验室初始化: case={spec.case.value}, seed={spec.seed}, "
            f"sigma={spec.gaussian_sigma_range}, clip={spec.clip_output}"
        )

    def _rng(self, rng: Optional[np.random.Generator]) -> np.random.Generator:
        return rng if rng is not None else np.random.default_rng(self.spec.seed)

    @staticmethod
    def _child_seed(rng: np.random.Generator) -> int:
        return int(rng.integers(0, _SEED_BOUND))

    def _select_bands(self, bands: int, rng: np.random.Generator) -> List[int]:
        """无放回随机选取约 band_fraction 比例的波段（四舍五入）"""
        count = min(bands, int(math.floor(bands * self.spec.band_fraction + 0.5)))
        return sorted(int(b) for b in rng.choice(bands, size=count, replace=False))

    def _column_count(self, cols: int, fraction: float) -> int:
        """列数取整后仍落在 stripe_col_fraction 区间内"""
        low, high = self.spec.stripe_col_fraction
        count = int(math.floor(fraction * cols + 0.5))
        min_count = math.ceil(low * cols - 1e-9)
        max_count = math.floor(high * cols + 1e-9)
        if min_count <= max_count:
            count = min(max(count, min_count), max_count)
        return min(max(count, 1), cols)

    def _select_columns(self, cols: int, rng: np.random.Generator) -> Tuple[float, List[int]]:
        fraction = float(rng.uniform(*self.spec.stripe_col_fraction))
        count = self._column_count(cols, fraction)
        columns = sorted(int(c) for c in rng.choice(cols, size=count, replace=False))
        return fraction, columns

    # ==================== 单波段施加 ====================

    def _apply_gaussian(self, work: np.ndarray, band: int, rng: np.random.Generator, log: NoiseLog):
        low, high = self.spec.gaussian_sigma_range
        sigma = float(rng.uniform(low, high)) / config.NOISE_INTENSITY_SCALE
        seed = self._child_seed(rng)
        work[:, :, band] += _gaussian_component(work.shape[:2], sigma, seed)
        log.add('gaussian', band, sigma=sigma, seed=seed)

    def _apply_stripe(self, work: np.ndarray, band: int, rng: np.random.Generator, log: NoiseLog):
        fraction, columns = self._select_columns(work.shape[1], rng)
        low, high = self.spec.stripe_amplitude_range
        magnitudes = rng.uniform(low, high, size=len(columns))
        signs = rng.choice([-1.0, 1.0], size=len(columns))
        offsets = [float(v) for v in magnitudes * signs]
        work[:, columns, band] += np.asarray(offsets)
        log.add('stripe', band, fraction=fraction, columns=columns, offsets=offsets)

    def _apply_deadline(self, work: np.ndarray, band: int, rng: np.random.Generator, log: NoiseLog):
        fraction, columns = self._select_columns(work.shape[1], rng)
        work[:, columns, band] = 0.0
        log.add('deadline', band, fraction=fraction, columns=columns)

    def _apply_impulse(self, work: np.ndarray, band: int, rng: np.random.Generator, log: NoiseLog):
        density = float(rng.uniform(*self.spec.impulse_density_range))
        seed = self._child_seed(rng)
        mask, values = _impulse_component(work.shape[:2], density, seed)
        plane = work[:, :, band]
        plane[mask] = values[mask]
        log.add('impulse', band, density=density, seed=seed, count=int(mask.sum()))

    def _applier(self, kind: str):
        return {
            'gaussian': self._apply_gaussian,
            'stripe': self._apply_stripe,
            'deadline': self._apply_deadline,
            'impulse': self._apply_impulse,
        }[kind]

    # ==================== 场景 ====================

    def _start(self, cube: HsiCube) -> Tuple[np.ndarray, NoiseLog]:
        work = np.array(cube.data, dtype=np.float64)
        log = NoiseLog(case=self.spec.case, seed=self.spec.seed, bands=cube.bands,
                       clip_output=self.spec.clip_output)
        return work, log

    def _finish(self, cube: HsiCube, work: np.ndarray, log: NoiseLog, clip: bool) -> Tuple[HsiCube, NoiseLog]:
        if clip:
            np.clip(work, 0.0, 1.0, out=work)
        noisy = cube.with_data(work, name=f"{cube.name}_noisy" if cube.name else "noisy")
        noisy.metadata['noise_case'] = log.case.value
        return noisy, log

    def _apply_to_bands(self, cube: HsiCube, kind: str, rng: Optional[np.random.Generator],
                        all_bands: bool) -> Tuple[HsiCube, NoiseLog]:
        rng = self._rng(rng)
        work, log = self._start(cube)
        bands = range(cube.bands) if all_bands else self._select_bands(cube.bands, rng)
        apply = self._applier(kind)
        for band in bands:
            apply(work, band, rng, log)
        return self._finish(cube, work, log, self.spec.clip_output)

    def add_gaussian_noniid(self, cube: HsiCube,
                            rng: Optional[np.random.Generator] = None) -> Tuple[HsiCube, NoiseLog]:
        """
        每个波段施加零均值高斯噪声，标准差 ~ U(sigma_range)/255

        Returns:
            (含噪立方体, 噪声日志)
        """
        return self._apply_to_bands(cube, 'gaussian', rng, all_bands=True)

    def add_stripes(self, cube: HsiCube,
                    rng: Optional[np.random.Generator] = None) -> Tuple[HsiCube, NoiseLog]:
        """
        约三分之一波段上，5%~15% 的列加上沿列恒定的偏置
        """
        return self._apply_to_bands(cube, 'stripe', rng, all_bands=False)

    def add_deadlines(self, cube: HsiCube,
                      rng: Optional[np.random.Generator] = None) -> Tuple[HsiCube, NoiseLog]:
        """
        约三分之一波段上，5%~15% 的列置零（宽度 1）
        """
        return self._apply_to_bands(cube, 'deadline', rng, all_bands=False)

    def add_impulse(self, cube: HsiCube,
                    rng: Optional[np.random.Generator] = None) -> Tuple[HsiCube, NoiseLog]:
        """
        约三分之一波段上，以密度 p 将像素独立替换为 0 或 1（椒盐噪声）
        """
        return self._apply_to_bands(cube, 'impulse', rng, all_bands=False)

    def corrupt(self, cube: HsiCube,
                rng: Optional[np.random.Generator] = None) -> Tuple[HsiCube, NoiseLog]:
        """
        按配置的场景生成含噪立方体

        Args:
            cube: 干净立方体（[0, 1]）
            rng: 随机数生成器（默认由 spec.seed 构造）

        Returns:
            (含噪立方体, 完整噪声日志)
        """
        case = self.spec.case
        logger.info(f"开始生成噪声: {case.value}, 立方体 {cube.rows}×{cube.cols}×{cube.bands}")

        if case == NoiseCase.CASE1:
            noisy, log = self.add_gaussian_noniid(cube, rng)
        elif case == NoiseCase.CASE2:
            noisy, log = self.add_stripes(cube, rng)
        elif case == NoiseCase.CASE3:
            noisy, log = self.add_deadlines(cube, rng)
        elif case == NoiseCase.CASE4:
            noisy, log = self.add_impulse(cube, rng)
        elif case == NoiseCase.CASE5:
            noisy, log = self._mixture(cube, self._rng(rng))
        else:
            raise NoiseSpecError(f"不支持的噪声场景: {case}")

        logger.info(f"噪声生成完成: {log.summary()}")
        return noisy, log

    def _mixture(self, cube: HsiCube, rng: np.random.Generator) -> Tuple[HsiCube, NoiseLog]:
        """全部波段高斯噪声，每个波段再叠加一个均匀选取的非空稀疏噪声组合"""
        work, log = self._start(cube)
        for band in range(cube.bands):
            self._apply_gaussian(work, band, rng, log)
        for band in range(cube.bands):
            subset = SPARSE_SUBSETS[int(rng.integers(len(SPARSE_SUBSETS)))]
            for kind in KIND_ORDER:
                if kind in subset:
                    self._applier(kind)(work, band, rng, log)
            logger.debug(f"波段 {band}: gaussian + {'+'.join(subset)}")
        return self._finish(cube, work, log, self.spec.clip_output)

    # ==================== 重放 ====================

    @staticmethod
    def decompose(clean: HsiCube, log: NoiseLog) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        按日志重放噪声，并分离稠密分量 N 与稀疏分量 S

        Returns:
            (含噪数据, 稀疏分量 S, 稠密分量 N)，未裁剪时 含噪 = 干净 + S + N

        Raises:
            NoiseSpecError: 日志与立方体不匹配
        """
        if log.bands != clean.bands:
            raise NoiseSpecError(f"噪声日志波段数 {log.bands} 与立方体波段数 {clean.bands} 不一致")

        work = np.array(clean.data, dtype=np.float64)
        sparse = np.zeros_like(work)
        dense = np.zeros_like(work)
        shape = work.shape[:2]

        for band in range(clean.bands):
            for event in log.for_band(band):
                params: Dict = event.params
                plane = work[:, :, band]
                if event.kind == 'gaussian':
                    component = _gaussian_component(shape, params['sigma'], params['seed'])
                    plane += component
                    dense[:, :, band] += component
                elif event.kind == 'stripe':
                    columns = list(params['columns'])
                    offsets = np.asarray(params['offsets'], dtype=np.float64)
                    plane[:, columns] += offsets
                    sparse[:, columns, band] += offsets
                elif event.kind == 'deadline':
                    columns = list(params['columns'])
                    sparse[:, columns, band] -= plane[:, columns]
                    plane[:, columns] = 0.0
                elif event.kind == 'impulse':
                    mask, values = _impulse_component(shape, params['density'], params['seed'])
                    sparse[:, :, band][mask] += values[mask] - plane[mask]
                    plane[mask] = values[mask]

        if log.clip_output:
            np.clip(work, 0.0, 1.0, out=work)
        return work, sparse, dense

    @classmethod
    def replay(cls, clean: HsiCube, log: NoiseLog) -> HsiCube:
        """根据日志逐位重建含噪立方体"""
        work, _, _ = cls.decompose(clean, log)
        return clean.with_data(work, name=f"{clean.name}_noisy" if clean.name else "noisy")
