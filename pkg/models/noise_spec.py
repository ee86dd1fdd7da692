"""
噪声配置与噪声日志模型
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from core.exceptions import NoiseSpecError
from utils.file_utils import write_text_atomic


class NoiseCase(str, Enum):
    """模拟噪声场景"""

    CASE1 = 'case1'   # 非独立同分布高斯噪声
    CASE2 = 'case2'   # 条纹噪声
    CASE3 = 'case3'   # 死线噪声
    CASE4 = 'case4'   # 脉冲噪声
    CASE5 = 'case5'   # 高斯噪声 + 每个波段至少一种稀疏噪声

    @classmethod
    def parse(cls, value) -> 'NoiseCase':
        if isinstance(value, NoiseCase):
            return value
        text = str(value).strip().lower()
        if text.isdigit():
            text = f"case{text}"
        try:
            return cls(text)
        except ValueError:
            raise NoiseSpecError(f"未知的噪声场景: {value}")


# 单个波段内的施加顺序
KIND_ORDER = ('gaussian', 'stripe', 'deadline', 'impulse')
SPARSE_KINDS = ('stripe', 'deadline', 'impulse')


@dataclass
class NoiseSpec:
    """噪声配置（高斯强度按 0-255 刻度给出）"""

    case: NoiseCase = NoiseCase.CASE5
    seed: int = 0
    gaussian_sigma_range: Tuple[float, float] = (10.0, 70.0)
    band_fraction: float = 1.0 / 3.0
    stripe_col_fraction: Tuple[float, float] = (0.05, 0.15)
    stripe_amplitude_range: Tuple[float, float] = (0.2, 0.8)
    impulse_density_range: Tuple[float, float] = (0.10, 0.70)
    clip_output: bool = False

    def __post_init__(self):
        self.case = NoiseCase.parse(self.case)
        self.gaussian_sigma_range = tuple(float(v) for v in self.gaussian_sigma_range)
        self.stripe_col_fraction = tuple(float(v) for v in self.stripe_col_fraction)
        self.stripe_amplitude_range = tuple(float(v) for v in self.stripe_amplitude_range)
        self.impulse_density_range = tuple(float(v) for v in self.impulse_density_range)
        self.validate()

    def validate(self):
        """
        校验配置

        Raises:
            NoiseSpecError: 区间为空或比例越界
        """
        ranges = {
            'gaussian_sigma_range': self.gaussian_sigma_range,
            'stripe_col_fraction': self.stripe_col_fraction,
            'stripe_amplitude_range': self.stripe_amplitude_range,
            'impulse_density_range': self.impulse_density_range,
        }
        for key, (low, high) in ranges.items():
            if low > high:
                raise NoiseSpecError(f"{key} 区间为空: [{low}, {high}]")
            if low < 0:
                raise NoiseSpecError(f"{key} 不能为负: [{low}, {high}]")

        if not 0 < self.band_fraction <= 1:
            raise NoiseSpecError(f"band_fraction 必须位于 (0, 1]: {self.band_fraction}")
        if self.stripe_col_fraction[0] <= 0 or self.stripe_col_fraction[1] > 1:
            raise NoiseSpecError(f"stripe_col_fraction 必须位于 (0, 1]: {self.stripe_col_fraction}")
        if self.impulse_density_range[1] > 1:
            raise NoiseSpecError(f"impulse_density_range 必须位于 [0, 1]: {self.impulse_density_range}")

    def to_dict(self) -> Dict:
        """转换为扁平字典（与运行配置键一致）"""
        return {
            'case': self.case.value,
            'seed': self.seed,
            'gaussian_sigma_min': self.gaussian_sigma_range[0],
            'gaussian_sigma_max': self.gaussian_sigma_range[1],
            'band_fraction': self.band_fraction,
            'stripe_col_fraction_min': self.stripe_col_fraction[0],
            'stripe_col_fraction_max': self.stripe_col_fraction[1],
            'stripe_amplitude_min': self.stripe_amplitude_range[0],
            'stripe_amplitude_max': self.stripe_amplitude_range[1],
            'impulse_density_min': self.impulse_density_range[0],
            'impulse_density_max': self.impulse_density_range[1],
            'clip_output': self.clip_output,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'NoiseSpec':
        """从扁平字典创建"""
        return cls(
            case=data.get('case', NoiseCase.CASE5),
            seed=int(data.get('seed', 0)),
            gaussian_sigma_range=(
                data.get('gaussian_sigma_min', 10.0),
                data.get('gaussian_sigma_max', 70.0),
            ),
            band_fraction=float(data.get('band_fraction', 1.0 / 3.0)),
            stripe_col_fraction=(
                data.get('stripe_col_fraction_min', 0.05),
                data.get('stripe_col_fraction_max', 0.15),
            ),
            stripe_amplitude_range=(
                data.get('stripe_amplitude_min', 0.2),
                data.get('stripe_amplitude_max', 0.8),
            ),
            impulse_density_range=(
                data.get('impulse_density_min', 0.10),
                data.get('impulse_density_max', 0.70),
            ),
            clip_output=bool(data.get('clip_output', False)),
        )


@dataclass
class NoiseEvent:
    """某个波段上的一次噪声施加记录"""

    kind: str
    band: int
    params: Dict = field(default_factory=dict)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (list, tuple, np.ndarray)):
        return ','.join(_format_value(v) for v in value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(int(value)) if isinstance(value, (int, np.integer)) else str(value)


def _parse_scalar(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return float(text)


# 各噪声类型参数的取值形态
_LIST_PARAMS = {'columns', 'offsets'}


@dataclass
class NoiseLog:
    """
    噪声日志

    记录每个波段施加的噪声类型与参数（含逐波段子种子），
    足以逐位重放出含噪立方体。
    """

    case: NoiseCase
    seed: int
    bands: int
    clip_output: bool = False
    events: List[NoiseEvent] = field(default_factory=list)

    def add(self, kind: str, band: int, **params):
        self.events.append(NoiseEvent(kind=kind, band=band, params=params))

    def for_band(self, band: int) -> List[NoiseEvent]:
        """某波段的事件（按施加顺序）"""
        events = [e for e in self.events if e.band == band]
        return sorted(events, key=lambda e: KIND_ORDER.index(e.kind))

    def kinds_for_band(self, band: int) -> List[str]:
        return [e.kind for e in self.for_band(band)]

    def affected_bands(self, kind: str) -> List[int]:
        return sorted({e.band for e in self.events if e.kind == kind})

    def sigmas(self) -> np.ndarray:
        """逐波段高斯噪声标准差（[0,1] 刻度，未施加的波段为 NaN）"""
        values = np.full(self.bands, np.nan)
        for event in self.events:
            if event.kind == 'gaussian':
                values[event.band] = event.params['sigma']
        return values

    def summary(self) -> Dict[str, int]:
        """各噪声类型影响的波段数"""
        return {kind: len(self.affected_bands(kind)) for kind in KIND_ORDER}

    # ==================== 文本序列化 ====================

    def to_text(self) -> str:
        lines = [
            "# SM-CNN noise log",
            f"case = {self.case.value}",
            f"seed = {self.seed}",
            f"bands = {self.bands}",
            f"clip_output = {_format_value(self.clip_output)}",
        ]
        for band in range(self.bands):
            for event in self.for_band(band):
                for key, value in event.params.items():
                    lines.append(f"band.{band}.{event.kind}.{key} = {_format_value(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> 'NoiseLog':
        header: Dict[str, str] = {}
        grouped: Dict[Tuple[int, str], Dict] = {}

        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith('#'):
                continue
            if '=' not in line:
                raise NoiseSpecError(f"噪声日志第 {lineno} 行格式错误: {raw}")
            key, value = (part.strip() for part in line.split('=', 1))

            if key.startswith('band.'):
                parts = key.split('.')
                if len(parts) != 4:
                    raise NoiseSpecError(f"噪声日志第 {lineno} 行键名错误: {key}")
                _, band, kind, param = parts
                if kind not in KIND_ORDER:
                    raise NoiseSpecError(f"噪声日志第 {lineno} 行未知噪声类型: {kind}")
                if param in _LIST_PARAMS:
                    parsed = [_parse_scalar(v) for v in value.split(',') if v.strip()]
                else:
                    parsed = _parse_scalar(value)
                grouped.setdefault((int(band), kind), {})[param] = parsed
            else:
                header[key] = value

        try:
            log = cls(
                case=NoiseCase.parse(header['case']),
                seed=int(header['seed']),
                bands=int(header['bands']),
                clip_output=header.get('clip_output', 'false').lower() == 'true',
            )
        except KeyError as e:
            raise NoiseSpecError(f"噪声日志缺少字段: {e}")

        for (band, kind), params in sorted(grouped.items(),
                                          key=lambda item: (item[0][0], KIND_ORDER.index(item[0][1]))):
            log.add(kind, band, **params)
        return log

    def save(self, path: str):
        write_text_atomic(path, self.to_text())

    @classmethod
    def load(cls, path: str) -> 'NoiseLog':
        return cls.from_text(Path(path).read_text(encoding='utf-8'))

    def to_dict(self) -> Dict:
        """转换为字典"""
        return {
            'case': self.case.value,
            'seed': self.seed,
            'bands': self.bands,
            'clip_output': self.clip_output,
            'events': [
                {'kind': e.kind, 'band': e.band, 'params': dict(e.params)}
                for e in self.events
            ],
        }
