"""
SM-CNN 去噪网络
功能：空间 / 光谱双分支输入、SSMRB 深层块、多级跳连接与残差输出，
以及 WM-CNN、SM-CNN-Lite 两个变体和参数量统计
"""

import math
from collections import OrderedDict
from contextlib import contextmanager
from typing import Dict, Iterator, List, NamedTuple, Tuple, Union

import numpy as np

from models.model_config import ModelConfig, Variant
from utils.format_utils import format_number
from utils.logger import get_logger
from .conv import conv2d, conv3d
from .exceptions import CheckpointError, ModelConfigError, ShapeMismatchError
from .tensor import (
    Tensor, as_tensor, channel_stats, concat, no_grad, relu, reshape, transpose
)
import config as app_config

logger = get_logger(__name__)

# 调制参数生成器的卷积核尺寸
GENERATOR_KERNEL = 5
HEAD_KERNEL = 1
LITE_KERNEL = 1

# 深层特征与跳连接使用的卷积核尺寸
FEATURE_KERNEL = 3


class ParamSpec(NamedTuple):
    """参数布局条目"""

    name: str
    shape: Tuple[int, ...]
    init: str  # 'xavier' | 'zeros'


def tap_names(config: ModelConfig) -> List[str]:
    """全部跳连接抽头位置（从输入侧到输出侧）"""
    return ['branch', 'entry'] + [f'deep{r}' for r in range(config.ssmrb_count)]


def used_taps(config: ModelConfig) -> List[str]:
    """实际使用的抽头：保留最靠近输出的 tap_count 个"""
    return tap_names(config)[-config.tap_count:]


def layout(config: ModelConfig) -> List[ParamSpec]:
    """
    按注册顺序列出全部参数的名称、形状与初始化方式

    Args:
        config: 网络结构配置

    Returns:
        参数布局（名称唯一，顺序即初始化与存档顺序）
    """
    config.validate()
    specs: List[ParamSpec] = []

    def conv(name: str, kernel: Tuple[int, ...], cin: int, cout: int, init: str = 'xavier'):
        specs.append(ParamSpec(f'{name}.weight', tuple(kernel) + (cin, cout), init))
        specs.append(ParamSpec(f'{name}.bias', (cout,), 'zeros'))

    bc = config.branch_channels
    branch_total = bc * len(config.kernel_sizes)

    for k in config.kernel_sizes:
        conv(f'spatial.k{k}', (k, k), 1, bc)

    depth_channels = 0
    for k in config.kernel_sizes:
        kd = config.spectral_depth(k)
        conv(f'spectral.k{k}', (kd, k, k), 1, bc)
        depth_channels += (config.K - kd + 1) * bc
    conv('spectral.fuse', (1, 1), depth_channels, branch_total)

    conv('entry', (FEATURE_KERNEL, FEATURE_KERNEL), 2 * branch_total, config.C)

    km = config.modulation_bands
    mc = config.modulation_channels
    lite = config.variant == Variant.SMCNNLITE
    for r in range(config.ssmrb_count):
        conv(f'deep.{r}.conv', (FEATURE_KERNEL, FEATURE_KERNEL), config.C, config.C)
        for j in (1, 2):
            prefix = f'deep.{r}.ssmrb.ssmm{j}'
            conv(f'{prefix}.shared', (GENERATOR_KERNEL, GENERATOR_KERNEL), km, mc)
            if lite:
                conv(f'{prefix}.shared1x1', (LITE_KERNEL, LITE_KERNEL), km, mc)
            conv(f'{prefix}.gamma', (HEAD_KERNEL, HEAD_KERNEL), mc, config.C, init='zeros')
            conv(f'{prefix}.beta', (HEAD_KERNEL, HEAD_KERNEL), mc, config.C)
            conv(f'deep.{r}.ssmrb.conv{j}', (FEATURE_KERNEL, FEATURE_KERNEL), config.C, config.C)

    tap_channels = {'branch': 2 * branch_total, 'entry': config.C}
    for name in used_taps(config):
        cin = tap_channels.get(name, config.C)
        conv(f'skip.{name}', (FEATURE_KERNEL, FEATURE_KERNEL), cin, config.skip_channels)

    conv('output', (FEATURE_KERNEL, FEATURE_KERNEL), config.skip_channels * config.tap_count, 1)
    return specs


def xavier_std(shape: Tuple[int, ...]) -> float:
    """XavierNormal 标准差 sqrt(2 / (fan_in + fan_out))"""
    receptive = int(np.prod(shape[:-2])) if len(shape) > 2 else 1
    fan_in = receptive * shape[-2]
    fan_out = receptive * shape[-1]
    return math.sqrt(2.0 / (fan_in + fan_out))


def modulation_input(variant: Union[Variant, str], y_lambda,
                     wavelength_um=None) -> Tensor:
    """
    构造 SSMM 生成器的调制输入

    Args:
        variant: 网络变体
        y_lambda: [N×]h×w×K 光谱窗口
        wavelength_um: 目标波段波长（标量或长度 N 的数组），WM-CNN 必需

    Returns:
        SM-CNN / Lite 为 y_lambda 本身；WM-CNN 为填满波长值的 [N×]h×w×1 张量

    Raises:
        ModelConfigError: WM-CNN 缺少波长
    """
    variant = Variant.parse(variant)
    y_lambda = as_tensor(y_lambda)
    if variant != Variant.WMCNN:
        return y_lambda

    if wavelength_um is None:
        raise ModelConfigError("WM-CNN 需要目标波段的波长元数据 (wavelength_um)")
    values = np.asarray(wavelength_um, dtype=np.float64)
    if np.isnan(values).any():
        raise ModelConfigError("WM-CNN 的波长元数据中存在缺失值")

    spatial = y_lambda.shape[:-1]
    if values.ndim == 0:
        return Tensor(np.full(spatial + (1,), float(values)))
    if y_lambda.ndim != 4 or values.shape != (y_lambda.shape[0],):
        raise ShapeMismatchError(
            f"波长数组形状 {values.shape} 与批次 y_lambda {y_lambda.shape} 不匹配"
        )
    return Tensor(np.broadcast_to(values[:, None, None, None], spatial + (1,)).copy())


@contextmanager
def _stage(name: str):
    try:
        yield
    except ShapeMismatchError as e:
        raise ShapeMismatchError(f"[{name}] {e}") from e


class SMCNN:
    """
    SM-CNN 去噪器

    参数以有序字典保存；推理期间模型不可变，可被多个线程共享。
    """

    def __init__(self, config: ModelConfig, params: Dict[str, Tensor]):
        """
        Args:
            config: 网络结构配置
            params: 名称 → 参数张量，必须与 layout(config) 完全一致

        Raises:
            ModelConfigError: 参数名称或形状与配置不符
        """
        expected = layout(config)
        names = [spec.name for spec in expected]
        if list(params.keys()) != names:
            missing = [n for n in names if n not in params]
            extra = [n for n in params if n not in names]
            raise ModelConfigError(f"参数集合与配置不符: 缺少 {missing[:3]}, 多余 {extra[:3]}")
        for spec in expected:
            if params[spec.name].shape != spec.shape:
                raise ModelConfigError(
                    f"参数 {spec.name} 形状 {params[spec.name].shape} 与配置要求 {spec.shape} 不符"
                )
        self.config = config
        self.params: Dict[str, Tensor] = OrderedDict(params)

    @classmethod
    def build(cls, config: ModelConfig, init_seed: int = 0) -> 'SMCNN':
        """
        构建并初始化网络

        卷积核按 XavierNormal 初始化，偏置为零，γ 头卷积核为零（初始调制为恒等）。

        Args:
            config: 网络结构配置
            init_seed: 初始化随机种子

        Returns:
            新模型
        """
        rng = np.random.default_rng(init_seed)
        params: Dict[str, Tensor] = OrderedDict()
        for spec in layout(config):
            if spec.init == 'xavier':
                data = rng.normal(0.0, xavier_std(spec.shape), size=spec.shape)
            else:
                data = np.zeros(spec.shape)
            params[spec.name] = Tensor(data, requires_grad=True, name=spec.name)

        model = cls(config, params)
        logger.info(
            f"模型构建完成: variant={config.variant.value}, K={config.K}, C={config.C}, "
            f"SSMRB={config.ssmrb_count}, taps={config.tap_count}, "
            f"参数量 {format_number(model.count_params())}"
        )
        return model

    # ==================== 参数 ====================

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self.params.items())

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def count_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def state_dict(self) -> Dict[str, np.ndarray]:
        """参数数组的副本"""
        return OrderedDict((name, p.data.copy()) for name, p in self.params.items())

    def load_state_dict(self, state: Dict[str, np.ndarray]):
        """
        原地载入参数

        Raises:
            CheckpointError: 缺少参数或形状不符（指明参数名）
        """
        for name, p in self.params.items():
            if name not in state:
                raise CheckpointError(f"检查点缺少参数 {name}")
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise CheckpointError(f"参数 {name} 形状 {value.shape} 与模型 {p.shape} 不符")
            p.data = value.copy()
        extra = [name for name in state if name not in self.params]
        if extra:
            raise CheckpointError(f"检查点包含未知参数 {extra[:3]}")

    # ==================== 前向 ====================

    def _conv(self, name: str, x: Tensor, padding='same') -> Tensor:
        weight = self.params[f'{name}.weight']
        bias = self.params[f'{name}.bias']
        if weight.ndim == 5:
            return conv3d(x, weight, padding=padding) + bias
        return conv2d(x, weight, padding=padding) + bias

    def ssmm(self, f_pre, modulation, prefix: str = 'deep.0.ssmrb.ssmm1') -> Tensor:
        """
        光谱自调制模块：γ(y_λ) ⊙ (f − μ) / σ + β(y_λ)

        Args:
            f_pre: [N×]h×w×C 特征
            modulation: [N×]h×w×Km 调制输入（见 modulation_input）
            prefix: 所用 SSMM 的参数名前缀

        Returns:
            [N×]h×w×C 调制后的特征
        """
        f_pre = as_tensor(f_pre)
        modulation = as_tensor(modulation)
        mu, sigma = channel_stats(f_pre)
        stat_shape = f_pre.shape[:-3] + (1, 1, f_pre.shape[-1])
        normalized = (f_pre - reshape(mu, stat_shape)) / reshape(sigma, stat_shape)

        hidden = self._conv(f'{prefix}.shared', modulation)
        if self.config.variant == Variant.SMCNNLITE:
            hidden = hidden + self._conv(f'{prefix}.shared1x1', modulation)
        hidden = relu(hidden)

        gamma = 1.0 + self._conv(f'{prefix}.gamma', hidden)
        beta = self._conv(f'{prefix}.beta', hidden)
        return gamma * normalized + beta

    def ssmrb(self, f, modulation, block: int = 0) -> Tensor:
        """
        光谱自调制残差块：f + conv(relu(ssmm(conv(relu(ssmm(f))))))
        """
        f = as_tensor(f)
        prefix = f'deep.{block}.ssmrb'
        h = self._conv(f'{prefix}.conv1', relu(self.ssmm(f, modulation, f'{prefix}.ssmm1')))
        h = self._conv(f'{prefix}.conv2', relu(self.ssmm(h, modulation, f'{prefix}.ssmm2')))
        return f + h

    def _spectral_branch(self, y_lambda: Tensor) -> Tensor:
        n, h, w, K = y_lambda.shape
        volume = reshape(transpose(y_lambda, (0, 3, 1, 2)), (n, K, h, w, 1))
        parts = []
        for k in self.config.kernel_sizes:
            out = self._conv(f'spectral.k{k}', volume, padding=(0, k // 2, k // 2))
            depth, channels = out.shape[1], out.shape[-1]
            out = transpose(out, (0, 2, 3, 1, 4))
            parts.append(reshape(out, (n, h, w, depth * channels)))
        return relu(self._conv('spectral.fuse', concat(parts, axis=-1)))

    def forward(self, y_s, y_lambda, wavelength_um=None) -> Tensor:
        """
        去噪前向：x̂ = y_s + R(y_s, y_λ)

        Args:
            y_s: h×w 或 N×h×w 目标波段
            y_lambda: h×w×K 或 N×h×w×K 相邻波段窗口
            wavelength_um: 目标波段波长（WM-CNN 使用）

        Returns:
            与 y_s 同形状的去噪结果

        Raises:
            ShapeMismatchError: 输入形状与配置不符（指明出错阶段）
        """
        cfg = self.config
        y_s = as_tensor(y_s)
        y_lambda = as_tensor(y_lambda)

        with _stage('input'):
            if y_s.ndim not in (2, 3) or y_lambda.ndim != y_s.ndim + 1:
                raise ShapeMismatchError(f"y_s {y_s.shape} 与 y_lambda {y_lambda.shape} 维度不匹配")
            if y_lambda.shape[:-1] != y_s.shape:
                raise ShapeMismatchError(f"y_s {y_s.shape} 与 y_lambda {y_lambda.shape} 空间尺寸不一致")
            if y_lambda.shape[-1] != cfg.K:
                raise ShapeMismatchError(f"y_lambda 波段数 {y_lambda.shape[-1]} 与 K={cfg.K} 不符")

        out_shape = y_s.shape
        if y_s.ndim == 2:
            y_s = reshape(y_s, (1,) + y_s.shape)
            y_lambda = reshape(y_lambda, (1,) + y_lambda.shape)
        n, h, w = y_s.shape
        band = reshape(y_s, (n, h, w, 1))

        with _stage('spatial'):
            spatial = relu(concat(
                [self._conv(f'spatial.k{k}', band) for k in cfg.kernel_sizes], axis=-1
            ))
        with _stage('spectral'):
            spectral = self._spectral_branch(y_lambda)

        taps: Dict[str, Tensor] = {}
        with _stage('entry'):
            taps['branch'] = concat([spatial, spectral], axis=-1)
            taps['entry'] = relu(self._conv('entry', taps['branch']))

        with _stage('modulation'):
            modulation = modulation_input(cfg.variant, y_lambda, wavelength_um)

        f = taps['entry']
        for r in range(cfg.ssmrb_count):
            with _stage(f'deep.{r}'):
                f = relu(self._conv(f'deep.{r}.conv', f))
                f = self.ssmrb(f, modulation, block=r)
            taps[f'deep{r}'] = f

        with _stage('output'):
            skip = concat([self._conv(f'skip.{name}', taps[name]) for name in used_taps(cfg)], axis=-1)
            residual = self._conv('output', skip)
            x_hat = y_s + reshape(residual, (n, h, w))

        return reshape(x_hat, out_shape)

    __call__ = forward

    def predict(self, y_s: np.ndarray, y_lambda: np.ndarray, wavelength_um=None) -> np.ndarray:
        """不记录计算图的推理，返回数组"""
        with no_grad():
            return self.forward(y_s, y_lambda, wavelength_um).data

    # ==================== 描述 ====================

    def summary(self) -> List[Dict]:
        """逐参数的形状与元素数"""
        return [
            {'name': name, 'shape': tuple(p.shape), 'count': p.size}
            for name, p in self.params.items()
        ]

    def summary_text(self) -> str:
        """结构与参数量报告（附参考参数量对照）"""
        cfg = self.config
        lines = [
            f"variant: {cfg.variant.value}",
            f"K={cfg.K} C={cfg.C} SSMRB={cfg.ssmrb_count} skip_taps={cfg.tap_count} "
            f"taps={','.join(used_taps(cfg))} modulation_channels={cfg.modulation_channels}",
            "",
        ]
        width = max(len(row['name']) for row in self.summary())
        for row in self.summary():
            shape = '×'.join(str(d) for d in row['shape'])
            lines.append(f"{row['name']:<{width}}  {shape:<20} {format_number(row['count'])}")
        lines.append("")
        lines.append(f"total: {format_number(self.count_params())}")
        reference = app_config.REFERENCE_PARAM_COUNTS.get(cfg.variant.value)
        if reference is not None:
            lines.append(f"reference: {format_number(reference)}")
        for name, count in app_config.REFERENCE_PARAM_COUNTS.items():
            lines.append(f"  {name:<10} {format_number(count)}")
        return "\n".join(lines)


def count_params(target: Union[SMCNN, ModelConfig]) -> int:
    """
    参数元素总数

    Args:
        target: 模型，或仅凭结构配置计算（无需初始化）
    """
    if isinstance(target, ModelConfig):
        return sum(int(np.prod(spec.shape)) for spec in layout(target))
    return target.count_params()


def build(config: ModelConfig, init_seed: int = 0) -> SMCNN:
    return SMCNN.build(config, init_seed)
