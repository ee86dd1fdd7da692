"""
训练与推理
功能：平均绝对误差目标、Adam 优化器、按样本流的小批量训练循环，
以及全立方体的分块、逐波段推理
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from models.hsi_cube import HsiCube
from models.model_config import ModelConfig
from models.noise_spec import NoiseSpec
from models.train_config import TrainConfig, TrainLog
from utils.device_utils import resolve_thread_count
from utils.file_utils import ensure_dir
from utils.format_utils import format_metric, format_time
from utils.logger import get_logger
from .checkpoint import quantize_state, save_checkpoint
from .exceptions import NumericFailureError, PipelineError, SMCNNError, TrainingError
from .hsi_pipeline import HsiPipeline, flip_pad_spectral, patch_grid, spectral_window
from .metrics import mean_psnr, psnr
from .noise_lab import NoiseLab
from .sm_cnn import SMCNN
from .tensor import Tensor, absolute, as_tensor, backward, no_grad, tensor_sum

logger = get_logger(__name__)

BEST_CHECKPOINT = "best.smckpt"
LAST_CHECKPOINT = "last.smckpt"

# 推理时每次前向的切块数上限
INFERENCE_CHUNK = 64


# ==================== 损失 ====================

def loss(preds: Union[Tensor, Sequence], targets: Union[Tensor, np.ndarray, Sequence]) -> Tensor:
    """
    平均绝对误差目标 (1 / 2N) Σ ‖pred_i − x_i‖₁

    Args:
        preds: N×h×w 张量，或 N 个 h×w 预测组成的列表
        targets: 与 preds 对应的干净波段

    Returns:
        标量张量

    Raises:
        TrainingError: 预测与目标个数或形状不一致
    """
    if isinstance(preds, Tensor):
        targets = as_tensor(targets)
        if preds.shape != targets.shape:
            raise TrainingError(f"预测形状 {preds.shape} 与目标形状 {targets.shape} 不一致")
        count = preds.shape[0] if preds.ndim == 3 else 1
        return tensor_sum(absolute(preds - targets)) / (2.0 * count)

    preds = list(preds)
    targets = list(targets)
    if len(preds) != len(targets):
        raise TrainingError(f"预测个数 {len(preds)} 与目标个数 {len(targets)} 不一致")
    if not preds:
        raise TrainingError("损失计算需要至少一个样本")

    total = None
    for index, (pred, target) in enumerate(zip(preds, targets)):
        pred, target = as_tensor(pred), as_tensor(target)
        if pred.shape != target.shape:
            raise TrainingError(f"第 {index} 个预测形状 {pred.shape} 与目标 {target.shape} 不一致")
        term = tensor_sum(absolute(pred - target))
        total = term if total is None else total + term
    return total / (2.0 * len(preds))


# ==================== Adam ====================

@dataclass
class AdamState:
    """Adam 一阶 / 二阶矩与步数"""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, Optional[np.ndarray]],
              state: AdamState, config: TrainConfig) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    带偏差修正的 Adam 单步更新（纯函数，不修改输入）

    Args:
        params: 名称 → 参数数组
        grads: 名称 → 梯度（None 视为零梯度）
        state: 当前状态
        config: 提供 lr / beta1 / beta2 / eps

    Returns:
        (新参数, 新状态)
    """
    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1 ** t
    correction2 = 1.0 - b2 ** t

    new_params: Dict[str, np.ndarray] = {}
    new_m: Dict[str, np.ndarray] = {}
    new_v: Dict[str, np.ndarray] = {}
    for name, value in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(value)
        elif grad.shape != value.shape:
            raise TrainingError(f"参数 {name} 的梯度形状 {grad.shape} 与参数 {value.shape} 不符")

        m = b1 * state.m.get(name, 0.0) + (1.0 - b1) * grad
        v = b2 * state.v.get(name, 0.0) + (1.0 - b2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        new_params[name] = value - config.lr * m_hat / (np.sqrt(v_hat) + config.eps)
        new_m[name] = m
        new_v[name] = v

    return new_params, AdamState(m=new_m, v=new_v, t=t)


class Adam:
    """绑定到模型参数的 Adam 优化器"""

    def __init__(self, model: SMCNN, config: TrainConfig):
        self.model = model
        self.config = config
        self.state = AdamState()

    def step(self):
        """用当前 .grad 更新参数（替换数组，不原地修改）"""
        params = {name: p.data for name, p in self.model.named_parameters()}
        grads = {name: p.grad for name, p in self.model.named_parameters()}
        updated, self.state = adam_step(params, grads, self.state, self.config)
        for name, p in self.model.named_parameters():
            p.data = updated[name]


# ==================== 推理 ====================

def denoise_cube(model: SMCNN, noisy: HsiCube, threads: Optional[int] = None,
                 show_progress: bool = False) -> HsiCube:
    """
    全立方体去噪

    光谱翻转补齐后逐波段处理：空间上以 h/2 步长切块，前向后对重叠区域取均值。
    波段数不受训练时的 B 限制。

    Args:
        model: 模型
        noisy: 含噪立方体
        threads: 并行波段数上限（None / 0 表示按 CPU 核数）
        show_progress: 是否显示进度条

    Returns:
        同尺寸的去噪立方体

    Raises:
        PipelineError: 空间尺寸小于切块或 K/2 > B
    """
    cfg = model.config
    size = cfg.patch_size
    if noisy.rows < size or noisy.cols < size:
        raise PipelineError(
            f"空间尺寸 {noisy.rows}×{noisy.cols} 小于切块 {size}×{size}, "
            f"请先将立方体补齐（如镜像填充）到至少 {size}×{size}"
        )
    if cfg.K // 2 > noisy.bands:
        raise PipelineError(f"模型 K={cfg.K} 要求至少 {cfg.K // 2} 个波段, 立方体只有 {noisy.bands} 个")

    padded = flip_pad_spectral(noisy, cfg.K)
    origins = patch_grid(noisy.rows, noisy.cols, size, max(1, size // 2))
    workers = resolve_thread_count(threads)
    logger.info(
        f"开始去噪: {noisy.rows}×{noisy.cols}×{noisy.bands}, {len(origins)} 个切块/波段, {workers} 个线程"
    )

    def denoise_band(index: int) -> Tuple[int, np.ndarray]:
        y_s, y_lambda = spectral_window(padded, index, cfg.K)
        wavelength = noisy.wavelength(index)
        mean = np.zeros((noisy.rows, noisy.cols))
        count = np.zeros((noisy.rows, noisy.cols))

        with no_grad():
            for start in range(0, len(origins), INFERENCE_CHUNK):
                chunk = origins[start:start + INFERENCE_CHUNK]
                ys = np.stack([y_s[r:r + size, c:c + size] for r, c in chunk])
                yl = np.stack([y_lambda[r:r + size, c:c + size, :] for r, c in chunk])
                preds = model.forward(ys, yl, wavelength).data
                # 增量均值：相同预测叠加后结果不变
                for (r, c), pred in zip(chunk, preds):
                    view_count = count[r:r + size, c:c + size]
                    view_mean = mean[r:r + size, c:c + size]
                    view_count += 1.0
                    view_mean += (pred - view_mean) / view_count
        return index, mean

    output = np.empty(noisy.shape)
    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(denoise_band, b) for b in range(noisy.bands)]
        progress = tqdm(as_completed(futures), total=len(futures), desc="去噪",
                        unit="band", disable=not show_progress, leave=False)
        for future in progress:
            index, band = future.result()
            output[:, :, index] = band
            logger.debug(f"波段 {index} 去噪完成")

    logger.info(f"去噪完成, 用时 {format_time(time.perf_counter() - started, 'verbose')}")
    return noisy.with_data(output, name=f"{noisy.name}_denoised" if noisy.name else "denoised")


# ==================== 训练 ====================

class Trainer:
    """SM-CNN 训练器"""

    def __init__(self, model_config: ModelConfig, train_config: TrainConfig,
                 noise_spec: Optional[NoiseSpec] = None, show_progress: bool = True):
        """
        初始化训练器

        Args:
            model_config: 网络结构配置
            train_config: 训练配置
            noise_spec: 噪声配置（train 未提供含噪立方体时使用）
            show_progress: 是否显示进度条
        """
        model_config.validate()
        train_config.validate()
        self.model_config = model_config
        self.train_config = train_config
        self.noise_spec = noise_spec
        self.show_progress = show_progress
        self.pipeline = HsiPipeline(
            K=model_config.K,
            patch_size=model_config.patch_size,
            stride=train_config.stride,
            augment=True,
        )

        logger.info(
            f"训练器初始化: variant={model_config.variant.value}, lr={train_config.lr}, "
            f"batch={train_config.batch}, epochs={train_config.epochs}, "
            f"max_steps={train_config.max_steps or '∞'}, seed={train_config.seed}"
        )

    # ==================== 数据划分 ====================

    def split(self, noisy: HsiCube, clean: HsiCube) -> Tuple[Tuple[HsiCube, HsiCube], Tuple[HsiCube, HsiCube]]:
        """
        按列划出验证区域（立方体右侧）

        验证区域或剩余训练区域窄于切块时退回到整块立方体同时用于训练与验证。

        Returns:
            ((训练含噪, 训练干净), (验证含噪, 验证干净))
        """
        size = self.model_config.patch_size
        fraction = self.train_config.validation_fraction
        held_out = int(round(clean.cols * fraction))

        if fraction > 0 and held_out >= size and clean.cols - held_out >= size:
            boundary = clean.cols - held_out
            rows = slice(0, clean.rows)
            train = (noisy.crop(rows, slice(0, boundary)), clean.crop(rows, slice(0, boundary)))
            val = (noisy.crop(rows, slice(boundary, clean.cols)), clean.crop(rows, slice(boundary, clean.cols)))
            logger.info(f"验证区域: 列 [{boundary}, {clean.cols}), 训练区域: 列 [0, {boundary})")
            return train, val

        if fraction > 0:
            logger.warning(
                f"验证区域宽 {held_out} 列, 不足以切出 {size}×{size} 的块, 改用整块立方体验证"
            )
        return (noisy, clean), (noisy, clean)

    # ==================== 验证 ====================

    def validate(self, model: SMCNN, noisy: HsiCube, clean: HsiCube) -> float:
        """在验证区域上做完整推理并返回 MPSNR"""
        denoised = denoise_cube(model, noisy, threads=self.train_config.threads)
        per_band = np.array([psnr(denoised.band(b), clean.band(b)) for b in range(clean.bands)])
        value, _ = mean_psnr(per_band)
        return value

    # ==================== 训练 ====================

    def train(self, clean: HsiCube, noisy: Optional[HsiCube] = None,
              model: Optional[SMCNN] = None) -> Tuple[SMCNN, TrainLog]:
        """
        训练

        Args:
            clean: 干净立方体
            noisy: 含噪立方体（默认按 noise_spec 生成）
            model: 初始模型（默认按 model_config 与 init_seed 构建）

        Returns:
            (验证 MPSNR 最优的模型, 训练日志)

        Raises:
            TrainingError: 样本流为空或配置不一致
            NumericFailureError: 出现 NaN / inf 损失
        """
        cfg = self.train_config
        if noisy is None:
            if self.noise_spec is None:
                raise TrainingError("未提供含噪立方体, 也未提供噪声配置")
            noisy, _ = NoiseLab(self.noise_spec).corrupt(clean)
        if noisy.shape != clean.shape:
            raise TrainingError(f"含噪立方体 {noisy.shape} 与干净立方体 {clean.shape} 尺寸不一致")

        (train_noisy, train_clean), (val_noisy, val_clean) = self.split(noisy, clean)

        try:
            samples = self.pipeline.build_batch(train_noisy, train_clean)
        except PipelineError as e:
            logger.error(f"样本流构建失败: {e}")
            raise TrainingError(f"样本流为空或无法构建: {e}")

        if model is None:
            model = SMCNN.build(self.model_config, cfg.init_seed)
        elif model.config.to_dict() != self.model_config.to_dict():
            raise TrainingError("初始模型的结构配置与训练器配置不一致")

        optimizer = Adam(model, cfg)
        rng = np.random.default_rng(cfg.seed)
        log = TrainLog()
        checkpoint_dir = ensure_dir(cfg.checkpoint_dir) if cfg.checkpoint_dir else None

        steps_per_epoch = math.ceil(len(samples) / cfg.batch)
        total_steps = steps_per_epoch * cfg.epochs
        if cfg.max_steps:
            total_steps = min(total_steps, cfg.max_steps)
        logger.info(
            f"开始训练: {len(samples)} 个样本, 每轮 {steps_per_epoch} 步, 共 {total_steps} 步"
        )

        best_state = model.state_dict()
        step = 0
        started = time.perf_counter()
        progress = tqdm(total=total_steps, desc="训练", unit="step",
                        disable=not self.show_progress, leave=False)

        try:
            for epoch in range(1, cfg.epochs + 1):
                order = rng.permutation(len(samples))
                for start in range(0, len(samples), cfg.batch):
                    if cfg.max_steps and step >= cfg.max_steps:
                        break
                    batch = samples.take(order[start:start + cfg.batch])

                    model.zero_grad()
                    preds = model.forward(batch.y_s, batch.y_lambda, batch.wavelength_um)
                    objective = loss(preds, batch.x_s)
                    value = objective.item()
                    if not math.isfinite(value):
                        logger.error(f"第 {step + 1} 步损失为 {value}, 终止训练")
                        raise NumericFailureError(f"第 {step + 1} 步 (epoch {epoch}) 损失非有限: {value}")

                    backward(objective)
                    optimizer.step()

                    step += 1
                    log.append(step=step, epoch=epoch, loss=value,
                               seconds=time.perf_counter() - started)
                    progress.update(1)
                    progress.set_postfix(epoch=epoch, loss=f"{value:.5f}")

                reached_cap = bool(cfg.max_steps) and step >= cfg.max_steps
                last_epoch = epoch == cfg.epochs or reached_cap
                if log.records and (epoch % cfg.validate_every == 0 or last_epoch):
                    self._validate_epoch(model, log, epoch, val_noisy, val_clean, checkpoint_dir)
                    if log.best_epoch == epoch:
                        best_state = quantize_state(model.state_dict())

                if reached_cap:
                    logger.info(f"达到 max_steps={cfg.max_steps}, 提前结束")
                    break
        except SMCNNError:
            raise
        except Exception as e:
            logger.error(f"训练过程中出现异常: {e}")
            raise TrainingError(f"训练失败: {e}")
        finally:
            progress.close()

        log.wall_time = time.perf_counter() - started
        if checkpoint_dir is not None:
            save_checkpoint(model, checkpoint_dir / LAST_CHECKPOINT)

        # 返回的模型与检查点中的 float32 参数逐位一致
        model.load_state_dict(best_state if log.best_epoch > 0 else quantize_state(model.state_dict()))
        logger.info(
            f"训练完成: {step} 步, 用时 {format_time(log.wall_time, 'verbose')}, "
            f"最优 epoch {log.best_epoch} (MPSNR={format_metric(log.best_mpsnr)})"
        )
        return model, log

    def _validate_epoch(self, model: SMCNN, log: TrainLog, epoch: int,
                        val_noisy: HsiCube, val_clean: HsiCube,
                        checkpoint_dir: Optional[Path]):
        value = self.validate(model, val_noisy, val_clean)
        log.set_validation(value)
        recent = log.losses[-min(len(log.losses), 10):]
        logger.info(
            f"epoch {epoch}: loss={np.mean(recent):.6f}, 验证 MPSNR={format_metric(value)}"
        )
        if value > log.best_mpsnr:
            log.best_mpsnr = value
            log.best_epoch = epoch
            if checkpoint_dir is not None:
                save_checkpoint(model, checkpoint_dir / BEST_CHECKPOINT)


def train(clean_cube: HsiCube, noise_spec: NoiseSpec, model_config: ModelConfig,
          train_config: TrainConfig, show_progress: bool = True) -> Tuple[SMCNN, TrainLog]:
    """按噪声配置生成训练数据并训练，返回 (模型, 训练日志)"""
    trainer = Trainer(model_config, train_config, noise_spec, show_progress=show_progress)
    return trainer.train(clean_cube)
