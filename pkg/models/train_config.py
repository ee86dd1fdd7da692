"""
训练配置与训练日志模型
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import pandas as pd

from core.exceptions import TrainingError
from utils.file_utils import ensure_parent


@dataclass
class TrainConfig:
    """训练配置"""

    lr: float = 1e-4
    batch: int = 128
    epochs: int = 100
    seed: int = 0
    init_seed: int = 0
    validation_fraction: float = 0.2
    validate_every: int = 1
    max_steps: int = 0          # 0 表示不限制
    stride: int = 10
    checkpoint_dir: Optional[str] = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    threads: int = 0            # 0 表示按 CPU 核数

    def __post_init__(self):
        self.validate()

    def validate(self):
        """
        校验配置

        Raises:
            TrainingError: 配置非法
        """
        if not self.lr > 0:
            raise TrainingError(f"lr 必须为正, 当前 {self.lr}")
        if self.batch < 1:
            raise TrainingError(f"batch 必须 ≥ 1, 当前 {self.batch}")
        if self.epochs < 1:
            raise TrainingError(f"epochs 必须 ≥ 1, 当前 {self.epochs}")
        if not 0 <= self.validation_fraction < 1:
            raise TrainingError(f"validation_fraction 必须位于 [0, 1), 当前 {self.validation_fraction}")
        if self.validate_every < 1 or self.stride < 1 or self.max_steps < 0:
            raise TrainingError("validate_every / stride 必须为正, max_steps 不能为负")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise TrainingError(f"Adam 参数非法: beta1={self.beta1}, beta2={self.beta2}, eps={self.eps}")

    def to_dict(self) -> Dict:
        """转换为字典"""
        return {
            'lr': self.lr,
            'batch': self.batch,
            'epochs': self.epochs,
            'seed': self.seed,
            'init_seed': self.init_seed,
            'validation_fraction': self.validation_fraction,
            'validate_every': self.validate_every,
            'max_steps': self.max_steps,
            'stride': self.stride,
            'checkpoint_dir': self.checkpoint_dir,
            'beta1': self.beta1,
            'beta2': self.beta2,
            'eps': self.eps,
            'threads': self.threads,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'TrainConfig':
        """从字典创建"""
        return cls(
            lr=float(data.get('lr', 1e-4)),
            batch=int(data.get('batch', 128)),
            epochs=int(data.get('epochs', 100)),
            seed=int(data.get('seed', 0)),
            init_seed=int(data.get('init_seed', 0)),
            validation_fraction=float(data.get('validation_fraction', 0.2)),
            validate_every=int(data.get('validate_every', 1)),
            max_steps=int(data.get('max_steps', 0)),
            stride=int(data.get('stride', 10)),
            checkpoint_dir=data.get('checkpoint_dir') or None,
            beta1=float(data.get('beta1', 0.9)),
            beta2=float(data.get('beta2', 0.999)),
            eps=float(data.get('eps', 1e-8)),
            threads=int(data.get('threads', 0)),
        )


@dataclass
class TrainRecord:
    """单步训练记录"""

    step: int
    epoch: int
    loss: float
    seconds: float
    val_mpsnr: float = math.nan


@dataclass
class TrainLog:
    """训练日志（每个优化步一条记录）"""

    records: List[TrainRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_mpsnr: float = -math.inf
    wall_time: float = 0.0

    def append(self, step: int, epoch: int, loss: float, seconds: float):
        if self.records and step <= self.records[-1].step:
            raise TrainingError(f"训练步序号必须单调递增: {self.records[-1].step} -> {step}")
        self.records.append(TrainRecord(step=step, epoch=epoch, loss=loss, seconds=seconds))

    def set_validation(self, mpsnr: float):
        """将验证 MPSNR 记在当前最后一步上"""
        if not self.records:
            raise TrainingError("尚无训练记录, 无法写入验证结果")
        self.records[-1].val_mpsnr = mpsnr

    @property
    def losses(self) -> List[float]:
        return [r.loss for r in self.records]

    @property
    def validations(self) -> Dict[int, float]:
        """epoch -> 验证 MPSNR"""
        return {r.epoch: r.val_mpsnr for r in self.records if not math.isnan(r.val_mpsnr)}

    def to_frame(self) -> pd.DataFrame:
        # 不含耗时列：同种子的两次运行写出逐字节相同的 CSV
        return pd.DataFrame(
            [(r.step, r.epoch, r.loss, r.val_mpsnr) for r in self.records],
            columns=['step', 'epoch', 'loss', 'val_mpsnr'],
        )

    def save_csv(self, path: str):
        ensure_parent(path)
        self.to_frame().to_csv(path, index=False, float_format='%.10g')

    @classmethod
    def load_csv(cls, path: str) -> 'TrainLog':
        frame = pd.read_csv(path)
        log = cls()
        for row in frame.itertuples(index=False):
            log.records.append(TrainRecord(
                step=int(row.step), epoch=int(row.epoch), loss=float(row.loss),
                seconds=0.0, val_mpsnr=float(row.val_mpsnr),
            ))
        return log

    def to_dict(self) -> Dict:
        """转换为字典（摘要）"""
        return {
            'steps': len(self.records),
            'initial_loss': self.records[0].loss if self.records else None,
            'final_loss': self.records[-1].loss if self.records else None,
            'best_epoch': self.best_epoch,
            'best_mpsnr': self.best_mpsnr,
            'wall_time': self.wall_time,
        }
