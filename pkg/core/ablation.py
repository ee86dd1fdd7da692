"""
消融实验
功能：在同一份含噪数据上扫描光谱窗口宽度 K、跳连接数量与网络变体，
逐项训练、去噪、评价，汇总为 MPSNR 表
"""

import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from models.hsi_cube import HsiCube
from models.model_config import ModelConfig, Variant
from models.noise_spec import NoiseSpec
from models.train_config import TrainConfig
from utils.file_utils import ensure_dir, ensure_parent
from utils.format_utils import format_metric, format_time
from utils.logger import get_logger
from .exceptions import ModelConfigError
from .metrics import report
from .noise_lab import NoiseLab
from .sm_cnn import count_params
from .trainer import Trainer, denoise_cube

logger = get_logger(__name__)

STUDIES = ('K', 'skip_taps', 'variant')
DEFAULT_K_VALUES = (2, 4, 6, 8)

COLUMNS = ['study', 'setting', 'variant', 'K', 'skip_taps', 'params',
           'steps', 'final_loss', 'mpsnr', 'mssim', 'sam']

# 基线行：未经去噪的含噪输入
BASELINE_STUDY = 'baseline'


@dataclass
class AblationResult:
    """消融结果（每个设置一行）"""

    rows: List[Dict] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=COLUMNS)

    def save_csv(self, path: str):
        ensure_parent(path)
        self.to_frame().to_csv(path, index=False, float_format='%.10g')

    def baseline_mpsnr(self) -> float:
        for row in self.rows:
            if row['study'] == BASELINE_STUDY:
                return row['mpsnr']
        return math.nan

    def study(self, name: str) -> pd.DataFrame:
        frame = self.to_frame()
        return frame[frame['study'] == name].reset_index(drop=True)

    def best(self, name: str) -> Optional[Dict]:
        """某项研究中 MPSNR 最高的设置"""
        frame = self.study(name)
        if frame.empty:
            return None
        return frame.loc[frame['mpsnr'].idxmax()].to_dict()


def parse_k_values(text: str) -> Tuple[int, ...]:
    """
    解析逗号分隔的 K 列表，如 "2,4,8"

    Raises:
        ModelConfigError: 取值非法
    """
    try:
        values = tuple(int(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise ModelConfigError(f"K 列表格式非法: {text!r}")
    if not values:
        raise ModelConfigError("K 列表为空")
    for k in values:
        if k < 2 or k % 2:
            raise ModelConfigError(f"K 必须为 ≥2 的偶数, 当前 {k}")
    return values


class AblationRunner:
    """
    消融实验执行器

    所有设置共用同一份含噪立方体、训练配置与随机种子，只改变被研究的结构参数
    """

    def __init__(self, model_config: ModelConfig, train_config: TrainConfig,
                 noise_spec: NoiseSpec, k_values: Sequence[int] = DEFAULT_K_VALUES,
                 threads: Optional[int] = None, checkpoint_root: Optional[str] = None,
                 show_progress: bool = False):
        """
        初始化执行器

        Args:
            model_config: 基准网络配置（非研究维度取自此配置）
            train_config: 每个设置共用的训练配置
            noise_spec: 噪声配置
            k_values: K 研究扫描的取值
            threads: 推理线程数
            checkpoint_root: 检查点根目录（每个设置一个子目录）；None 表示不保存
            show_progress: 是否显示训练进度条
        """
        model_config.validate()
        self.model_config = model_config
        self.train_config = train_config
        self.noise_spec = noise_spec
        self.k_values = tuple(k_values)
        self.threads = threads
        self.checkpoint_root = Path(checkpoint_root) if checkpoint_root else None
        self.show_progress = show_progress

    # ==================== 设置枚举 ====================

    def _with(self, **changes) -> ModelConfig:
        return ModelConfig.from_dict(dict(self.model_config.to_dict(), **changes))

    def settings(self, study: str) -> List[Tuple[str, ModelConfig]]:
        """
        某项研究的 (标签, 网络配置) 列表

        Raises:
            ModelConfigError: 未知研究或非法取值
        """
        if study == 'K':
            return [(f"K={k}", self._with(K=k, variant=Variant.SMCNN)) for k in self.k_values]
        if study == 'skip_taps':
            base = self._with(variant=Variant.SMCNN)
            return [(f"taps={n}", self._with(variant=Variant.SMCNN, skip_taps=n))
                    for n in range(1, base.available_taps + 1)]
        if study == 'variant':
            return [(v.value, self._with(variant=v)) for v in (Variant.WMCNN, Variant.SMCNNLITE, Variant.SMCNN)]
        raise ModelConfigError(f"未知的消融研究: {study}（可选 {', '.join(STUDIES)}）")

    # ==================== 执行 ====================

    def run_setting(self, study: str, label: str, model_config: ModelConfig,
                    clean: HsiCube, noisy: HsiCube) -> Dict:
        """训练、去噪并评价单个设置"""
        start = time.time()
        checkpoint_dir = None
        if self.checkpoint_root is not None:
            checkpoint_dir = str(ensure_dir(self.checkpoint_root / f"{study}_{label.replace('=', '')}"))
        train_config = replace(self.train_config, checkpoint_dir=checkpoint_dir)

        trainer = Trainer(model_config, train_config, self.noise_spec, show_progress=self.show_progress)
        model, log = trainer.train(clean, noisy)
        result = report(denoise_cube(model, noisy, threads=self.threads), clean)

        logger.info(f"消融 [{study}] {label}: {result.summary_line()}, 耗时 {format_time(time.time() - start, 'verbose')}")
        return {
            'study': study,
            'setting': label,
            'variant': model_config.variant.value,
            'K': model_config.K,
            'skip_taps': model_config.tap_count,
            'params': count_params(model_config),
            'steps': len(log.records),
            'final_loss': log.losses[-1] if log.records else math.nan,
            'mpsnr': result.mpsnr,
            'mssim': result.mssim,
            'sam': result.sam_mean,
        }

    def run(self, clean: HsiCube, studies: Sequence[str] = STUDIES,
            noisy: Optional[HsiCube] = None) -> AblationResult:
        """
        执行消融实验

        Args:
            clean: 干净立方体
            studies: 要执行的研究
            noisy: 含噪立方体；None 时按噪声配置生成一次并在所有设置间共用

        Returns:
            消融结果（首行为含噪输入的基线）
        """
        plan = [(study, label, cfg) for study in studies for label, cfg in self.settings(study)]
        if noisy is None:
            noisy, _ = NoiseLab(self.noise_spec).corrupt(clean)

        baseline = report(noisy, clean)
        result = AblationResult(rows=[{
            'study': BASELINE_STUDY, 'setting': 'noisy', 'variant': '', 'K': 0, 'skip_taps': 0,
            'params': 0, 'steps': 0, 'final_loss': math.nan,
            'mpsnr': baseline.mpsnr, 'mssim': baseline.mssim, 'sam': baseline.sam_mean,
        }])
        logger.info(f"消融实验开始: {len(plan)} 个设置, 含噪基线 MPSNR={format_metric(baseline.mpsnr, 3)}")

        for index, (study, label, cfg) in enumerate(plan, start=1):
            logger.info(f"[{index}/{len(plan)}] {study}: {label}")
            result.rows.append(self.run_setting(study, label, cfg, clean, noisy))

        for study in studies:
            best = result.best(study)
            if best is not None:
                logger.info(f"研究 {study} 最优设置: {best['setting']} (MPSNR={format_metric(best['mpsnr'], 3)})")
        return result


def run_ablation(clean: HsiCube, noise_spec: NoiseSpec, model_config: ModelConfig,
                 train_config: TrainConfig, studies: Sequence[str] = STUDIES,
                 k_values: Sequence[int] = DEFAULT_K_VALUES, threads: Optional[int] = None) -> AblationResult:
    """按噪声配置生成含噪数据并执行消融实验"""
    runner = AblationRunner(model_config, train_config, noise_spec, k_values=k_values, threads=threads)
    return runner.run(clean, studies)
