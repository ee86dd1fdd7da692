"""
数据模型
"""

from .hsi_cube import HsiCube
from .patch_sample import PatchSample, SampleBatch
from .noise_spec import NoiseCase, NoiseSpec, NoiseEvent, NoiseLog
from .model_config import ModelConfig, Variant
from .train_config import TrainConfig, TrainLog, TrainRecord
from .metric_report import MetricReport
from .run_config import RunConfig

__all__ = [
    'HsiCube',
    'PatchSample',
    'SampleBatch',
    'NoiseCase',
    'NoiseSpec',
    'NoiseEvent',
    'NoiseLog',
    'ModelConfig',
    'Variant',
    'TrainConfig',
    'TrainLog',
    'TrainRecord',
    'MetricReport',
    'RunConfig',
]
