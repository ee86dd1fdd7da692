"""
测试公共夹具
"""

import os

os.environ.setdefault("SMCNN_LOG_TO_FILE", "0")
os.environ.setdefault("SMCNN_LOG_LEVEL", "WARNING")

import hypothesis
import numpy as np
import pytest

from core.synthetic import make_synthetic_cube
from models.hsi_cube import HsiCube
from models.model_config import ModelConfig
from models.noise_spec import NoiseCase, NoiseSpec

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=15, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=200, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "fast"))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


@pytest.fixture
def tiny_config() -> ModelConfig:
    """梯度检查用的极小网络"""
    return ModelConfig(K=4, C=8, n_ssmrb=2, skip_taps=4, skip_channels=3,
                       branch_channels=2, modulation_channels=6, patch_size=12)


@pytest.fixture
def desk_config() -> ModelConfig:
    return ModelConfig(K=8, C=16, n_ssmrb=2, skip_taps=4, skip_channels=15,
                       branch_channels=8, modulation_channels=64, patch_size=20)


@pytest.fixture
def small_cube() -> HsiCube:
    """32×32×16 平滑端元混合立方体"""
    return make_synthetic_cube(rows=32, cols=32, bands=16, n_endmembers=4, seed=7)


@pytest.fixture
def tiny_cube() -> HsiCube:
    return make_synthetic_cube(rows=24, cols=24, bands=6, n_endmembers=3, seed=3)


@pytest.fixture
def case1_spec() -> NoiseSpec:
    return NoiseSpec(case=NoiseCase.CASE1, seed=11)
