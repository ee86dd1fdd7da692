"""
全局配置
"""

import os
from pathlib import Path

# ==================== 应用信息 ====================

APP_NAME = "SM-CNN HSI Denoiser"
APP_VERSION = "1.0.0"

BASE_DIR = Path(__file__).resolve().parent

# ==================== 路径 ====================

TEMPLATES_DIR = str(BASE_DIR / "resources" / "templates")
RESOLVED_CONFIG_NAME = "resolved_config.txt"

# ==================== 日志 ====================

LOG_DIR = os.environ.get("SMCNN_LOG_DIR", str(BASE_DIR / "logs"))
LOG_FILE = str(Path(LOG_DIR) / "smcnn.log")
LOG_LEVEL = os.environ.get("SMCNN_LOG_LEVEL", "INFO")
LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{extra[name]}</cyan> - <level>{message}</level>"
)
LOG_MAX_SIZE = 10  # MB
LOG_BACKUP_COUNT = 5
LOG_TO_FILE = os.environ.get("SMCNN_LOG_TO_FILE", "1") == "1"

# ==================== 数值常量 ====================

# 通道归一化稳定项（位于平方根内部）
NORM_DELTA = 1e-5

# 噪声强度以 0-255 刻度给出
NOISE_INTENSITY_SCALE = 255.0

# 参考参数量（NOP，三种变体）
REFERENCE_PARAM_COUNTS = {
    'smcnn': 2_404_361,
    'wmcnn': 1_852_361,
    'smcnnlite': 1_867_241,
}

# 退出码
EXIT_OK = 0
EXIT_GENERIC_ERROR = 1
EXIT_CONFIG_ERROR = 2
EXIT_IO_ERROR = 3
EXIT_NUMERIC_ERROR = 4

# ==================== 运行配置档 ====================

# 完整规模参数
FULL_PROFILE = {
    'case': 'case5',
    'seed': 0,
    'gaussian_sigma_min': 10.0,
    'gaussian_sigma_max': 70.0,
    'band_fraction': 1.0 / 3.0,
    'stripe_col_fraction_min': 0.05,
    'stripe_col_fraction_max': 0.15,
    'stripe_amplitude_min': 0.2,
    'stripe_amplitude_max': 0.8,
    'impulse_density_min': 0.10,
    'impulse_density_max': 0.70,
    'clip_output': False,
    'variant': 'smcnn',
    'K': 24,
    'C': 60,
    'n_ssmrb': 2,
    'skip_taps': 4,
    'skip_channels': 15,
    'branch_channels': 20,
    'modulation_channels': 128,
    'patch_size': 20,
    'stride': 10,
    'init_seed': 0,
    'lr': 1e-4,
    'batch': 128,
    'epochs': 100,
    'max_steps': 0,
    'validation_fraction': 0.2,
    'validate_every': 1,
    'beta1': 0.9,
    'beta2': 0.999,
    'eps': 1e-8,
    'threads': 0,
}

# 桌面规模参数（单机 CPU 可在数分钟内完成）
DESK_PROFILE = dict(
    FULL_PROFILE,
    case='case1',
    K=8,
    C=16,
    modulation_channels=64,
    branch_channels=8,
    skip_channels=15,
    lr=1e-3,
    batch=16,
    epochs=60,
    max_steps=2000,
    validation_fraction=0.0,
    validate_every=5,
)

PROFILES = {
    'desk': DESK_PROFILE,
    'full': FULL_PROFILE,
}

DEFAULT_PROFILE = 'desk'
