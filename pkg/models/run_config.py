"""
运行配置模型
功能：解析扁平 key = value 配置文件，合并配置档 / 文件 / 命令行覆盖，输出完整解析结果
"""

from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from core.exceptions import RunConfigError
from utils.file_utils import write_text_atomic
import config

from .model_config import ModelConfig
from .noise_spec import NoiseSpec
from .train_config import TrainConfig

# 路径类键（字符串）
PATH_KEYS = ('input', 'output', 'clean', 'checkpoint', 'output_dir', 'checkpoint_dir')


def _build_schema() -> Dict[str, type]:
    schema = {key: type(value) for key, value in config.FULL_PROFILE.items()}
    for key in PATH_KEYS:
        schema[key] = str
    schema['profile'] = str
    return schema


SCHEMA: Dict[str, type] = _build_schema()

_TRUE = {'1', 'true', 'yes', 'on'}
_FALSE = {'0', 'false', 'no', 'off'}


def _coerce(key: str, value: Any) -> Any:
    """按 schema 转换取值类型"""
    if key not in SCHEMA:
        raise RunConfigError(f"未知的配置项: {key}")
    target = SCHEMA[key]
    if not isinstance(value, str):
        if target is float and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, target):
            return value
        value = str(value)

    text = value.strip()
    try:
        if target is bool:
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if target is int:
            return int(text)
        if target is float:
            return float(text)
        return text
    except ValueError:
        raise RunConfigError(f"配置项 {key} 的取值 {value!r} 无法转换为 {target.__name__}")


def parse_config_text(text: str, source: str = '<text>') -> Dict[str, str]:
    """
    解析 key = value 文本

    Args:
        text: 配置文本（# 开头为注释）
        source: 来源名称（用于报错）

    Returns:
        原始字符串字典

    Raises:
        RunConfigError: 格式错误、重复键或未知键
    """
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise RunConfigError(f"{source}:{lineno} 缺少 '=': {raw.strip()}")
        key, value = (part.strip() for part in line.split('=', 1))
        if not key:
            raise RunConfigError(f"{source}:{lineno} 键名为空")
        if key not in SCHEMA:
            raise RunConfigError(f"{source}:{lineno} 未知的配置项: {key}")
        if key in values:
            raise RunConfigError(f"{source}:{lineno} 重复的配置项: {key}")
        values[key] = value
    return values


class RunConfig:
    """
    运行配置

    优先级：配置档 < 配置文件 < 命令行覆盖
    """

    def __init__(self, values: Mapping[str, Any]):
        self.values: Dict[str, Any] = {key: _coerce(key, value) for key, value in values.items()}

    @classmethod
    def resolve(cls,
                profile: Optional[str] = None,
                config_path: Optional[str] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> 'RunConfig':
        """
        合并配置

        Args:
            profile: 配置档名称（desk / full）
            config_path: 配置文件路径
            overrides: 命令行覆盖（值为 None 的项忽略）

        Returns:
            解析后的运行配置

        Raises:
            RunConfigError: 配置档不存在、文件不可读或包含非法项
        """
        file_values: Dict[str, str] = {}
        if config_path:
            path = Path(config_path)
            if not path.is_file():
                raise RunConfigError(f"配置文件不存在: {config_path}")
            file_values = parse_config_text(path.read_text(encoding='utf-8'), str(path))

        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        profile = overrides.get('profile') or file_values.get('profile') or profile or config.DEFAULT_PROFILE
        if profile not in config.PROFILES:
            raise RunConfigError(f"未知的配置档: {profile}（可选 {', '.join(config.PROFILES)}）")

        merged: Dict[str, Any] = dict(config.PROFILES[profile])
        merged['profile'] = profile
        merged.update(file_values)
        for key in overrides:
            if key not in SCHEMA:
                raise RunConfigError(f"未知的配置项: {key}")
        merged.update(overrides)
        return cls(merged)

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    def __getitem__(self, key: str) -> Any:
        if key not in self.values:
            raise RunConfigError(f"缺少配置项: {key}")
        return self.values[key]

    def __contains__(self, key: str) -> bool:
        return key in self.values

    def require(self, *keys: str):
        missing = [k for k in keys if not self.values.get(k)]
        if missing:
            raise RunConfigError(f"缺少必需的配置项: {', '.join(missing)}")

    # ==================== 子配置 ====================

    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec.from_dict(self.values)

    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict(self.values)

    def train_config(self) -> TrainConfig:
        return TrainConfig.from_dict(self.values)

    # ==================== 序列化 ====================

    def to_text(self) -> str:
        lines = ["# resolved run configuration"]
        for key in sorted(self.values):
            value = self.values[key]
            if isinstance(value, bool):
                value = 'true' if value else 'false'
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def save_resolved(self, output_dir: str) -> Path:
        """将完整解析后的配置写到输出目录"""
        return write_text_atomic(Path(output_dir) / config.RESOLVED_CONFIG_NAME, self.to_text())

    def to_dict(self) -> Dict:
        return dict(self.values)
