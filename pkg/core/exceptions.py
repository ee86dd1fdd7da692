"""
核心模块异常定义
"""


class SMCNNError(Exception):
    """核心模块基础异常"""
    pass


# ==================== 张量 / 自动微分 ====================

class TensorError(SMCNNError):
    """张量运算异常"""
    pass


class ShapeMismatchError(TensorError):
    """形状不匹配"""
    pass


class AutodiffError(TensorError):
    """反向传播异常"""
    pass


# ==================== 数据立方体 ====================

class CubeError(SMCNNError):
    """立方体数据异常（非有限值、无法缩放等）"""
    pass


class CubeFormatError(SMCNNError):
    """.hcube 文件格式异常"""
    pass


class BadMagicError(CubeFormatError):
    """文件头魔数错误"""
    pass


class TruncatedPayloadError(CubeFormatError):
    """文件被截断"""
    pass


class DimensionMismatchError(CubeFormatError):
    """数据量与文件头维度不符"""
    pass


class DimensionOverflowError(CubeFormatError):
    """维度非法或溢出"""
    pass


class PipelineError(SMCNNError):
    """数据流水线异常"""
    pass


# ==================== 噪声 ====================

class NoiseSpecError(SMCNNError):
    """噪声配置异常"""
    pass


# ==================== 模型 / 训练 ====================

class ModelConfigError(SMCNNError):
    """模型配置异常"""
    pass


class CheckpointError(SMCNNError):
    """检查点读写异常"""
    pass


class TrainingError(SMCNNError):
    """训练异常"""
    pass


class NumericFailureError(TrainingError):
    """数值失败（NaN / inf 损失）"""
    pass


# ==================== 评价 / 配置 ====================

class MetricError(SMCNNError):
    """评价指标异常"""
    pass


class RunConfigError(SMCNNError):
    """运行配置异常"""
    pass
