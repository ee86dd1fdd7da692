"""
测试辅助函数
"""

from typing import Callable

import numpy as np

from core.tensor import Tensor


def numerical_gradient(fn: Callable[[], float], array: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """中心差分数值梯度（原地扰动 array 后复原）"""
    grad = np.zeros_like(array)
    for index in np.ndindex(array.shape):
        original = array[index]
        array[index] = original + eps
        plus = fn()
        array[index] = original - eps
        minus = fn()
        array[index] = original
        grad[index] = (plus - minus) / (2 * eps)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.abs(a).max(), np.abs(b).max(), 1e-12)
    return float(np.abs(a - b).max() / scale)


def leaf(array, name: str = None) -> Tensor:
    return Tensor(array, requires_grad=True, name=name)
