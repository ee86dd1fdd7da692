"""
核心功能模块
"""

from .exceptions import SMCNNError
from .tensor import Tensor, backward, no_grad
from .conv import conv2d, conv3d

__all__ = [
    'SMCNNError',
    'Tensor',
    'backward',
    'no_grad',
    'conv2d',
    'conv3d',
]
