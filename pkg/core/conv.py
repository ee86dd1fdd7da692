"""
卷积运算
功能：2D / 3D 互相关（不翻转卷积核），基于 im2col + 单次矩阵乘，支持反向传播
"""

from typing import Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import ShapeMismatchError
from .tensor import Tensor, record_op

Padding = Union[str, int, Sequence[int]]


def _resolve_padding(padding: Padding, kernel_dims: Tuple[int, ...],
                     stride: int, op: str) -> Tuple[int, ...]:
    """将 padding 参数解析为每个空间轴两侧的补零数"""
    rank = len(kernel_dims)

    if isinstance(padding, str):
        if padding == 'same':
            if stride != 1:
                raise ShapeMismatchError(f"{op}: 'same' 补零只支持 stride=1, 当前 stride={stride}")
            even = [k for k in kernel_dims if k % 2 == 0]
            if even:
                raise ShapeMismatchError(f"{op}: 'same' 补零要求奇数卷积核, 当前 {kernel_dims}")
            return tuple(k // 2 for k in kernel_dims)
        if padding == 'valid':
            return (0,) * rank
        raise ShapeMismatchError(f"{op}: 不支持的补零方式 {padding!r}")

    if isinstance(padding, int):
        pads = (padding,) * rank
    else:
        pads = tuple(int(p) for p in padding)
        if len(pads) != rank:
            raise ShapeMismatchError(f"{op}: 补零参数 {pads} 与卷积核维度 {kernel_dims} 不符")

    if any(p < 0 for p in pads):
        raise ShapeMismatchError(f"{op}: 补零不能为负 {pads}")
    return pads


def _conv_nd(x: Tensor, kernel: Tensor, stride: int, padding: Padding, op: str) -> Tensor:
    """
    通用 N 维互相关

    x 形状为 [N×]S1×..×Sd×Cin，kernel 形状为 k1×..×kd×Cin×Cout
    """
    rank = kernel.ndim - 2
    if rank < 1:
        raise ShapeMismatchError(f"{op}: 卷积核形状 {kernel.shape} 非法")
    if x.ndim not in (rank + 1, rank + 2):
        raise ShapeMismatchError(
            f"{op}: 输入形状 {x.shape} 与卷积核形状 {kernel.shape} 的维度不匹配"
        )
    if stride < 1:
        raise ShapeMismatchError(f"{op}: stride 必须为正整数, 当前 {stride}")

    batched = x.ndim == rank + 2
    xb = x.data if batched else x.data[None]
    ksize = kernel.shape[:rank]
    cin, cout = kernel.shape[-2], kernel.shape[-1]

    if xb.shape[-1] != cin:
        raise ShapeMismatchError(
            f"{op}: 输入通道数不匹配, 输入形状 {x.shape}, 卷积核形状 {kernel.shape}"
        )

    pads = _resolve_padding(padding, ksize, stride, op)
    xp = np.pad(xb, [(0, 0)] + [(p, p) for p in pads] + [(0, 0)])

    out_spatial = tuple(
        (xp.shape[1 + i] - ksize[i]) // stride + 1 for i in range(rank)
    )
    if any(n <= 0 for n in out_spatial) or any(
        xp.shape[1 + i] < ksize[i] for i in range(rank)
    ):
        raise ShapeMismatchError(
            f"{op}: 输入 {x.shape}（补零 {pads}）小于卷积核 {kernel.shape}"
        )

    batch = xb.shape[0]
    windows = sliding_window_view(xp, ksize, axis=tuple(range(1, rank + 1)))
    windows = windows[(slice(None),) + (slice(None, None, stride),) * rank]
    # N × o1..od × Cin × k1..kd  ->  N × o1..od × k1..kd × Cin
    perm = (0,) + tuple(range(1, rank + 1)) + tuple(range(rank + 2, 2 * rank + 2)) + (rank + 1,)
    cols = windows.transpose(perm).reshape(batch * int(np.prod(out_spatial)), -1)
    weights = kernel.data.reshape(-1, cout)

    out = (cols @ weights).reshape((batch,) + out_spatial + (cout,))
    if not batched:
        out = out[0]

    def _backward(g, needs):
        g_flat = g.reshape(-1, cout)
        grad_x = grad_k = None

        if needs[1]:
            grad_k = (cols.T @ g_flat).reshape(kernel.shape)

        if needs[0]:
            dcols = (g_flat @ weights.T).reshape((batch,) + out_spatial + ksize + (cin,))
            grad_xp = np.zeros(xp.shape)
            lead = (slice(None),) * (rank + 1)
            for offsets in np.ndindex(*ksize):
                target = (slice(None),) + tuple(
                    slice(o, o + stride * (n - 1) + 1, stride)
                    for o, n in zip(offsets, out_spatial)
                ) + (slice(None),)
                grad_xp[target] += dcols[lead + offsets + (slice(None),)]
            crop = (slice(None),) + tuple(
                slice(p, p + s) for p, s in zip(pads, xb.shape[1:-1])
            ) + (slice(None),)
            grad_x = grad_xp[crop]
            if not batched:
                grad_x = grad_x[0]

        return grad_x, grad_k

    return record_op(out, (x, kernel), op, _backward)


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: Padding = 'same') -> Tensor:
    """
    2D 互相关

    Args:
        x: H×W×Cin 或 N×H×W×Cin
        kernel: k×k×Cin×Cout
        stride: 步长
        padding: 'same' | 'valid' | int | (ph, pw)

    Returns:
        H'×W'×Cout（或带批次维）

    Raises:
        ShapeMismatchError: 通道数或维度不匹配
    """
    if kernel.ndim != 4:
        raise ShapeMismatchError(f"conv2d: 卷积核应为 k×k×Cin×Cout, 当前 {kernel.shape}")
    return _conv_nd(x, kernel, stride, padding, 'conv2d')


def conv3d(x: Tensor, kernel: Tensor, stride: int = 1, padding: Padding = 'same') -> Tensor:
    """
    3D 互相关

    Args:
        x: D×H×W×Cin 或 N×D×H×W×Cin
        kernel: kd×kh×kw×Cin×Cout
        stride: 步长
        padding: 'same' | 'valid' | int | (pd, ph, pw)

    Returns:
        D'×H'×W'×Cout（或带批次维）
    """
    if kernel.ndim != 5:
        raise ShapeMismatchError(f"conv3d: 卷积核应为 kd×kh×kw×Cin×Cout, 当前 {kernel.shape}")
    return _conv_nd(x, kernel, stride, padding, 'conv3d')
