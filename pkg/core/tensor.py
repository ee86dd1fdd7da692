"""
张量与反向模式自动微分
功能：最小化的N维张量引擎，记录计算图并按拓扑逆序回放求梯度
"""

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from utils.logger import get_logger
from .exceptions import AutodiffError, ShapeMismatchError
import config

logger = get_logger(__name__)

ArrayLike = Union['Tensor', np.ndarray, float, int]

# 反向函数签名: (输出梯度, 各输入是否需要梯度) -> 各输入梯度
BackwardFn = Callable[[np.ndarray, Tuple[bool, ...]], Tuple[Optional[np.ndarray], ...]]

_grad_state = threading.local()


def is_grad_enabled() -> bool:
    """当前线程是否记录计算图"""
    return getattr(_grad_state, 'enabled', True)


@contextmanager
def no_grad():
    """
    关闭当前线程的计算图记录（推理路径使用）
    """
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


@dataclass(eq=False)
class Node:
    """计算图节点"""

    op: str
    inputs: Tuple['Tensor', ...]
    backward_fn: BackwardFn
    saved: Dict = field(default_factory=dict)


class Tensor:
    """
    参与自动微分的N维张量

    数据以 float64 存储；由可微运算产生的张量记录恰好一个图节点，
    未设置 requires_grad 的张量（叶子或常量）不会接收梯度。
    """

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.node: Optional[Node] = None
        self.name = name

    # ==================== 基本属性 ====================

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def numpy(self) -> np.ndarray:
        """返回底层数组（只读视图）"""
        view = self.data.view()
        view.flags.writeable = False
        return view

    def item(self) -> float:
        if self.size != 1:
            raise ShapeMismatchError(f"item() 只适用于单元素张量, 当前形状 {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> 'Tensor':
        """返回不参与计算图的副本"""
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self) -> List['Tensor']:
        return backward(self)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        op = f", op={self.node.op}" if self.node else ""
        return f"Tensor(shape={self.shape}{label}{op}, requires_grad={self.requires_grad})"

    # ==================== 运算符 ====================

    def __add__(self, other: ArrayLike) -> 'Tensor':
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> 'Tensor':
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> 'Tensor':
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> 'Tensor':
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> 'Tensor':
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> 'Tensor':
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> 'Tensor':
        return div(self, other)

    def __neg__(self) -> 'Tensor':
        return mul(self, -1.0)


def as_tensor(value: ArrayLike) -> Tensor:
    """将数组或标量包装为常量张量"""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def record_op(data: np.ndarray, inputs: Sequence[Tensor], op: str,
              backward_fn: BackwardFn, **saved) -> Tensor:
    """
    创建运算结果张量并在需要时记录图节点

    Args:
        data: 前向结果
        inputs: 输入张量
        op: 运算名称
        backward_fn: 反向函数
        saved: 反向所需的前向中间量

    Returns:
        结果张量
    """
    out = Tensor.__new__(Tensor)
    out.data = data if data.dtype == np.float64 else data.astype(np.float64)
    out.grad = None
    out.name = None
    out.node = None
    out.requires_grad = False
    if is_grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = Node(op=op, inputs=tuple(inputs), backward_fn=backward_fn, saved=saved)
    return out


# ==================== 计算图回放 ====================

class GradTape:
    """
    计算图的拓扑序记录

    每个张量出现在其全部输入之后；反向时逆序回放，每个节点只访问一次。
    """

    def __init__(self, order: List[Tensor]):
        self.order = order

    @classmethod
    def record(cls, root: Tensor) -> 'GradTape':
        """从根张量出发做后序遍历，得到拓扑序"""
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(root, False)]

        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            if tensor.node is not None:
                for parent in reversed(tensor.node.inputs):
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))

        return cls(order)

    def __len__(self) -> int:
        return len(self.order)

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self.order)

    def nodes(self) -> List[Node]:
        return [t.node for t in self.order if t.node is not None]

    def replay(self, root: Tensor, seed_grad: np.ndarray) -> List[Tensor]:
        """
        逆拓扑序传播梯度，叶子张量的梯度累加到 .grad

        Returns:
            接收到梯度的叶子张量列表
        """
        grads: Dict[int, np.ndarray] = {id(root): seed_grad}
        leaves: List[Tensor] = []

        for tensor in reversed(self.order):
            grad = grads.pop(id(tensor), None)
            if grad is None:
                continue

            if tensor.node is None:
                tensor.grad = np.array(grad, dtype=np.float64) if tensor.grad is None else tensor.grad + grad
                leaves.append(tensor)
                continue

            node = tensor.node
            needs = tuple(inp.requires_grad for inp in node.inputs)
            input_grads = node.backward_fn(grad, needs)

            for inp, inp_grad, need in zip(node.inputs, input_grads, needs):
                if inp_grad is None or not need:
                    continue
                if inp_grad.shape != inp.shape:
                    raise AutodiffError(
                        f"{node.op} 反向梯度形状 {inp_grad.shape} 与输入形状 {inp.shape} 不符"
                    )
                key = id(inp)
                grads[key] = inp_grad if key not in grads else grads[key] + inp_grad

        return leaves


def backward(loss: Tensor) -> List[Tensor]:
    """
    对标量损失做反向传播

    Args:
        loss: 标量张量

    Returns:
        接收到梯度的叶子张量列表（梯度累加到各自的 .grad）

    Raises:
        AutodiffError: 损失不是标量或与任何参数无关
    """
    if loss.size != 1:
        raise AutodiffError(f"backward 需要标量损失, 当前形状 {loss.shape}")
    if not loss.requires_grad:
        raise AutodiffError("损失与任何需要梯度的张量均无关联")

    tape = GradTape.record(loss)
    logger.debug(f"反向传播: {len(tape)} 个张量, {len(tape.nodes())} 个节点")
    return tape.replay(loss, np.ones_like(loss.data))


def zero_grad(params: Sequence[Tensor]):
    """清空参数梯度"""
    for p in params:
        p.grad = None


# ==================== 逐元素运算 ====================

def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """将广播后的梯度规约回原形状"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatchError(f"{op}: 形状 {a.shape} 与 {b.shape} 无法广播")


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'add')

    def _backward(g, needs):
        return (_unbroadcast(g, a.shape) if needs[0] else None,
                _unbroadcast(g, b.shape) if needs[1] else None)

    return record_op(a.data + b.data, (a, b), 'add', _backward)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'sub')

    def _backward(g, needs):
        return (_unbroadcast(g, a.shape) if needs[0] else None,
                _unbroadcast(-g, b.shape) if needs[1] else None)

    return record_op(a.data - b.data, (a, b), 'sub', _backward)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'mul')

    def _backward(g, needs):
        return (_unbroadcast(g * b.data, a.shape) if needs[0] else None,
                _unbroadcast(g * a.data, b.shape) if needs[1] else None)

    return record_op(a.data * b.data, (a, b), 'mul', _backward)


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'div')
    out = a.data / b.data

    def _backward(g, needs):
        return (_unbroadcast(g / b.data, a.shape) if needs[0] else None,
                _unbroadcast(-g * out / b.data, b.shape) if needs[1] else None)

    return record_op(out, (a, b), 'div', _backward)


def relu(x: Tensor) -> Tensor:
    """逐元素 max(0, x)，在 0 处次梯度取 0"""
    mask = x.data > 0

    def _backward(g, needs):
        return (g * mask,)

    return record_op(np.where(mask, x.data, 0.0), (x,), 'relu', _backward)


def absolute(x: Tensor) -> Tensor:
    def _backward(g, needs):
        return (g * np.sign(x.data),)

    return record_op(np.abs(x.data), (x,), 'abs', _backward)


def sqrt(x: Tensor) -> Tensor:
    out = np.sqrt(x.data)

    def _backward(g, needs):
        return (g * 0.5 / out,)

    return record_op(out, (x,), 'sqrt', _backward)


# ==================== 规约与形状运算 ====================

def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def tensor_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def _backward(g, needs):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape),)

    return record_op(np.asarray(out), (x,), 'sum', _backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes]))
    out = x.data.mean(axis=axes, keepdims=keepdims)

    def _backward(g, needs):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, x.shape),)

    return record_op(np.asarray(out), (x,), 'mean', _backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeMismatchError(f"reshape: 无法将 {x.shape} 变形为 {tuple(shape)}")

    def _backward(g, needs):
        return (g.reshape(x.shape),)

    return record_op(out, (x,), 'reshape', _backward)


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def _backward(g, needs):
        return (g.transpose(inverse),)

    return record_op(x.data.transpose(axes), (x,), 'transpose', _backward)


def slice_axis(x: Tensor, start: int, stop: int, axis: int = -1) -> Tensor:
    """沿某一轴取 [start, stop) 区间"""
    axis = axis % x.ndim
    if not 0 <= start < stop <= x.shape[axis]:
        raise ShapeMismatchError(
            f"slice_axis: 区间 [{start}, {stop}) 超出轴 {axis} 的范围 {x.shape[axis]}"
        )
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def _backward(g, needs):
        full = np.zeros(x.shape)
        full[index] = g
        return (full,)

    return record_op(x.data[index], (x,), 'slice', _backward)


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    """
    沿指定轴拼接

    Raises:
        ShapeMismatchError: 非拼接轴的尺寸不一致（指明出错的部件序号）
    """
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeMismatchError("concat: 部件列表为空")
    if len(parts) == 1:
        return parts[0]

    ndim = parts[0].ndim
    axis = axis % ndim
    reference = parts[0].shape
    for index, part in enumerate(parts[1:], start=1):
        if part.ndim != ndim or any(
            part.shape[d] != reference[d] for d in range(ndim) if d != axis
        ):
            raise ShapeMismatchError(
                f"concat: 第 {index} 个部件形状 {part.shape} 与第 0 个部件 {reference} "
                f"在轴 {axis} 之外的尺寸不一致"
            )

    bounds = np.cumsum([0] + [p.shape[axis] for p in parts])

    def _backward(g, needs):
        grads = []
        for i, need in enumerate(needs):
            if not need:
                grads.append(None)
                continue
            index = [slice(None)] * ndim
            index[axis] = slice(bounds[i], bounds[i + 1])
            grads.append(g[tuple(index)])
        return tuple(grads)

    return record_op(np.concatenate([p.data for p in parts], axis=axis), parts, 'concat', _backward)


# ==================== 通道统计 ====================

def channel_stats(f: Tensor, delta: float = config.NORM_DELTA) -> Tuple[Tensor, Tensor]:
    """
    逐通道均值与标准差（δ 位于平方根内部）

    Args:
        f: h×w×C 或 N×h×w×C 特征图
        delta: 稳定项

    Returns:
        (mu, sigma)，形状为 (C,) 或 (N, C)
    """
    if f.ndim not in (3, 4):
        raise ShapeMismatchError(f"channel_stats 需要 h×w×C 或 N×h×w×C 输入, 当前 {f.shape}")
    spatial = (f.ndim - 3, f.ndim - 2)
    mu = mean(f, axis=spatial, keepdims=True)
    centered = f - mu
    variance = mean(centered * centered, axis=spatial, keepdims=True)
    sigma = sqrt(variance + delta)

    squeezed = f.shape[:-3] + (f.shape[-1],)
    return reshape(mu, squeezed), reshape(sigma, squeezed)
