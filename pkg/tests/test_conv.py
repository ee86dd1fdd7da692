"""
卷积运算测试
"""

import numpy as np
import pytest

from core.conv import conv2d, conv3d
from core.exceptions import ShapeMismatchError
from core.tensor import Tensor, backward, no_grad, tensor_sum
from tests.helpers import leaf, numerical_gradient, relative_error


def loop_conv2d(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """逐元素循环实现的 'same' 互相关"""
    h, w, cin = x.shape
    kh, kw, _, cout = k.shape
    ph, pw = kh // 2, kw // 2
    out = np.zeros((h, w, cout))
    for i in range(h):
        for j in range(w):
            for o in range(cout):
                total = 0.0
                for di in range(kh):
                    for dj in range(kw):
                        for c in range(cin):
                            si, sj = i + di - ph, j + dj - pw
                            if 0 <= si < h and 0 <= sj < w:
                                total += x[si, sj, c] * k[di, dj, c, o]
                out[i, j, o] = total
    return out


def loop_conv3d(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    d, h, w, cin = x.shape
    kd, kh, kw, _, cout = k.shape
    pd, ph, pw = kd // 2, kh // 2, kw // 2
    out = np.zeros((d, h, w, cout))
    for z in range(d):
        for i in range(h):
            for j in range(w):
                for o in range(cout):
                    total = 0.0
                    for dz in range(kd):
                        for di in range(kh):
                            for dj in range(kw):
                                sz, si, sj = z + dz - pd, i + di - ph, j + dj - pw
                                if 0 <= sz < d and 0 <= si < h and 0 <= sj < w:
                                    total += float(np.dot(x[sz, si, sj], k[dz, di, dj, :, o]))
                    out[z, i, j, o] = total
    return out


class TestConv2d:

    def test_all_ones_overlap_count(self):
        out = conv2d(Tensor(np.ones((3, 3, 1))), Tensor(np.ones((3, 3, 1, 1))))
        assert out.data[1, 1, 0] == 9.0
        assert out.data[0, 0, 0] == 4.0
        assert out.data[0, 1, 0] == 6.0

    def test_unit_kernel_is_identity(self, rng):
        x = rng.normal(size=(5, 6, 1))
        out = conv2d(Tensor(x), Tensor(np.ones((1, 1, 1, 1))))
        np.testing.assert_array_equal(out.data, x)

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_loop_oracle(self, seed):
        gen = np.random.default_rng(seed)
        h, w = gen.integers(1, 8, size=2)
        kh, kw = gen.choice([1, 3, 5], size=2)
        cin, cout = gen.integers(1, 4, size=2)
        x = gen.normal(size=(h, w, cin))
        k = gen.normal(size=(kh, kw, cin, cout))
        out = conv2d(Tensor(x), Tensor(k))
        assert np.abs(out.data - loop_conv2d(x, k)).max() <= 1e-12

    def test_cross_correlation_not_flipped(self):
        x = np.zeros((3, 3, 1))
        x[1, 1, 0] = 1.0
        k = np.arange(9.0).reshape(3, 3, 1, 1)
        out = conv2d(Tensor(x), Tensor(k)).data[..., 0]
        # 单位冲激的响应是旋转 180° 的卷积核
        np.testing.assert_array_equal(out, k[::-1, ::-1, 0, 0])

    def test_same_preserves_extent_batched(self, rng):
        out = conv2d(Tensor(rng.normal(size=(2, 7, 9, 3))), Tensor(rng.normal(size=(5, 5, 3, 4))))
        assert out.shape == (2, 7, 9, 4)

    def test_valid_and_stride_floor_formula(self, rng):
        x = Tensor(rng.normal(size=(9, 8, 1)))
        k = Tensor(rng.normal(size=(3, 3, 1, 2)))
        assert conv2d(x, k, padding='valid').shape == (7, 6, 2)
        assert conv2d(x, k, stride=2, padding=1).shape == (5, 4, 2)

    def test_linearity(self, rng):
        x = rng.normal(size=(6, 6, 2))
        y = rng.normal(size=(6, 6, 2))
        k = Tensor(rng.normal(size=(3, 3, 2, 2)))
        lhs = conv2d(Tensor(1.5 * x - 0.25 * y), k).data
        rhs = 1.5 * conv2d(Tensor(x), k).data - 0.25 * conv2d(Tensor(y), k).data
        assert np.abs(lhs - rhs).max() <= 1e-10

    def test_channel_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeMismatchError, match=r"\(4, 4, 2\).*\(3, 3, 3, 1\)"):
            conv2d(Tensor(np.zeros((4, 4, 2))), Tensor(np.zeros((3, 3, 3, 1))))

    def test_same_rejects_even_kernel(self):
        with pytest.raises(ShapeMismatchError):
            conv2d(Tensor(np.zeros((4, 4, 1))), Tensor(np.zeros((2, 2, 1, 1))))

    @pytest.mark.parametrize("stride,padding", [(1, 'same'), (2, 1), (1, 'valid')])
    def test_gradients(self, rng, stride, padding):
        x_data = rng.normal(size=(5, 6, 2))
        k_data = rng.normal(size=(3, 3, 2, 2))
        weights = rng.normal(size=conv2d(Tensor(x_data), Tensor(k_data), stride, padding).shape)

        x, k = leaf(x_data.copy()), leaf(k_data.copy())
        backward(tensor_sum(conv2d(x, k, stride, padding) * weights))

        def loss_value():
            with no_grad():
                return float((conv2d(Tensor(x_data), Tensor(k_data), stride, padding).data * weights).sum())

        assert relative_error(x.grad, numerical_gradient(loss_value, x_data, eps=1e-4)) <= 1e-4
        assert relative_error(k.grad, numerical_gradient(loss_value, k_data, eps=1e-4)) <= 1e-4


class TestConv3d:

    def test_unit_kernel_is_identity(self, rng):
        x = rng.normal(size=(3, 4, 4, 1))
        out = conv3d(Tensor(x), Tensor(np.ones((1, 1, 1, 1, 1))))
        np.testing.assert_array_equal(out.data, x)

    def test_all_ones_center(self):
        out = conv3d(Tensor(np.ones((3, 3, 3, 1))), Tensor(np.ones((3, 3, 3, 1, 1))))
        assert out.data[1, 1, 1, 0] == 27.0
        assert out.data[0, 0, 0, 0] == 8.0

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_loop_oracle(self, seed):
        gen = np.random.default_rng(seed)
        d, h, w = gen.integers(1, 6, size=3)
        kd, kh, kw = gen.choice([1, 3], size=3)
        cin, cout = gen.integers(1, 3, size=2)
        x = gen.normal(size=(d, h, w, cin))
        k = gen.normal(size=(kd, kh, kw, cin, cout))
        out = conv3d(Tensor(x), Tensor(k))
        assert np.abs(out.data - loop_conv3d(x, k)).max() <= 1e-12

    def test_spectral_valid_padding(self, rng):
        out = conv3d(Tensor(rng.normal(size=(6, 5, 5, 1))),
                     Tensor(rng.normal(size=(3, 3, 3, 1, 2))), padding=(0, 1, 1))
        assert out.shape == (4, 5, 5, 2)

    def test_gradients(self, rng):
        x_data = rng.normal(size=(4, 4, 4, 1))
        k_data = rng.normal(size=(3, 3, 3, 1, 2))
        weights = rng.normal(size=(2, 4, 4, 2))

        x, k = leaf(x_data.copy()), leaf(k_data.copy())
        backward(tensor_sum(conv3d(x, k, padding=(0, 1, 1)) * weights))

        def loss_value():
            with no_grad():
                return float((conv3d(Tensor(x_data), Tensor(k_data), padding=(0, 1, 1)).data * weights).sum())

        assert relative_error(x.grad, numerical_gradient(loss_value, x_data, eps=1e-4)) <= 1e-4
        assert relative_error(k.grad, numerical_gradient(loss_value, k_data, eps=1e-4)) <= 1e-4

    def test_rejects_2d_kernel(self):
        with pytest.raises(ShapeMismatchError):
            conv3d(Tensor(np.zeros((3, 3, 3, 1))), Tensor(np.zeros((3, 3, 1, 1))))
