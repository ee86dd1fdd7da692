"""
.hcube 文件读写测试
"""

import struct

import numpy as np
import pytest

from core.cube_io import HEADER, MAGIC, decode_cube, encode_cube, load_cube, save_cube
from core.exceptions import (
    BadMagicError, CubeError, CubeFormatError, DimensionMismatchError,
    DimensionOverflowError, TruncatedPayloadError
)
from models.hsi_cube import HsiCube


def raw_file(rows, cols, bands, values, code=1, wavelengths=None) -> bytes:
    flag = 0 if wavelengths is None else 1
    parts = [MAGIC, HEADER.pack(rows, cols, bands, code, flag)]
    if wavelengths is not None:
        parts.append(np.asarray(wavelengths, dtype='<f8').tobytes())
    parts.append(np.asarray(values, dtype='<f8' if code == 1 else '<f4').tobytes())
    return b''.join(parts)


class TestCubeIO:

    def test_round_trip_float64(self, rng, tmp_path):
        cube = HsiCube(data=rng.uniform(size=(4, 5, 3)), wavelengths=[0.4, 0.5, 0.7])
        save_cube(cube, tmp_path / "c.hcube")
        loaded = load_cube(tmp_path / "c.hcube")
        assert loaded.equals(cube)
        assert loaded.name == "c"

    def test_round_trip_float32(self, rng):
        cube = HsiCube(data=rng.uniform(size=(3, 3, 2)))
        loaded = decode_cube(encode_cube(cube, dtype='float32'))
        np.testing.assert_array_equal(loaded.data, cube.data.astype(np.float32).astype(np.float64))
        assert loaded.wavelengths is None

    def test_band_sequential_layout(self):
        data = np.arange(12, dtype=float).reshape(2, 3, 2)
        raw = encode_cube(HsiCube(data=data))
        payload = np.frombuffer(raw[len(MAGIC) + HEADER.size:], dtype='<f8')
        np.testing.assert_array_equal(payload[:6], data[:, :, 0].ravel())
        np.testing.assert_array_equal(payload[6:], data[:, :, 1].ravel())

    def test_bad_magic(self):
        with pytest.raises(BadMagicError):
            decode_cube(b"NOTACUBE" + bytes(40))

    def test_truncated_header(self):
        with pytest.raises(TruncatedPayloadError):
            decode_cube(MAGIC + bytes(5))

    def test_truncated_payload(self):
        raw = raw_file(2, 2, 2, np.zeros(8))
        with pytest.raises(TruncatedPayloadError):
            decode_cube(raw[:-3])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            decode_cube(raw_file(2, 2, 2, np.zeros(7)))

    def test_zero_dimension(self):
        with pytest.raises(DimensionOverflowError):
            decode_cube(raw_file(0, 2, 2, []))

    def test_overflow(self):
        with pytest.raises(DimensionOverflowError):
            decode_cube(MAGIC + HEADER.pack(2 ** 20, 2 ** 20, 2 ** 10, 1, 0))

    def test_unknown_dtype(self):
        raw = MAGIC + HEADER.pack(1, 1, 1, 7, 0) + struct.pack('<d', 0.0)
        with pytest.raises(CubeFormatError):
            decode_cube(raw)

    def test_non_finite_values(self):
        with pytest.raises(CubeError):
            decode_cube(raw_file(1, 1, 2, [0.0, np.nan]))

    def test_wavelengths_must_increase(self):
        with pytest.raises(CubeError):
            decode_cube(raw_file(1, 1, 2, [0.0, 1.0], wavelengths=[0.9, 0.5]))
