import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sawmbir.io import (
    BadMagicError, FormatError, TruncatedFileError, VersionMismatchError, read_sinogram,
    read_volume, write_csv, write_sinogram, write_volume,
)
from sawmbir.projector import Sinogram, Volume

dims = st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5))
f32 = st.floats(-1e6, 1e6, allow_nan=False, width=32)


@given(shape=dims, data=st.data(), voxel=st.tuples(*[st.floats(0.1, 10)] * 3))
def test_volume_round_trip(tmp_path_factory, shape, data, voxel):
    v = data.draw(arrays(np.float32, shape, elements=f32))
    path = tmp_path_factory.mktemp("io") / "v.sawv"
    write_volume(Volume(v, voxel), path)
    back = read_volume(path)
    np.testing.assert_array_equal(back.values, v)
    assert back.voxel_size == voxel
    assert back.dims == shape[::-1]


@given(shape=dims, data=st.data())
def test_sinogram_round_trip(tmp_path_factory, shape, data):
    s = data.draw(arrays(np.float32, shape, elements=f32))
    path = tmp_path_factory.mktemp("io") / "s.saws"
    write_sinogram(Sinogram(s), path)
    np.testing.assert_array_equal(read_sinogram(path).values, s)


def test_layout_is_little_endian_float32(tmp_path):
    path = tmp_path / "v.sawv"
    vals = np.arange(6, dtype=np.float64).reshape(1, 2, 3)
    write_volume(Volume(vals, (1.0, 2.0, 3.0)), path)
    raw = path.read_bytes()
    head = struct.unpack("<4sH3I3d", raw[:42])
    assert head == (b"SAWV", 1, 3, 2, 1, 1.0, 2.0, 3.0)
    np.testing.assert_array_equal(np.frombuffer(raw[42:], "<f4"), np.arange(6))


def _vol(tmp_path):
    path = tmp_path / "v.sawv"
    write_volume(Volume(np.ones((2, 2, 2))), path)
    return path


def test_bad_magic(tmp_path):
    path = _vol(tmp_path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(BadMagicError, match="magic"):
        read_volume(path)
    # a sinogram reader refuses a volume file
    with pytest.raises(BadMagicError):
        read_sinogram(_vol(tmp_path))


def test_version_mismatch(tmp_path):
    path = _vol(tmp_path)
    raw = bytearray(path.read_bytes())
    raw[4:6] = struct.pack("<H", 9)
    path.write_bytes(bytes(raw))
    with pytest.raises(VersionMismatchError, match="version 9"):
        read_volume(path)


@pytest.mark.parametrize("keep", [3, 20, 42, 60])
def test_truncated(tmp_path, keep):
    path = _vol(tmp_path)
    path.write_bytes(path.read_bytes()[:keep])
    with pytest.raises(FormatError):
        read_volume(path)
    if keep >= 42:
        with pytest.raises(TruncatedFileError, match="payload"):
            read_volume(path)


def test_trailing_bytes_and_empty_headers(tmp_path):
    path = _vol(tmp_path)
    path.write_bytes(path.read_bytes() + b"\0\0\0\0")
    with pytest.raises(FormatError, match="trailing"):
        read_volume(path)
    sino = tmp_path / "s.saws"
    sino.write_bytes(struct.pack("<4sH3I", b"SAWS", 1, 0, 4, 4))
    with pytest.raises(FormatError, match="zero views"):
        read_sinogram(sino)


def test_huge_header_does_not_allocate(tmp_path):
    sino = tmp_path / "s.saws"
    sino.write_bytes(struct.pack("<4sH3I", b"SAWS", 1, 2**31, 2**20, 2**20) + b"\0" * 16)
    with pytest.raises(TruncatedFileError):
        read_sinogram(sino)


def test_write_csv(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [(1, 2.5), (2, 3.0)])
    assert path.read_text().splitlines() == ["a,b", "1,2.5", "2,3.0"]
