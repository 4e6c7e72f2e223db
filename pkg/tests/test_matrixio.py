import struct

import numpy as np
import pytest

from varib.exceptions import ConfigError, MatrixFormatError
from varib.matrixio import load_matrix, save_filter_grid, save_matrix, save_pgm


class TestBinaryMatrix:
    def test_round_trip_bit_identical(self, tmp_path, rng):
        m = rng.standard_normal((7, 3)).astype(np.float32).astype(float)
        path = tmp_path / "m.bmat"
        save_matrix(path, m)
        back = load_matrix(path)
        assert back.shape == (7, 3)
        assert np.array_equal(back.astype(np.float32), m.astype(np.float32))

    def test_header_shape(self, tmp_path, rng):
        m = rng.standard_normal((4649, 256)).astype(np.float32)
        path = tmp_path / "digits.bmat"
        save_matrix(path, m)
        back = load_matrix(path)
        assert back.shape == (4649, 256)

    def test_empty_matrix(self, tmp_path):
        path = tmp_path / "empty.bmat"
        save_matrix(path, np.zeros((0, 5)))
        back = load_matrix(path)
        assert back.shape == (0, 5)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bmat"
        path.write_bytes(b"XMAT" + b"\0" * 20 + b"\0" * 16)
        with pytest.raises(MatrixFormatError, match="magic"):
            load_matrix(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "bad.bmat"
        path.write_bytes(struct.pack("<4sIQQ", b"BMAT", 9, 1, 1) + b"\0" * 4)
        with pytest.raises(MatrixFormatError, match="version"):
            load_matrix(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "bad.bmat"
        path.write_bytes(b"BMAT\x01")
        with pytest.raises(MatrixFormatError, match="truncated header"):
            load_matrix(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "bad.bmat"
        path.write_bytes(struct.pack("<4sIQQ", b"BMAT", 1, 2, 2) + b"\0" * 8)
        with pytest.raises(MatrixFormatError, match="truncated payload"):
            load_matrix(path)

    def test_dimension_overflow(self, tmp_path):
        path = tmp_path / "bad.bmat"
        path.write_bytes(struct.pack("<4sIQQ", b"BMAT", 1, 2**62, 2**62))
        with pytest.raises(MatrixFormatError, match="overflow"):
            load_matrix(path)


class TestPGM:
    def test_header_and_normalization(self, tmp_path):
        img = np.array([[0.0, 1.0], [2.0, 4.0]])
        path = tmp_path / "img.pgm"
        save_pgm(path, img)
        raw = path.read_bytes()
        assert raw.startswith(b"P5\n2 2\n255\n")
        body = raw[len(b"P5\n2 2\n255\n"):]
        assert body == bytes([0, 64, 128, 255])

    def test_constant_image_is_black(self, tmp_path):
        path = tmp_path / "flat.pgm"
        save_pgm(path, np.full((3, 3), 7.0))
        body = path.read_bytes().split(b"\n255\n", 1)[1]
        assert body == bytes(9)

    def test_filter_grid_shape(self, tmp_path, rng):
        filters = rng.standard_normal((5, 12))
        path = tmp_path / "grid.pgm"
        save_filter_grid(path, filters, (3, 4), n_cols=3, pad=1)
        header = path.read_bytes().split(b"\n")
        assert header[0] == b"P5"
        w, h = map(int, header[1].split())
        assert (h, w) == (2 * 3 + 3 * 1, 3 * 4 + 4 * 1)

    def test_filters_shape_validated(self, tmp_path):
        with pytest.raises(ConfigError):
            save_filter_grid(tmp_path / "x.pgm", np.zeros((2, 5)), (2, 2))
