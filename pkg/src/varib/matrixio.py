"""Binary matrix files and PGM image export.

Matrix format ("BMAT"): magic bytes ``BMAT``, little-endian u32 version (=1),
u64 rows, u64 cols, then ``rows*cols`` little-endian IEEE-754 float32 values
in row-major order.

PGM export writes binary P5 with maxval 255.  Each image is normalized
independently: pixel = round(255 * (v - min) / (max - min)); a constant
image maps to all zeros.
"""

import struct

import numpy as np

from .exceptions import ConfigError, MatrixFormatError

_MAGIC = b"BMAT"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")
# refuse element counts whose float32 payload would not fit in an i64 of bytes
_MAX_ELEMENTS = 2**61


def save_matrix(path, matrix):
    """Write a 2-D array to ``path`` in the BMAT format (as float32)."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ConfigError(f"expected a 2-D matrix, got shape {matrix.shape}")
    rows, cols = matrix.shape
    payload = np.ascontiguousarray(matrix, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, rows, cols))
        fh.write(payload.tobytes())


def load_matrix(path):
    """Read a BMAT file into a float32 array of shape (rows, cols)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise MatrixFormatError(f"{path}: truncated header")
        magic, version, rows, cols = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise MatrixFormatError(f"{path}: bad magic {magic!r}")
        if version != _VERSION:
            raise MatrixFormatError(f"{path}: unsupported version {version}")
        if rows > _MAX_ELEMENTS or cols > _MAX_ELEMENTS or (
            cols > 0 and rows > _MAX_ELEMENTS // max(cols, 1)
        ):
            raise MatrixFormatError(f"{path}: dimension overflow ({rows}x{cols})")
        count = rows * cols
        data = fh.read(4 * count)
        if len(data) < 4 * count:
            raise MatrixFormatError(
                f"{path}: truncated payload ({len(data)} of {4 * count} bytes)"
            )
    arr = np.frombuffer(data, dtype="<f4", count=count)
    return arr.reshape(rows, cols).copy()


def _to_pgm_bytes(image):
    image = np.asarray(image, dtype=float)
    lo = float(image.min()) if image.size else 0.0
    hi = float(image.max()) if image.size else 0.0
    if hi > lo:
        scaled = np.rint(255.0 * (image - lo) / (hi - lo))
    else:
        scaled = np.zeros_like(image)
    return scaled.astype(np.uint8)


def save_pgm(path, image):
    """Write one 2-D image as binary PGM (P5, maxval 255)."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ConfigError(f"expected a 2-D image, got shape {image.shape}")
    body = _to_pgm_bytes(image)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii"))
        fh.write(body.tobytes())


def save_filter_grid(path, filters, shape, n_cols=8, pad=1):
    """Tile flat filters (rows of length h*w) into one PGM.

    ``shape`` is the (height, width) of each filter image.  Each tile is
    normalized independently (same rule as ``save_pgm``); separator pixels
    are mid-gray.
    """
    filters = np.asarray(filters, dtype=float)
    th, tw = shape
    if filters.ndim != 2 or filters.shape[1] != th * tw:
        raise ConfigError(
            f"filters must be (n, {th * tw}) for shape {shape}, got {filters.shape}"
        )
    n = filters.shape[0]
    n_cols = max(1, min(n_cols, n))
    n_rows = (n + n_cols - 1) // n_cols
    h = n_rows * th + (n_rows + 1) * pad
    w = n_cols * tw + (n_cols + 1) * pad
    canvas = np.full((h, w), 128, dtype=np.uint8)
    for k in range(n):
        r, c = divmod(k, n_cols)
        tile = _to_pgm_bytes(filters[k].reshape(th, tw))
        r0 = pad + r * (th + pad)
        c0 = pad + c * (tw + pad)
        canvas[r0: r0 + th, c0: c0 + tw] = tile
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(canvas.tobytes())
