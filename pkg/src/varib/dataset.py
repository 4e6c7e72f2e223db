"""Paired (input, target) datasets with cached second-moment matrices."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError


@dataclass
class PairedDataset:
    """N paired samples with cached 1/N-normalized second moments.

    ``C_xx = X.T @ X / N``, ``C_xy = X.T @ Y / N``, ``C_yy = Y.T @ Y / N``.
    """

    X: np.ndarray
    Y: np.ndarray
    C_xx: np.ndarray = field(repr=False, default=None)
    C_xy: np.ndarray = field(repr=False, default=None)
    C_yy: np.ndarray = field(repr=False, default=None)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d_x(self):
        return self.X.shape[1]

    @property
    def d_y(self):
        return self.Y.shape[1]

    def moment_error(self):
        """Max abs deviation of the cached moments from recomputation."""
        n = self.n
        return max(
            float(np.max(np.abs(self.C_xx - self.X.T @ self.X / n))),
            float(np.max(np.abs(self.C_xy - self.X.T @ self.Y / n))),
            float(np.max(np.abs(self.C_yy - self.Y.T @ self.Y / n))),
        )


def dataset_from_pairs(X, Y):
    """Build a PairedDataset, computing the 1/N moments."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2:
        raise ConfigError("X and Y must be 2-D matrices")
    if X.shape[0] != Y.shape[0]:
        raise ConfigError(
            f"X and Y row counts differ: {X.shape[0]} vs {Y.shape[0]}"
        )
    if X.shape[0] < 1:
        raise ConfigError("need at least one sample")
    n = X.shape[0]
    return PairedDataset(
        X=X,
        Y=Y,
        C_xx=X.T @ X / n,
        C_xy=X.T @ Y / n,
        C_yy=Y.T @ Y / n,
    )


def occlusion_columns(side, left_cols, right_cols):
    """Flat pixel indices of the (input, target) regions of the column split.

    Input = leftmost ``left_cols`` plus rightmost ``right_cols`` columns;
    target = the remaining central columns.  Indices are row-major within
    each region (all rows of the first column block, then the next, ...).
    """
    if left_cols < 0 or right_cols < 0:
        raise ConfigError("column counts must be >= 0")
    if left_cols + right_cols >= side:
        raise ConfigError(
            f"left_cols + right_cols must be < side ({left_cols}+{right_cols} vs {side})"
        )
    if left_cols + right_cols == 0:
        raise ConfigError("occlusion split needs at least one visible column")
    cols = np.arange(side)
    x_cols = np.concatenate([cols[:left_cols], cols[side - right_cols:]])
    y_cols = cols[left_cols: side - right_cols]
    grid = np.arange(side * side).reshape(side, side)
    x_idx = grid[:, x_cols].T.ravel()
    y_idx = grid[:, y_cols].T.ravel()
    return x_idx, y_idx


def make_occlusion_split(patches, side, left_cols, right_cols):
    """Split patches column-wise into visible flanks (X) and center (Y)."""
    patches = np.asarray(patches, dtype=float)
    if patches.ndim != 2 or patches.shape[1] != side * side:
        raise ConfigError(
            f"patches must be (n, {side * side}) for side={side}, got {patches.shape}"
        )
    x_idx, y_idx = occlusion_columns(side, left_cols, right_cols)
    return dataset_from_pairs(patches[:, x_idx], patches[:, y_idx])


def reassemble_occlusion(x, y, side, left_cols, right_cols):
    """Inverse of make_occlusion_split for one or many split samples."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    x_idx, y_idx = occlusion_columns(side, left_cols, right_cols)
    out = np.zeros((x.shape[0], side * side))
    out[:, x_idx] = x
    out[:, y_idx] = y
    return out
