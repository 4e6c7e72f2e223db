import numpy as np
import pytest

from varib.dataset import (
    dataset_from_pairs,
    make_occlusion_split,
    occlusion_columns,
    reassemble_occlusion,
)
from varib.exceptions import ConfigError

from oracles import naive_moments


class TestDatasetFromPairs:
    def test_single_row_moment(self):
        data = dataset_from_pairs(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]))
        np.testing.assert_array_equal(data.C_xx, [[1.0, 0.0], [0.0, 0.0]])

    def test_matches_naive_double_loop(self, rng):
        X = rng.standard_normal((100, 4))
        Y = rng.standard_normal((100, 2))
        data = dataset_from_pairs(X, Y)
        cxx, cxy, cyy = naive_moments(X, Y)
        np.testing.assert_allclose(data.C_xx, cxx, atol=1e-12)
        np.testing.assert_allclose(data.C_xy, cxy, atol=1e-12)
        np.testing.assert_allclose(data.C_yy, cyy, atol=1e-12)

    def test_zero_inputs(self):
        data = dataset_from_pairs(np.zeros((5, 3)), np.ones((5, 2)))
        assert np.all(data.C_xx == 0.0)
        assert np.all(data.C_xy == 0.0)

    def test_row_count_mismatch(self):
        with pytest.raises(ConfigError):
            dataset_from_pairs(np.zeros((4, 2)), np.zeros((5, 2)))

    def test_cross_moment_transpose_identity(self, rng):
        X = rng.standard_normal((50, 3))
        Y = rng.standard_normal((50, 4))
        a = dataset_from_pairs(X, Y)
        b = dataset_from_pairs(Y, X)
        np.testing.assert_allclose(a.C_xy, b.C_xy.T, atol=1e-14)

    def test_moment_cache_consistency(self, rng):
        X = rng.standard_normal((30, 3))
        data = dataset_from_pairs(X, X)
        assert data.moment_error() < 1e-12


class TestOcclusionSplit:
    def test_bar_task_dimensions(self, rng):
        patches = rng.standard_normal((10, 81))
        data = make_occlusion_split(patches, 9, 2, 2)
        assert data.d_x == 36
        assert data.d_y == 45

    def test_usps_half_split_dimensions(self, rng):
        patches = rng.standard_normal((4, 256))
        data = make_occlusion_split(patches, 16, 8, 0)
        assert data.d_x == 128
        assert data.d_y == 128

    def test_empty_input_region_rejected(self, rng):
        with pytest.raises(ConfigError):
            make_occlusion_split(rng.standard_normal((4, 81)), 9, 0, 0)
        with pytest.raises(ConfigError):
            make_occlusion_split(rng.standard_normal((4, 81)), 9, 5, 4)

    def test_reassembly_is_exact(self, rng):
        patches = rng.standard_normal((7, 81))
        data = make_occlusion_split(patches, 9, 2, 3)
        rebuilt = reassemble_occlusion(data.X, data.Y, 9, 2, 3)
        np.testing.assert_array_equal(rebuilt, patches)

    def test_regions_partition_pixels(self):
        x_idx, y_idx = occlusion_columns(9, 2, 2)
        assert len(x_idx) + len(y_idx) == 81
        assert len(np.intersect1d(x_idx, y_idx)) == 0

    def test_column_block_layout(self):
        # X carries the left block first, then the right block, column-major
        x_idx, _ = occlusion_columns(3, 1, 1)
        grid = np.arange(9).reshape(3, 3)
        np.testing.assert_array_equal(x_idx[:3], grid[:, 0])
        np.testing.assert_array_equal(x_idx[3:], grid[:, 2])
