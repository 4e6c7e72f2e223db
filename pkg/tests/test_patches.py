import numpy as np
import pytest

from varib.exceptions import ConfigError, NumericalError
from varib.patches import (
    NoiseSpec,
    PatchSpec,
    apply_noise,
    generate_bar_patches,
    noise_covariance,
    render_bars,
    _psd_factor,
)

from oracles import mc_single_bar_patches


class TestGenerateBarPatches:
    def test_paper_training_set_shape(self):
        spec = PatchSpec(side=9, n_bars=3, bar_width=1.2, amplitude_std=1.0, seed=0)
        patches = generate_bar_patches(spec, 10000)
        assert patches.shape == (10000, 81)
        assert np.all(np.isfinite(patches))

    def test_zero_bars_gives_zero_patches(self):
        spec = PatchSpec(side=9, n_bars=0, seed=0)
        patches = generate_bar_patches(spec, 50)
        assert patches.shape == (50, 81)
        assert np.all(patches == 0.0)

    def test_matches_monte_carlo_oracle(self):
        # Independent scalar-loop construction; compare per-pixel mean and
        # the mean per-patch variance within 3 combined standard errors.
        n = 50000
        spec = PatchSpec(side=9, n_bars=1, bar_width=1.2, amplitude_std=1.0, seed=3)
        ours = generate_bar_patches(spec, n)
        oracle = mc_single_bar_patches(9, 1.2, 1.0, 20000, seed=99)

        mean_se = ours.std() / np.sqrt(n)
        assert np.all(np.abs(ours.mean(axis=0)) < 4 * ours.std(axis=0) / np.sqrt(n) + 1e-12)

        stat_ours = ours.var(axis=1).mean()
        stat_oracle = oracle.var(axis=1).mean()
        se = np.sqrt(
            ours.var(axis=1).var() / n + oracle.var(axis=1).var() / oracle.shape[0]
        )
        assert abs(stat_ours - stat_oracle) < 3 * se

    def test_determinism(self):
        spec = PatchSpec(seed=42)
        a = generate_bar_patches(spec, 64)
        b = generate_bar_patches(spec, 64)
        assert np.array_equal(a, b)

    def test_bar_linearity(self, rng):
        # a k-bar patch equals the sum of the k single-bar renderings
        thetas = rng.uniform(0, np.pi, 4)
        offsets = rng.uniform(-3, 3, 4)
        amps = rng.normal(0, 1, 4)
        combined = render_bars(9, thetas, offsets, amps, 1.2)
        summed = sum(
            render_bars(9, [t], [o], [a], 1.2)
            for t, o, a in zip(thetas, offsets, amps)
        )
        np.testing.assert_allclose(combined, summed, atol=1e-12)

    def test_invalid_spec(self):
        with pytest.raises(ConfigError):
            generate_bar_patches(PatchSpec(side=2), 1)
        with pytest.raises(ConfigError):
            generate_bar_patches(PatchSpec(bar_width=0.0), 1)
        with pytest.raises(ConfigError):
            generate_bar_patches(PatchSpec(n_bars=-1), 1)


class TestApplyNoise:
    def test_vanishing_white_noise(self):
        spec = PatchSpec(seed=1)
        patches = generate_bar_patches(spec, 20)
        noisy = apply_noise(patches, NoiseSpec(kind="white", variance=1e-12), seed=0)
        assert np.max(np.abs(noisy - patches)) < 1e-4

    def test_zero_variance_rejected(self):
        with pytest.raises(ConfigError):
            apply_noise(np.zeros((2, 81)), NoiseSpec(kind="white", variance=0.0))

    def test_white_noise_mean_and_shape(self):
        patches = np.zeros((20000, 9))
        noisy = apply_noise(patches, NoiseSpec(kind="white", variance=0.25), seed=5)
        assert noisy.shape == patches.shape
        assert np.all(np.abs(noisy.mean(axis=0)) < 4 * 0.5 / np.sqrt(20000))

    def test_correlated_noise_covariance_oracle(self):
        # empirical covariance over many draws matches the assembled matrix
        side = 5
        spec = NoiseSpec(kind="correlated", variance=0.01,
                         envelope_std_v=3.0, envelope_std_h=1.0)
        n = 100000
        draws = apply_noise(np.zeros((n, side * side)), spec, seed=11)
        emp = draws.T @ draws / n
        target = noise_covariance(side, spec)
        # entrywise sampling SE of a gaussian covariance estimate
        se = np.sqrt(
            (np.outer(np.diag(target), np.diag(target)) + target**2) / n
        )
        assert np.all(np.abs(emp - target) < 3.5 * se)

    def test_correlated_diagonal_equals_variance(self):
        spec = NoiseSpec(kind="correlated", variance=0.005,
                         envelope_std_v=3.0, envelope_std_h=1.0)
        cov = noise_covariance(9, spec)
        np.testing.assert_allclose(np.diag(cov), 0.005, rtol=1e-12)

    def test_correlated_elongated_vertically(self):
        spec = NoiseSpec(kind="correlated", variance=1.0,
                         envelope_std_v=3.0, envelope_std_h=1.0)
        cov = noise_covariance(9, spec).reshape(9, 9, 9, 9)
        # one-pixel vertical neighbors correlate more than horizontal ones
        assert cov[4, 4, 5, 4] > cov[4, 4, 4, 5]

    def test_determinism(self):
        patches = np.ones((10, 81))
        spec = NoiseSpec(kind="correlated", variance=0.005)
        a = apply_noise(patches, spec, seed=7)
        b = apply_noise(patches, spec, seed=7)
        assert np.array_equal(a, b)

    def test_non_psd_covariance_rejected(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
        with pytest.raises(NumericalError):
            _psd_factor(bad)
