"""Synthetic bar-patch generation and pixel-noise corruption.

Patches are square ``side x side`` images stored as flat float vectors of
length ``side**2`` in row-major order (row = vertical coordinate, column =
horizontal coordinate).  A bar is a straight ridge with a gaussian
cross-section profile:

* orientation ``theta ~ U[0, pi)`` measured from the horizontal axis, so
  ``theta = 0`` is a horizontal bar and ``theta = pi/2`` a vertical one,
* signed perpendicular offset of the bar's center line from the patch
  center, ``d ~ U[-side/sqrt(2), side/sqrt(2)]`` (covers the full diagonal,
  so bars may run partly outside the patch),
* peak amplitude drawn from ``Normal(0, amplitude_std**2)``,
* pixel value ``amplitude * exp(-dist_perp**2 / (2 * bar_width**2))`` where
  ``dist_perp`` is the pixel's perpendicular distance to the center line.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, NumericalError

#: relative eigenvalue floor below which an assembled noise covariance is
#: rejected as non-PSD (rather than clamped as roundoff)
_PSD_REL_TOL = 1e-8


@dataclass
class PatchSpec:
    """Geometry and statistics of a bar-patch ensemble."""

    side: int = 9
    n_bars: int = 3
    bar_width: float = 1.2
    amplitude_std: float = 1.0
    seed: int = 0

    def validate(self):
        if self.side < 3:
            raise ConfigError(f"side must be >= 3, got {self.side}")
        if self.n_bars < 0:
            raise ConfigError(f"n_bars must be >= 0, got {self.n_bars}")
        if not self.bar_width > 0:
            raise ConfigError(f"bar_width must be > 0, got {self.bar_width}")
        if not self.amplitude_std > 0:
            raise ConfigError(
                f"amplitude_std must be > 0, got {self.amplitude_std}"
            )


@dataclass
class NoiseSpec:
    """Pixel-noise model applied to patches.

    ``kind`` is ``"white"`` (iid gaussian of the given variance) or
    ``"correlated"`` (gaussian with a separable gaussian covariance envelope
    over pixel displacements, scaled so every diagonal entry equals
    ``variance``).
    """

    kind: str = "white"
    variance: float = 0.005
    envelope_std_v: float = 3.0
    envelope_std_h: float = 1.0

    def validate(self):
        if self.kind not in ("white", "correlated"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if not self.variance > 0:
            raise ConfigError(f"noise variance must be > 0, got {self.variance}")
        if self.kind == "correlated":
            if not (self.envelope_std_v > 0 and self.envelope_std_h > 0):
                raise ConfigError("correlated-noise envelope stds must be > 0")


def _pixel_grid(side):
    """Centered (h, v) coordinates of every pixel, shape (side**2, 2)."""
    c = (side - 1) / 2.0
    rows, cols = np.mgrid[0:side, 0:side]
    h = cols.ravel() - c
    v = rows.ravel() - c
    return h, v


def render_bars(side, thetas, offsets, amplitudes, bar_width):
    """Render the sum of bars onto one patch.

    ``thetas``, ``offsets`` and ``amplitudes`` are equal-length 1-D arrays,
    one entry per bar.  Returns a flat patch of length ``side**2``.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=float))
    h, v = _pixel_grid(side)
    # normal to the bar direction (cos t, sin t) is (-sin t, cos t)
    proj = np.outer(-np.sin(thetas), h) + np.outer(np.cos(thetas), v)
    d = proj - offsets[:, None]
    vals = amplitudes[:, None] * np.exp(-(d**2) / (2.0 * bar_width**2))
    return vals.sum(axis=0)


def generate_bar_patches(spec, n_patches):
    """Generate ``n_patches`` bar patches, shape ``(n_patches, side**2)``.

    Deterministic given ``spec.seed``.
    """
    spec.validate()
    if n_patches < 0:
        raise ConfigError(f"n_patches must be >= 0, got {n_patches}")
    side, n_bars = spec.side, spec.n_bars
    out = np.zeros((n_patches, side * side))
    if n_patches == 0 or n_bars == 0:
        return out
    rng = np.random.default_rng(spec.seed)
    thetas = rng.uniform(0.0, np.pi, size=(n_patches, n_bars))
    half_diag = side / np.sqrt(2.0)
    offsets = rng.uniform(-half_diag, half_diag, size=(n_patches, n_bars))
    amps = rng.normal(0.0, spec.amplitude_std, size=(n_patches, n_bars))

    h, v = _pixel_grid(side)
    # proj[p, b, s]: perpendicular coordinate of pixel s for bar (p, b)
    proj = (-np.sin(thetas))[:, :, None] * h + np.cos(thetas)[:, :, None] * v
    d = proj - offsets[:, :, None]
    vals = amps[:, :, None] * np.exp(-(d**2) / (2.0 * spec.bar_width**2))
    out = vals.sum(axis=1)
    return out


def noise_covariance(side, noise):
    """Pixel-pair covariance matrix of a NoiseSpec, shape (side**2, side**2)."""
    noise.validate()
    if noise.kind == "white":
        return noise.variance * np.eye(side * side)
    h, v = _pixel_grid(side)
    dv = v[:, None] - v[None, :]
    dh = h[:, None] - h[None, :]
    env = np.exp(
        -(dv**2) / (2.0 * noise.envelope_std_v**2)
        - (dh**2) / (2.0 * noise.envelope_std_h**2)
    )
    return noise.variance * env


def _psd_factor(cov):
    """Factor L with cov ~= L @ L.T, clamping roundoff-negative eigenvalues.

    Raises NumericalError when the symmetrized matrix is materially non-PSD.
    """
    cov = 0.5 * (cov + cov.T)
    w, V = np.linalg.eigh(cov)
    floor = -_PSD_REL_TOL * max(w[-1], 0.0)
    if w[0] < floor:
        raise NumericalError(
            f"assembled noise covariance is not PSD (min eigenvalue {w[0]:.3e})"
        )
    w = np.clip(w, 0.0, None)
    return V * np.sqrt(w)


def apply_noise(patches, noise, seed=0):
    """Add seeded gaussian noise to patches; returns a new array of same shape.

    White noise is iid per pixel; correlated noise is sampled from the
    ``noise_covariance`` envelope via its symmetric eigen-factor.
    """
    noise.validate()
    patches = np.asarray(patches, dtype=float)
    rng = np.random.default_rng(seed)
    if noise.kind == "white":
        eps = rng.normal(0.0, np.sqrt(noise.variance), size=patches.shape)
        return patches + eps
    n_pix = patches.shape[1]
    side = int(round(np.sqrt(n_pix)))
    if side * side != n_pix:
        raise ConfigError(
            f"correlated noise needs square patches, got {n_pix} pixels"
        )
    L = _psd_factor(noise_covariance(side, noise))
    g = rng.standard_normal(size=patches.shape)
    return patches + g @ L.T
