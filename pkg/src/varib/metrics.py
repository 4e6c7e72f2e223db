"""Evaluation of fitted codes: information bounds, curves, and unit reports."""

from dataclasses import dataclass

import numpy as np

from . import core, kernel
from .core import BottleneckConfig, LinearEncoder
from .exceptions import ConfigError, NumericalError
from .kernel import DualEncoder
from .linalg import logdet_pd


@dataclass
class InfoPoint:
    """One point of an information curve (nats)."""

    gamma: float
    compression: float
    relevance: float
    objective: float
    error: str = None


@dataclass
class NullPoint:
    """One point of the null-model curve (identity responses plus noise)."""

    sigma2: float
    compression: float
    relevance: float


@dataclass
class UnitReport:
    unit: int
    signal_fraction: float
    variance: float
    excess_kurtosis: float


def relevance_bound(data, dec):
    """Decoding bound on I(R;Y): ``0.5 (logdet C_yy - logdet Lambda)``.

    Exact when the decoder is optimal for the current encoder; otherwise
    still a valid (looser) bound.  The target-entropy constant is absorbed
    so a dead channel reads 0.
    """
    return 0.5 * (
        logdet_pd(data.C_yy, "C_yy") - logdet_pd(dec.Lambda, "Lambda")
    )


def compression_bound(enc, data, marg):
    """Scale-mixture upper bound on I(R;X) in nats for a linear or dual encoder."""
    if isinstance(enc, DualEncoder):
        r2 = kernel.dual_square_responses(enc, data)
    else:
        r2 = core.mean_square_responses(data, enc)
    return core.compression_value(r2, enc.Sigma, marg)


def mean_responses(enc, data):
    """Mean responses over a dataset for a linear or dual encoder."""
    if isinstance(enc, DualEncoder):
        return kernel.dual_responses(enc, data.X)
    return data.X @ enc.W.T


def _replace(cfg, gamma):
    return BottleneckConfig(
        gamma=float(gamma),
        n_units=cfg.n_units,
        marginal=cfg.marginal,
        max_iter=cfg.max_iter,
        rel_tol=cfg.rel_tol,
        seed=cfg.seed,
        dense_limit=cfg.dense_limit,
        cg_tol=cfg.cg_tol,
    )


def info_curve(data, cfg, gamma_grid, fits=None):
    """Fit at each gamma (descending, warm-started) and collect bound values.

    Failed points are recorded with their error message and the sweep
    continues cold at the next gamma.  When ``fits`` is a list, the fitted
    ``(encoder, decoder, marginal, trace)`` tuples are appended to it.
    """
    gamma_grid = list(gamma_grid)
    if any(not 0.0 < g < 1.0 for g in gamma_grid):
        raise ConfigError("gamma grid values must lie in (0, 1)")
    if sorted(gamma_grid, reverse=True) != gamma_grid:
        raise ConfigError("gamma grid must be sorted descending for warm starts")
    points = []
    init = None
    for gamma in gamma_grid:
        cfg_g = _replace(cfg, gamma)
        try:
            enc, dec, marg, trace = core.fit_sparse_ib(data, cfg_g, init=init)
            points.append(
                InfoPoint(
                    gamma=float(gamma),
                    compression=compression_bound(enc, data, marg),
                    relevance=relevance_bound(data, dec),
                    objective=trace.objectives[-1],
                )
            )
            init = (enc, marg)
            if fits is not None:
                fits.append((enc, dec, marg, trace))
        except NumericalError as err:
            points.append(
                InfoPoint(
                    gamma=float(gamma),
                    compression=float("nan"),
                    relevance=float("nan"),
                    objective=float("nan"),
                    error=str(err),
                )
            )
            init = None
            if fits is not None:
                fits.append(None)
    return points


def null_model_curve(data, sigma2_grid=None, n_points=24):
    """Curve of the identity-plus-noise code swept over its noise variance.

    Responses are the input plus isotropic gaussian noise; the marginal is
    the matched gaussian and the decoder is optimal, so each point is a
    (compression, relevance) pair comparable to fitted curves.
    """
    d = data.d_x
    if sigma2_grid is None:
        scale = float(np.trace(data.C_xx)) / d
        sigma2_grid = scale * np.logspace(-4.0, 3.0, n_points)
    design = core.linear_design(data)
    W = np.eye(d)
    diag_cxx = np.diag(data.C_xx)
    points = []
    for s2 in np.asarray(sigma2_grid, dtype=float):
        Sigma = s2 * np.eye(d)
        dec = core.decoder_from_design(design, W, Sigma)
        omega2 = diag_cxx + s2
        marg = core.StudentMarginal(
            omega2=omega2,
            nu=np.full(d, np.inf),
            Xi=np.ones((1, d)),
            a=np.ones(d),
        )
        r2 = (diag_cxx + s2)[None, :]
        points.append(
            NullPoint(
                sigma2=float(s2),
                compression=core.compression_value(r2, Sigma, marg),
                relevance=relevance_bound(data, dec),
            )
        )
    return points


def unit_reports(enc, data, responses=None):
    """Per-unit signal fraction, variance, and excess kurtosis.

    ``responses`` defaults to the mean responses over the dataset.  Units
    come back sorted by response variance, descending.  Signal variance is
    the (uncentered) second moment of the mean responses, matching
    ``w_i C_xx w_i^T`` for a linear encoder.
    """
    if responses is None:
        responses = mean_responses(enc, data)
    responses = np.asarray(responses, dtype=float)
    sig_var = np.mean(responses**2, axis=0)
    sigma2 = np.diag(enc.Sigma)
    frac = np.where(sig_var > 0, sig_var / (sig_var + sigma2), 0.0)
    mu = responses.mean(axis=0)
    centered = responses - mu
    var = np.mean(centered**2, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        kurt = np.where(
            var > 0, np.mean(centered**4, axis=0) / var**2 - 3.0, 0.0
        )
    order = np.argsort(-sig_var, kind="stable")
    return [
        UnitReport(
            unit=int(i),
            signal_fraction=float(frac[i]),
            variance=float(sig_var[i]),
            excess_kurtosis=float(kurt[i]),
        )
        for i in order
    ]


# ---------------------------------------------------------------------------
# orientation analysis of decoding filters
# ---------------------------------------------------------------------------

def dominant_orientation(image, pad=64):
    """Dominant spatial orientation of a 2-D filter, in [0, pi).

    Estimated from the direction of maximal spectral energy: the principal
    eigenvector of the power-spectrum inertia tensor of the zero-padded
    2-D FFT, rotated by 90 degrees (a bar's spectral energy lies
    perpendicular to its long axis).  0 is horizontal, pi/2 vertical.
    Returns None for filters with total energy below 1e-12.
    """
    image = np.asarray(image, dtype=float)
    if float(np.sum(image**2)) < 1e-12:
        return None
    F = np.fft.fft2(image - image.mean(), s=(pad, pad))
    P = np.abs(F) ** 2
    P[0, 0] = 0.0
    fv = np.fft.fftfreq(pad)[:, None]
    fh = np.fft.fftfreq(pad)[None, :]
    t_hh = float(np.sum(P * fh * fh))
    t_vv = float(np.sum(P * fv * fv))
    t_hv = float(np.sum(P * fh * fv))
    # principal axis of [[t_hh, t_hv], [t_hv, t_vv]]
    spectral = 0.5 * np.arctan2(2.0 * t_hv, t_hh - t_vv)
    return float(np.mod(spectral + 0.5 * np.pi, np.pi))


def orientation_distribution(dec, side, weights=None, n_bins=18):
    """Histogram of decoding-filter orientations over the half-circle.

    Each unit's filter (a column of U, reshaped ``side x side``) votes its
    dominant orientation with weight ``weights[i]`` (unit response
    variances in the experiment reports; uniform when omitted).  Bins are
    circular and centered on ``k * pi / n_bins`` (bin 0 is horizontal, bin
    ``n_bins/2`` vertical for even ``n_bins``).  Filters with negligible
    energy are skipped.  Returns ``(hist, bin_centers)``.
    """
    U = dec.U
    if U.shape[0] != side * side:
        raise ConfigError(
            f"decoder output dim {U.shape[0]} is not {side}x{side}"
        )
    k = U.shape[1]
    if weights is None:
        weights = np.ones(k)
    weights = np.asarray(weights, dtype=float)
    hist = np.zeros(n_bins)
    centers = np.arange(n_bins) * np.pi / n_bins
    for i in range(k):
        theta = dominant_orientation(U[:, i].reshape(side, side))
        if theta is None:
            continue
        b = int(np.rint(theta / np.pi * n_bins)) % n_bins
        hist[b] += weights[i]
    return hist, centers


def reconstruct(dec, responses):
    """Posterior-mean targets from responses: responses @ U^T (rows = samples)."""
    return np.atleast_2d(np.asarray(responses, dtype=float)) @ dec.U.T
