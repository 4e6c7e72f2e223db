"""Kernelized (dual-space) bottleneck: gram matrices, KRR stage, dual solves.

The encoder weights live in the span of mapped training points, so the
whole alternating cycle runs on kernel evaluations instead of raw inputs.
An L2 penalty on the expansion (without which the dual problem is
degenerate) enters as an additive correction ``(lam / n) * K_MM`` on every
per-sample feature outer product; with that convention the closed-form
gaussian dual solution is exactly the ridge-regression pullback
``(U^T Lam^-1 U + gamma Omega^-1)^-1 U^T Lam^-1 A_KRR`` with the same
ridge constant ``lam`` used by KRR.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import core
from .dataset import PairedDataset
from .exceptions import ConfigError, NumericalError
from .linalg import solve_sym, sym


@dataclass
class KernelConfig:
    """Kernel family, length scale, ridge constant, and expansion-subset size."""

    kind: str = "gaussian"
    kappa: float = 1.0
    lam: float = 1e-3
    subset_size: int = None

    def validate(self):
        if self.kind not in _KERNELS:
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if not self.kappa > 0:
            raise ConfigError(f"kappa must be > 0, got {self.kappa}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.subset_size is not None and self.subset_size < 1:
            raise ConfigError(f"subset_size must be >= 1, got {self.subset_size}")


@dataclass
class DualEncoder:
    """Expansion-coefficient encoder: responses r ~ Normal(A k(x), Sigma).

    ``subset_points`` are kept alongside the training indices so the
    encoder can respond to new inputs without the original dataset.
    """

    A: np.ndarray
    subset_idx: np.ndarray
    kernel: KernelConfig
    Sigma: np.ndarray
    subset_points: np.ndarray = field(default=None, repr=False)

    @property
    def n_units(self):
        return self.A.shape[0]


def _gaussian_kernel(X, Z, cfg):
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    sq = (
        np.sum(X**2, axis=1)[:, None]
        + np.sum(Z**2, axis=1)[None, :]
        - 2.0 * X @ Z.T
    )
    np.clip(sq, 0.0, None, out=sq)
    return np.exp(-sq / (2.0 * cfg.kappa**2))


# kind -> f(X_rows, X_cols, cfg); tests may register extra entries
_KERNELS = {"gaussian": _gaussian_kernel}


def gram_matrix(X_rows, X_cols, kernel):
    """Kernel evaluations k(x_row, x_col), shape (rows(X_rows), rows(X_cols))."""
    kernel.validate()
    return _KERNELS[kernel.kind](X_rows, X_cols, kernel)


def median_heuristic(X, max_points=500, seed=0):
    """Median pairwise distance of (a subsample of) X."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n > max_points:
        idx = np.random.default_rng(seed).choice(n, size=max_points, replace=False)
        X = X[np.sort(idx)]
    sq = (
        np.sum(X**2, axis=1)[:, None]
        + np.sum(X**2, axis=1)[None, :]
        - 2.0 * X @ X.T
    )
    np.clip(sq, 0.0, None, out=sq)
    iu = np.triu_indices(X.shape[0], k=1)
    return float(np.median(np.sqrt(sq[iu])))


def default_kappa_grid(X, n=7):
    med = median_heuristic(X)
    if med <= 0:
        med = 1.0
    return med * np.logspace(-1.0, 1.0, n)


def default_lambda_grid(n=6):
    return np.logspace(-6.0, -1.0, n)


def krr_coefficients(K, Y, lam):
    """Ridge-regression coefficients ``Y^T (K + lam I)^-1`` (d_y x n)."""
    K = np.asarray(K, dtype=float)
    alpha = solve_sym(K + lam * np.eye(K.shape[0]), np.asarray(Y, dtype=float),
                      "regularized gram matrix K + lam I")
    return alpha.T


@dataclass
class KRRSearchResult:
    config: KernelConfig
    A_KRR: np.ndarray
    table: list  # (kappa, lam, holdout_mse) per evaluated grid cell

    def __iter__(self):  # allow (config, A_KRR) unpacking
        return iter((self.config, self.A_KRR))


def fit_krr(train, holdout, kappa_grid=None, lambda_grid=None):
    """Grid-search (kappa, lambda) on holdout MSE; return the best KRR fit.

    ``holdout`` must be disjoint from ``train``.  Grid cells whose
    regularized gram matrix is numerically singular are skipped with a
    warning.  The search log (kappa, lambda, holdout MSE per cell) rides
    along in the result for monotonicity checks.
    """
    if kappa_grid is None:
        kappa_grid = default_kappa_grid(train.X)
    if lambda_grid is None:
        lambda_grid = default_lambda_grid()
    kappa_grid = np.atleast_1d(np.asarray(kappa_grid, dtype=float))
    lambda_grid = np.atleast_1d(np.asarray(lambda_grid, dtype=float))
    if kappa_grid.size == 0 or lambda_grid.size == 0:
        raise ConfigError("kappa and lambda grids must be non-empty")

    best = None
    table = []
    for kappa in kappa_grid:
        cfg = KernelConfig(kind="gaussian", kappa=float(kappa), lam=0.0)
        K = _gaussian_kernel(train.X, train.X, cfg)
        K_ho = _gaussian_kernel(holdout.X, train.X, cfg)
        for lam in lambda_grid:
            try:
                alpha = solve_sym(
                    K + lam * np.eye(K.shape[0]), train.Y, "K + lam I"
                )
            except NumericalError:
                warnings.warn(
                    f"skipping grid point kappa={kappa:g}, lam={lam:g}: "
                    "K + lam I is singular"
                )
                continue
            pred = K_ho @ alpha
            mse = float(np.mean((pred - holdout.Y) ** 2))
            table.append((float(kappa), float(lam), mse))
            if best is None or mse < best[0]:
                best = (mse, float(kappa), float(lam))
    if best is None:
        raise NumericalError("every KRR grid point was singular")
    _, kappa, lam = best
    config = KernelConfig(kind="gaussian", kappa=kappa, lam=lam)
    K = _gaussian_kernel(train.X, train.X, config)
    return KRRSearchResult(config=config, A_KRR=krr_coefficients(K, train.Y, lam),
                           table=table)


# ---------------------------------------------------------------------------
# dual design and solves
# ---------------------------------------------------------------------------

def dual_design(data, subset_idx, kernel):
    """Design for the dual cycle: subset-kernel features plus ridge correction."""
    kernel.validate()
    if kernel.lam <= 0:
        raise ConfigError(
            "dual-space fitting requires lambda > 0 (the unregularized "
            "problem is degenerate)"
        )
    subset_idx = np.asarray(subset_idx)
    if subset_idx.size != np.unique(subset_idx).size:
        raise ConfigError("subset indices must be unique")
    pts = data.X[subset_idx]
    Z = gram_matrix(data.X, pts, kernel)          # (n, m): k(x_n, subset)
    K_mm = sym(gram_matrix(pts, pts, kernel))
    n = data.n
    R = (kernel.lam / n) * K_mm
    C_zz = sym(Z.T @ Z / n + R)
    return core.Design(
        Z=Z, Y=data.Y, C_zz=C_zz, C_zy=Z.T @ data.Y / n, C_yy=data.C_yy, R=R
    )


def solve_A_gaussian(dec, marg, A_KRR, cfg):
    """Closed-form gaussian dual coefficients: the ridge pullback of A_KRR."""
    M_dec, UtLi = core._decoder_gain(dec)
    bracket = M_dec + cfg.gamma * np.diag(1.0 / marg.omega2)
    try:
        return solve_sym(
            bracket, UtLi @ A_KRR,
            "gaussian dual bracket U^T Lam^-1 U + gamma Omega^-1",
        )
    except NumericalError:
        raise NumericalError(
            "gaussian dual bracket U^T Lam^-1 U + gamma Omega^-1 is singular"
        ) from None


def solve_A(data, dec, marg, dual, cfg, warm=None):
    """Dual expansion coefficients at the zero of the dual objective gradient.

    Conjugate-gradients-squared on the vectorized stationarity system,
    relative residual < 1e-8, at most ``10 * n_units * m`` iterations.
    """
    design = dual_design(data, dual.subset_idx, dual.kernel)
    k = dec.U.shape[1]
    m = design.d
    return core.solve_weights_design(
        design,
        dec,
        marg,
        cfg.gamma,
        method="cgs",
        krylov_tol=1e-8,
        max_krylov_iter=10 * k * m,
        warm=warm,
    )


def dual_responses(dual, X_new):
    """Mean responses to new inputs, one row per input: k(x, subset) @ A^T."""
    if dual.subset_points is None:
        raise ConfigError("dual encoder carries no subset points")
    return gram_matrix(np.atleast_2d(X_new), dual.subset_points, dual.kernel) @ dual.A.T


def dual_square_responses(dual, data):
    """<r_ni^2> for a dual encoder over a dataset (includes ridge correction)."""
    design = dual_design(data, dual.subset_idx, dual.kernel)
    return core.design_square_responses(design, dual.A, dual.Sigma)


def objective_dual(data, dual, dec, marg, cfg):
    """Dual-space objective (same bound structure as the linear objective)."""
    design = dual_design(data, dual.subset_idx, dual.kernel)
    rel, comp, obj = core.objective_parts_design(
        design, dual.A, dual.Sigma, marg, cfg.gamma, dec
    )
    if not np.isfinite(obj):
        raise NumericalError(
            f"dual objective is not finite (relevance={rel!r}, compression={comp!r})"
        )
    return obj


def objective_gradient_A(data, dec, marg, dual, cfg):
    """Analytic gradient of the dual objective with respect to A (per-sample scale)."""
    design = dual_design(data, dual.subset_idx, dual.kernel)
    M_dec, _ = core._decoder_gain(dec)
    B = core._forcing_term(design, dec)
    return B - core.stationarity_apply(
        design, M_dec, marg.Xi, cfg.gamma, marg.omega2, dual.A
    )


def fit_kernel_ib(
    train,
    holdout,
    cfg,
    kernel=None,
    kappa_grid=None,
    lambda_grid=None,
    subset_size=None,
    init=None,
):
    """Two-stage kernel bottleneck fit.

    Stage 1 selects (kappa, lambda) by KRR grid search on the holdout split
    (skipped when ``kernel`` arrives with both fixed).  Stage 2 runs the
    alternating cycle in dual space with the kernel and ridge constant
    frozen; the expansion subset is drawn uniformly without replacement
    from the training set, seeded by ``cfg.seed``.

    Returns ``(DualEncoder, Decoder, StudentMarginal, FitTrace)``.
    """
    cfg.validate()
    if kernel is None:
        search = fit_krr(train, holdout, kappa_grid, lambda_grid)
        kernel = search.config
    else:
        kernel = KernelConfig(
            kind=kernel.kind, kappa=kernel.kappa, lam=kernel.lam,
            subset_size=kernel.subset_size,
        )
    if subset_size is None:
        subset_size = kernel.subset_size or train.n
    if subset_size > train.n:
        raise ConfigError(
            f"subset_size {subset_size} exceeds training size {train.n}"
        )
    kernel.subset_size = int(subset_size)
    kernel.validate()
    if kernel.lam <= 0:
        raise ConfigError("kernel bottleneck requires lambda > 0")

    rng = np.random.default_rng(cfg.seed)
    subset_idx = np.sort(rng.choice(train.n, size=subset_size, replace=False))
    design = dual_design(train, subset_idx, kernel)

    k, m = cfg.n_units, subset_size
    if cfg.marginal == "gaussian":
        solver_method, solver_opts = "auto", {}
    else:
        solver_method = "cgs"
        solver_opts = {"krylov_tol": 1e-8, "max_krylov_iter": 10 * k * m}

    start = None
    if init is not None:
        dual0, marg0 = init
        start = (dual0.A, dual0.Sigma, marg0)
    A, Sigma, dec, marg, trace = core.fit_design(
        design, cfg, init=start, solver_method=solver_method,
        solver_opts=solver_opts,
    )
    dual = DualEncoder(
        A=A,
        subset_idx=subset_idx,
        kernel=kernel,
        Sigma=Sigma,
        subset_points=train.X[subset_idx].copy(),
    )
    return dual, dec, marg, trace
