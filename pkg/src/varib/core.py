"""Alternating variational solver for linear gaussian encoders.

The objective balances a linear-gaussian decoding bound against a
compression bound built from per-unit response marginals (gaussian or
student-t scale mixtures):

    L = relevance(U, Lambda; W, Sigma) - gamma * compression(omega2, nu, xi, a; W, Sigma)

Every update below is an exact coordinate maximization of ``L``, so one
full cycle (decoder -> marginal -> nu -> Sigma -> W) never decreases it.
Constants are arranged so that a dead channel (W = 0, matched marginal,
optimal decoder) scores exactly 0 on both components; the target-entropy
constant is absorbed using the gaussian proxy ``0.5 logdet C_yy``.

The same cycle serves the kernelized solver: it operates on a ``Design``
(per-sample feature rows plus effective second moments), and the dual
problem only differs by a feature map and a regularization correction to
the per-sample outer products.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from . import studentt
from .dataset import PairedDataset
from .exceptions import ConfigError, NumericalError
from .linalg import ensure_pd, inv_pd, logdet_pd, solve_pd, solve_sym, sym

NU_GAUSSIAN = np.inf


@dataclass
class LinearEncoder:
    """p(r|x) = Normal(W x, Sigma)."""

    W: np.ndarray
    Sigma: np.ndarray

    @property
    def n_units(self):
        return self.W.shape[0]


@dataclass
class Decoder:
    """q(y|r) = Normal(U r, Lambda)."""

    U: np.ndarray
    Lambda: np.ndarray


@dataclass
class StudentMarginal:
    """Per-unit marginal scales/shapes plus variational gamma parameters.

    ``nu = inf`` on a unit means the gaussian limit (xi pinned to 1).
    """

    omega2: np.ndarray  # (n_units,)
    nu: np.ndarray      # (n_units,)
    Xi: np.ndarray      # (n_samples, n_units)
    a: np.ndarray       # (n_units,)

    def copy(self):
        return StudentMarginal(
            self.omega2.copy(), self.nu.copy(), self.Xi.copy(), self.a.copy()
        )


@dataclass
class BottleneckConfig:
    """Trade-off, size, and stopping configuration of one fit."""

    gamma: float
    n_units: int
    marginal: str = "student"  # "student" | "gaussian"
    max_iter: int = 500
    rel_tol: float = 1e-7
    seed: int = 0
    dense_limit: int = 4096
    cg_tol: float = 1e-10

    def validate(self):
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.n_units < 1:
            raise ConfigError(f"n_units must be >= 1, got {self.n_units}")
        if not self.rel_tol > 0:
            raise ConfigError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.marginal not in ("student", "gaussian"):
            raise ConfigError(f"unknown marginal kind {self.marginal!r}")


@dataclass
class FitTrace:
    """Per-iteration objective values and solver event counters."""

    objectives: list = field(default_factory=list)
    converged: bool = False
    n_iter: int = 0
    nu_clamps: int = 0
    pd_repairs: int = 0


@dataclass
class Design:
    """Sufficient statistics the update cycle consumes.

    ``Z`` holds one feature row per sample (the raw input for the linear
    solver, subset-kernel evaluations for the dual solver).  ``C_zz`` is the
    effective feature second moment including any regularization
    correction; ``R`` is that same correction as an additive term on each
    per-sample outer product ``z z^T`` (None when absent).
    """

    Z: np.ndarray
    Y: np.ndarray
    C_zz: np.ndarray
    C_zy: np.ndarray
    C_yy: np.ndarray
    R: np.ndarray = None

    @property
    def n(self):
        return self.Z.shape[0]

    @property
    def d(self):
        return self.C_zz.shape[0]


def linear_design(data: PairedDataset) -> Design:
    return Design(
        Z=data.X, Y=data.Y, C_zz=data.C_xx, C_zy=data.C_xy, C_yy=data.C_yy
    )


# ---------------------------------------------------------------------------
# per-sample response statistics
# ---------------------------------------------------------------------------

def design_mean_responses(design, W):
    """Mean responses, one row per sample: Z @ W.T."""
    return design.Z @ W.T


def design_square_responses(design, W, Sigma):
    """Second moments of responses per (sample, unit): (Wz)^2 [+ wRw^T] + sigma_i^2."""
    r2 = design_mean_responses(design, W) ** 2 + np.diag(Sigma)
    if design.R is not None:
        r2 = r2 + np.einsum("ij,jk,ik->i", W, design.R, W)
    return r2


def mean_square_responses(data, enc):
    """<r_ni^2> for a linear encoder over a dataset."""
    return design_square_responses(linear_design(data), enc.W, enc.Sigma)


# ---------------------------------------------------------------------------
# decoder update
# ---------------------------------------------------------------------------

def decoder_from_design(design, W, Sigma, counters=None):
    C_rr = sym(W @ design.C_zz @ W.T + Sigma)
    WC_zy = W @ design.C_zy  # (n_units, d_y)
    try:
        Ut = solve_sym(C_rr, WC_zy)
    except NumericalError:
        raise NumericalError(
            "response covariance W C_xx W^T + Sigma is singular; "
            "the encoder has collapsed units or Sigma lost rank"
        ) from None
    U = Ut.T
    # reference scale guards the noiseless limit where the residual
    # covariance underflows to a roundoff-negative matrix
    Lam, repairs = ensure_pd(
        design.C_yy - U @ WC_zy,
        "decoder covariance Lambda",
        scale=float(np.trace(design.C_yy)) / design.C_yy.shape[0],
    )
    if counters is not None:
        counters.pd_repairs += repairs
    return Decoder(U=U, Lambda=Lam)


def update_decoder(data, enc):
    """Optimal linear-gaussian decoder for the current encoder."""
    return decoder_from_design(linear_design(data), enc.W, enc.Sigma)


# ---------------------------------------------------------------------------
# marginal updates
# ---------------------------------------------------------------------------

def marginal_from_r2(r2, marg):
    """One marginal sweep given response second moments: xi, then omega2, then a."""
    Xi = studentt.xi_update(r2, marg.omega2, marg.nu)
    omega2 = studentt.omega2_update(r2, Xi)
    a = np.where(np.isfinite(marg.nu), studentt.shape_update(marg.nu), marg.a)
    return StudentMarginal(omega2=omega2, nu=marg.nu.copy(), Xi=Xi, a=a)


def update_marginal(enc, data, marg):
    """Marginal sweep (xi from old omega2, omega2 from new xi, then a); nu unchanged."""
    return marginal_from_r2(mean_square_responses(data, enc), marg)


def solve_nu(marg, counters=None):
    """Update each finite nu to the root of its shape equation; re-tie a to nu.

    Bisection on log nu over [NU_MIN, NU_MAX]; out-of-bracket targets clamp
    to the nearer bound (clamp counts land in the fit trace).
    """
    fin = np.isfinite(marg.nu)
    nu = marg.nu.copy()
    a = marg.a.copy()
    if np.any(fin):
        solved, n_clamped = studentt.solve_nu_values(marg.Xi[:, fin], marg.a[fin])
        nu[fin] = solved
        a[fin] = studentt.shape_update(solved)
        if counters is not None:
            counters.nu_clamps += n_clamped
    return StudentMarginal(omega2=marg.omega2.copy(), nu=nu, Xi=marg.Xi.copy(), a=a)


# ---------------------------------------------------------------------------
# Sigma update
# ---------------------------------------------------------------------------

def sigma_from_parts(U, Lambda, omega2, xi_bar, gamma):
    M = sym(U.T @ solve_pd(Lambda, U, "Lambda"))
    precision = M / gamma + np.diag(xi_bar / omega2)
    try:
        return inv_pd(precision, "Sigma precision")
    except NumericalError:
        raise NumericalError(
            "encoding-noise precision (U^T Lambda^-1 U / gamma + Omega^-1 Xi_bar) "
            "is not invertible"
        ) from None


def update_sigma(dec, marg, cfg):
    """Exact coordinate maximizer over the encoding noise covariance."""
    return sigma_from_parts(
        dec.U, dec.Lambda, marg.omega2, marg.Xi.mean(axis=0), cfg.gamma
    )


# ---------------------------------------------------------------------------
# encoder-weight stationarity solve
# ---------------------------------------------------------------------------

def _decoder_gain(dec):
    """U^T Lambda^-1 U and U^T Lambda^-1, shared by the W/A solves."""
    LiU = solve_pd(dec.Lambda, dec.U, "Lambda")
    return sym(dec.U.T @ LiU), LiU.T


def _forcing_term(design, dec):
    _, UtLi = _decoder_gain(dec)
    return UtLi @ design.C_zy.T


def _weighted_unit_moments(design, Xi):
    """G_i = mean_n xi_ni z_n z_n^T (+ xi_bar_i R), stacked (n_units, d, d)."""
    n, k = Xi.shape
    d = design.d
    G = np.empty((k, d, d))
    Z = design.Z
    for i in range(k):
        G[i] = (Z * Xi[:, i: i + 1]).T @ Z / n
    if design.R is not None:
        G += Xi.mean(axis=0)[:, None, None] * design.R
    return G


def stationarity_apply(design, M_dec, Xi, gamma, omega2, W):
    """Left side of the weight stationarity system, applied matrix-free.

    ``M_dec W C_zz + gamma Omega^-1 [rows w_i G_i]`` with
    ``G_i = mean_n xi_ni z_n z_n^T (+ xi_bar_i R)``.
    """
    out = M_dec @ W @ design.C_zz
    P = design.Z @ W.T
    Q = (Xi * P).T @ design.Z / design.n
    if design.R is not None:
        Q = Q + Xi.mean(axis=0)[:, None] * (W @ design.R)
    return out + gamma * (Q / omega2[:, None])


#: relative eigenvalue floor below which feature directions are treated as
#: degenerate (the objective is flat along them) and excluded from the solve
REDUCED_EIG_FLOOR = 1e-12


def _well_determined_basis(design):
    """Eigenbasis of C_zz restricted to non-degenerate directions.

    Computed from a factored SVD of the stacked feature rows (and the
    square root of the regularization correction), never from the formed
    second-moment matrix, so small eigendirections keep full relative
    accuracy even when C_zz's condition number squares the kernel's.  Wide
    kernels make the dual feature moment rank-deficient; the objective is
    flat along the discarded directions, so the solve returns the
    minimal-norm stationary point in the kept span.
    """
    root_n = np.sqrt(design.n)
    if design.R is None:
        H = design.Z / root_n
    else:
        w, Vr = np.linalg.eigh(sym(design.R))
        L = Vr * np.sqrt(np.clip(w, 0.0, None))
        H = np.vstack([design.Z / root_n, L.T])
    _, sv, Vt = np.linalg.svd(H, full_matrices=False)
    s = sv**2
    keep = s > REDUCED_EIG_FLOOR * max(s[0], 0.0)
    if not np.any(keep):
        raise NumericalError("feature second moment has no positive spectrum")
    return Vt[keep].T, s[keep]


def solve_weights_design(
    design,
    dec,
    marg,
    gamma,
    method="auto",
    dense_limit=4096,
    cg_tol=1e-10,
    krylov="cg",
    krylov_tol=None,
    max_krylov_iter=None,
    warm=None,
):
    """Solve the weight stationarity system on a design.

    ``method``: "reduced" (all xi == 1, a plain two-sided linear solve),
    "dense" (vectorized (n_units*d) system), or a Krylov iteration on the
    operator form ("cg" for the symmetric linear problem, "cgs" for the
    dual solve).  "auto" picks reduced when xi is identically 1, else dense
    when n_units*d <= dense_limit, else the Krylov path.  All but the dense
    path work in the well-determined eigenbasis of the feature moment, so
    rank-deficient duals get the minimal-norm stationary point.
    """
    M_dec, _ = _decoder_gain(dec)
    B_full = _forcing_term(design, dec)
    k = B_full.shape[0]
    omega2 = marg.omega2
    Xi = marg.Xi

    if method == "auto":
        if np.all(Xi == 1.0):
            method = "reduced"
        elif k * design.d <= dense_limit:
            method = "dense"
        else:
            method = krylov

    if method == "dense":
        d = design.d
        G = _weighted_unit_moments(design, Xi)
        A = np.kron(M_dec, design.C_zz)
        for i in range(k):
            A[i * d: (i + 1) * d, i * d: (i + 1) * d] += (gamma / omega2[i]) * G[i]
        try:
            w = solve_sym(A, B_full.ravel())
        except NumericalError:
            raise NumericalError(
                "vectorized weight stationarity system is singular; "
                "add jitter to the inputs or reduce n_units"
            ) from None
        return w.reshape(k, d)

    V, s = _well_determined_basis(design)
    B = B_full @ V
    d = V.shape[1]

    if method == "reduced":
        if not np.all(Xi == 1.0):
            raise ConfigError("reduced solve requires xi identically 1")
        S = M_dec + gamma * np.diag(1.0 / omega2)
        try:
            Q = solve_sym(S, B)
        except NumericalError as err:
            raise NumericalError(
                f"weight stationarity system is singular ({err}); "
                "add jitter to the inputs or reduce n_units"
            ) from None
        return (Q / s[None, :]) @ V.T

    if method in ("cg", "cgs"):
        # whiten the feature coordinates (C_zz becomes the identity) so the
        # Krylov iteration sees a system conditioned only by the decoder
        # gain and the xi spread, not the kernel spectrum
        root = np.sqrt(s)
        T = V / root[None, :]
        white = Design(
            Z=design.Z @ T,
            Y=design.Y,
            C_zz=np.eye(d),
            C_zy=T.T @ design.C_zy,
            C_yy=design.C_yy,
            R=None if design.R is None else sym(T.T @ design.R @ T),
        )
        B_w = B / root[None, :]
        size = k * d

        def matvec(w):
            W = w.reshape(k, d)
            return stationarity_apply(white, M_dec, Xi, gamma, omega2, W).ravel()

        op = spla.LinearOperator((size, size), matvec=matvec, dtype=float)
        precond = None
        if size * d <= 5 * 10**7:
            G = _weighted_unit_moments(white, Xi)
            factors = []
            for i in range(k):
                block = M_dec[i, i] * np.eye(d) + (gamma / omega2[i]) * G[i]
                try:
                    factors.append(sla.cho_factor(block))
                except sla.LinAlgError:
                    factors = None
                    break
            if factors is not None:
                def psolve(w):
                    W = w.reshape(k, d)
                    out = np.empty_like(W)
                    for i in range(k):
                        out[i] = sla.cho_solve(factors[i], W[i])
                    return out.ravel()

                precond = spla.LinearOperator((size, size), matvec=psolve, dtype=float)

        x0 = None
        if warm is not None:
            x0 = (np.asarray(warm, dtype=float) @ (V * root[None, :])).ravel()
        tol = krylov_tol if krylov_tol is not None else cg_tol
        maxiter = max_krylov_iter if max_krylov_iter is not None else 10 * size
        solver = spla.cg if method == "cg" else spla.cgs
        x, info = solver(op, B_w.ravel(), x0=x0, rtol=tol, atol=0.0,
                         maxiter=maxiter, M=precond)
        if info != 0:
            res = float(np.linalg.norm(matvec(x) - B_w.ravel()))
            raise NumericalError(
                f"{method} weight solve did not converge (info={info}, "
                f"final residual {res:.3e})"
            )
        return x.reshape(k, d) @ T.T

    raise ConfigError(f"unknown solve method {method!r}")


def solve_W(data, dec, marg, cfg, method="auto", warm=None):
    """Encoding weights at the zero of the objective's W-gradient."""
    return solve_weights_design(
        linear_design(data),
        dec,
        marg,
        cfg.gamma,
        method=method,
        dense_limit=cfg.dense_limit,
        cg_tol=cfg.cg_tol,
        warm=warm,
    )


# ---------------------------------------------------------------------------
# objective
# ---------------------------------------------------------------------------

def compression_value(r2, Sigma, marg):
    """Scale-mixture compression bound, in nats, from response second moments.

    Includes every constant so the bound is a genuine upper bound on
    I(R;X) and the dead channel reads exactly 0.
    """
    k = Sigma.shape[0]
    quad = np.mean(marg.Xi * np.asarray(r2, dtype=float), axis=0) / (
        2.0 * marg.omega2
    )
    f = studentt.f_terms(marg.nu, marg.Xi, marg.a)
    return float(
        np.sum(0.5 * np.log(marg.omega2) + quad + f)
        - 0.5 * logdet_pd(Sigma, "Sigma")
        - 0.5 * k
    )


def objective_parts_design(design, W, Sigma, marg, gamma, dec):
    """(relevance, compression, objective) on a design.

    Relevance uses the gaussian proxy for the target entropy so the dead
    channel reads exactly 0; compression includes every constant of the
    scale-mixture bound (in nats).
    """
    C_yy = design.C_yy
    d_y = C_yy.shape[0]
    U, Lam = dec.U, dec.Lambda

    UWC = U @ (W @ design.C_zy)
    E = C_yy - UWC - UWC.T + U @ (W @ design.C_zz @ W.T + Sigma) @ U.T
    tr_term = float(np.trace(solve_pd(Lam, E, "Lambda")))
    relevance = (
        0.5 * logdet_pd(C_yy, "C_yy")
        - 0.5 * logdet_pd(Lam, "Lambda")
        - 0.5 * tr_term
        + 0.5 * d_y
    )

    r2 = design_square_responses(design, W, Sigma)
    compression = compression_value(r2, Sigma, marg)
    return relevance, compression, relevance - gamma * compression


def objective_components(data, enc, dec, marg, cfg):
    """Dict with the relevance component, compression bound, and their combination."""
    for name, arrs in (
        ("encoder (relevance and compression inputs)", (enc.W, enc.Sigma)),
        ("decoder (relevance inputs)", (dec.U, dec.Lambda)),
        ("marginal (compression inputs)", (marg.omega2, marg.Xi, marg.a)),
    ):
        if not all(np.all(np.isfinite(a)) for a in arrs):
            raise NumericalError(f"objective inputs are not finite: {name}")
    rel, comp, obj = objective_parts_design(
        linear_design(data), enc.W, enc.Sigma, marg, cfg.gamma, dec
    )
    if not np.isfinite(obj):
        raise NumericalError(
            f"objective is not finite (relevance={rel!r}, compression={comp!r})"
        )
    return {"relevance": rel, "compression": comp, "objective": obj}


def objective(data, enc, dec, marg, cfg):
    """Variational objective value (relevance minus gamma times compression)."""
    return objective_components(data, enc, dec, marg, cfg)["objective"]


def objective_gradient_W(data, dec, marg, cfg, W):
    """Analytic gradient of the objective with respect to W (per-sample scale)."""
    design = linear_design(data)
    M_dec, _ = _decoder_gain(dec)
    B = _forcing_term(design, dec)
    return B - stationarity_apply(design, M_dec, marg.Xi, cfg.gamma, marg.omega2, W)


def objective_gradient_Sigma(dec, marg, cfg, Sigma):
    """Analytic gradient of the objective with respect to (symmetric) Sigma."""
    M_dec, _ = _decoder_gain(dec)
    xi_bar = marg.Xi.mean(axis=0)
    return (
        -0.5 * M_dec
        + 0.5 * cfg.gamma * inv_pd(Sigma, "Sigma")
        - 0.5 * cfg.gamma * np.diag(xi_bar / marg.omega2)
    )


# ---------------------------------------------------------------------------
# fitting loop
# ---------------------------------------------------------------------------

def init_marginal(design, W, Sigma, n_samples, marginal):
    """Starting marginal: gaussian-like xi, nu = 2.5 (student) or inf."""
    k = W.shape[0]
    omega2 = np.diag(W @ design.C_zz @ W.T + Sigma).copy()
    if marginal == "student":
        nu = np.full(k, 2.5)
        a = studentt.shape_update(nu)
    else:
        nu = np.full(k, NU_GAUSSIAN)
        a = np.ones(k)
    return StudentMarginal(
        omega2=omega2, nu=nu, Xi=np.ones((n_samples, k)), a=a
    )


def init_weights(design, cfg, rng):
    return rng.normal(0.0, 1.0 / np.sqrt(design.d), size=(cfg.n_units, design.d))


def fit_design(design, cfg, init=None, solver_method="auto", solver_opts=None,
               step_callback=None):
    """Run the alternating cycle on a design until the objective stalls.

    ``init`` may carry ``(W, Sigma, marginal)`` from a warm start.
    ``solver_opts`` are forwarded to the weight solve (Krylov variant and
    tolerances).  ``step_callback(stage, W, Sigma, dec, marg)`` fires after
    each sub-update when given (used by the ascent tests).
    Returns ``(W, Sigma, dec, marg, trace)`` with the decoder refreshed for
    the final weights.
    """
    cfg.validate()
    solver_opts = dict(solver_opts or {})
    trace = FitTrace()
    rng = np.random.default_rng(cfg.seed)
    if init is None:
        W = init_weights(design, cfg, rng)
        Sigma = 0.1 * np.eye(cfg.n_units)
        marg = init_marginal(design, W, Sigma, design.n, cfg.marginal)
    else:
        W, Sigma, marg = init
        W = W.copy()
        Sigma = Sigma.copy()
        marg = marg.copy()

    student = cfg.marginal == "student"
    prev_obj = None
    dec = None
    for it in range(cfg.max_iter):
        dec = decoder_from_design(design, W, Sigma, counters=trace)
        if step_callback:
            step_callback("decoder", W, Sigma, dec, marg)

        r2 = design_square_responses(design, W, Sigma)
        if student:
            marg = marginal_from_r2(r2, marg)
        else:
            marg = StudentMarginal(
                omega2=studentt.omega2_update(r2, marg.Xi),
                nu=marg.nu.copy(),
                Xi=marg.Xi,
                a=marg.a,
            )
        if step_callback:
            step_callback("marginal", W, Sigma, dec, marg)

        if student:
            marg = solve_nu(marg, counters=trace)
            if step_callback:
                step_callback("nu", W, Sigma, dec, marg)

        Sigma = sigma_from_parts(
            dec.U, dec.Lambda, marg.omega2, marg.Xi.mean(axis=0), cfg.gamma
        )
        if step_callback:
            step_callback("sigma", W, Sigma, dec, marg)

        W = solve_weights_design(
            design,
            dec,
            marg,
            cfg.gamma,
            method=solver_method,
            dense_limit=cfg.dense_limit,
            cg_tol=cfg.cg_tol,
            warm=W,
            **solver_opts,
        )
        if step_callback:
            step_callback("weights", W, Sigma, dec, marg)

        _, _, obj = objective_parts_design(design, W, Sigma, marg, cfg.gamma, dec)
        if not np.isfinite(obj):
            trace.n_iter = it + 1
            raise NumericalError(
                f"objective became non-finite at iteration {it + 1}", trace=trace
            )
        trace.objectives.append(obj)
        trace.n_iter = it + 1
        if prev_obj is not None:
            denom = max(abs(prev_obj), 1e-12)
            if abs(obj - prev_obj) < cfg.rel_tol * denom:
                trace.converged = True
                break
        prev_obj = obj

    dec = decoder_from_design(design, W, Sigma, counters=trace)
    return W, Sigma, dec, marg, trace


def fit_sparse_ib(data, cfg, init=None):
    """Fit the bottleneck on paired data.

    Returns ``(LinearEncoder, Decoder, StudentMarginal, FitTrace)``.  With
    ``cfg.marginal == "gaussian"`` the scale-mixture parameters stay pinned
    (xi = 1, a = 1, nu = inf) and the shape solve is skipped.
    """
    design = linear_design(data)
    start = None
    if init is not None:
        enc0, marg0 = init
        start = (enc0.W, enc0.Sigma, marg0)
    W, Sigma, dec, marg, trace = fit_design(design, cfg, init=start)
    return LinearEncoder(W=W, Sigma=Sigma), dec, marg, trace
