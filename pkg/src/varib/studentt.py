"""Student-t scale-mixture updates for the response-marginal bound.

Each response unit i carries a marginal ``Student(r | 0, omega2_i, nu_i)``
handled through its gaussian scale-mixture form: a latent gamma precision
multiplier per (sample, unit) with variational posterior
``Gamma(shape=a_i, rate=a_i / xi_ni)``, so ``xi_ni`` is its posterior mean.
All updates below are coordinate maximizations of the resulting bound given
the per-(sample, unit) gaussian second moments ``r2[n, i]``.

``nu_i = inf`` marks a unit pinned to the gaussian limit (``xi = 1``); the
extra gamma-bound terms vanish there.
"""

import numpy as np
from scipy.special import digamma, gammaln

NU_MIN = 1e-2
NU_MAX = 1e3
_BISECT_STEPS = 200


def xi_update(r2, omega2, nu):
    """Posterior-mean precision multipliers, ``(nu+1) / (nu + r2/omega2)``.

    Units with infinite ``nu`` get xi = 1 exactly.
    """
    r2 = np.asarray(r2, dtype=float)
    nu = np.asarray(nu, dtype=float)
    out = np.ones_like(r2)
    fin = np.isfinite(nu)
    if np.any(fin):
        out[:, fin] = (nu[fin] + 1.0) / (nu[fin] + r2[:, fin] / omega2[fin])
    return out


def omega2_update(r2, Xi):
    """Scale update: per-unit mean of ``xi * r2`` over samples."""
    return np.mean(Xi * np.asarray(r2, dtype=float), axis=0)


def shape_update(nu):
    """Variational gamma shape tied to nu: ``a = (nu + 1) / 2``."""
    nu = np.asarray(nu, dtype=float)
    return np.where(np.isfinite(nu), 0.5 * (nu + 1.0), 1.0)


def nu_lhs(nu):
    """``psi(nu/2) - log(nu/2)``; strictly increasing, negative."""
    half = 0.5 * np.asarray(nu, dtype=float)
    return digamma(half) - np.log(half)


def nu_rhs(Xi, a):
    """Right side of the shape equation, per unit.

    ``1 + mean_n[psi(a) - log(a / xi_n) - xi_n]``.
    """
    a = np.asarray(a, dtype=float)
    return 1.0 + np.mean(digamma(a) - np.log(a) + np.log(Xi) - Xi, axis=0)


def solve_nu_values(Xi, a, lo=NU_MIN, hi=NU_MAX):
    """Per-unit root of ``nu_lhs(nu) = nu_rhs`` by bisection on log nu.

    Units whose target lies outside the bracket are clamped to the nearer
    bound (gaussian-like data pushes nu to the upper bound).  Returns
    ``(nu, n_clamped)``.
    """
    rhs = nu_rhs(Xi, a)
    k = rhs.shape[0]
    llo = np.full(k, np.log(lo))
    lhi = np.full(k, np.log(hi))
    g_lo = nu_lhs(np.exp(llo)) - rhs
    g_hi = nu_lhs(np.exp(lhi)) - rhs
    clamp_hi = g_hi < 0.0
    clamp_lo = g_lo > 0.0
    bracket = ~(clamp_hi | clamp_lo)
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (llo + lhi)
        g_mid = nu_lhs(np.exp(mid)) - rhs
        go_right = bracket & (g_mid < 0.0)
        go_left = bracket & ~go_right
        llo[go_right] = mid[go_right]
        lhi[go_left] = mid[go_left]
    nu = np.exp(0.5 * (llo + lhi))
    nu[clamp_hi] = hi
    nu[clamp_lo] = lo
    return nu, int(np.count_nonzero(clamp_hi | clamp_lo))


def gamma_entropy(shape, rate):
    """Entropy of Gamma(shape, rate)."""
    return (
        shape
        - np.log(rate)
        + gammaln(shape)
        + (1.0 - shape) * digamma(shape)
    )


def f_terms(nu, Xi, a):
    """Per-unit nu-dependent remainder of the compression bound.

    ``lgamma(nu/2) - (nu/2) log(nu/2)
      - mean_n[ (nu-1)/2 * (psi(a) - log(a/xi_n)) - (nu/2) xi_n + H_n ]``
    with ``H_n`` the entropy of ``Gamma(a, a/xi_n)``.  Exactly zero for
    units in the gaussian limit (infinite nu).
    """
    nu = np.asarray(nu, dtype=float)
    a = np.asarray(a, dtype=float)
    out = np.zeros(nu.shape[0])
    fin = np.isfinite(nu)
    if not np.any(fin):
        return out
    nu_f, a_f, xi_f = nu[fin], a[fin], np.asarray(Xi, dtype=float)[:, fin]
    log_a_over_xi = np.log(a_f) - np.log(xi_f)
    h = gamma_entropy(a_f, a_f / xi_f)
    inner = (
        0.5 * (nu_f - 1.0) * (digamma(a_f) - log_a_over_xi)
        - 0.5 * nu_f * xi_f
        + h
    )
    out[fin] = (
        gammaln(0.5 * nu_f)
        - 0.5 * nu_f * np.log(0.5 * nu_f)
        - np.mean(inner, axis=0)
    )
    return out
