"""Scikit-learn style estimator wrappers around the bottleneck solvers.

``fit(X, Y)`` learns the code, ``transform(X)`` returns mean responses,
``predict(X)`` returns decoded target estimates.  Both estimators follow
the usual sklearn conventions (constructor stores hyperparameters
unchanged, fitted state lives in trailing-underscore attributes, and
``get_params``/``set_params`` come from ``BaseEstimator``), so they compose
with pipelines and ``clone``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_X_y

from .core import BottleneckConfig, fit_sparse_ib
from .dataset import dataset_from_pairs
from .kernel import KernelConfig, dual_responses, fit_kernel_ib
from .metrics import compression_bound, relevance_bound


def _check_pair(X, Y):
    X, Y = check_X_y(X, Y, multi_output=True, ensure_2d=True, y_numeric=True)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    return np.asarray(X, dtype=float), Y


class LinearIB(BaseEstimator, TransformerMixin):
    """Linear-gaussian bottleneck code with gaussian or student-t marginal.

    Parameters
    ----------
    n_units : int
        Number of response units.
    gamma : float
        Compression trade-off in (0, 1); larger means a tighter bottleneck.
    marginal : str
        "student" for the sparse (heavy-tailed) marginal, "gaussian" for
        the classic linear-gaussian code.
    max_iter, tol : stopping rule on the relative objective change.
    random_state : seed for the weight initialization.

    Attributes
    ----------
    W_, Sigma_ : encoder weights and noise covariance.
    U_, Lambda_ : decoder weights and covariance.
    omega2_, nu_ : marginal scales and shapes.
    trace_ : FitTrace with per-iteration objective values.
    relevance_, compression_ : bound values at the fitted point (nats).
    """

    def __init__(self, n_units=10, gamma=0.3, marginal="student",
                 max_iter=500, tol=1e-7, random_state=0):
        self.n_units = n_units
        self.gamma = gamma
        self.marginal = marginal
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def _config(self):
        return BottleneckConfig(
            gamma=self.gamma,
            n_units=self.n_units,
            marginal=self.marginal,
            max_iter=self.max_iter,
            rel_tol=self.tol,
            seed=self.random_state,
        )

    def fit(self, X, Y):
        X, Y = _check_pair(X, Y)
        data = dataset_from_pairs(X, Y)
        enc, dec, marg, trace = fit_sparse_ib(data, self._config())
        self.W_ = enc.W
        self.Sigma_ = enc.Sigma
        self.U_ = dec.U
        self.Lambda_ = dec.Lambda
        self.omega2_ = marg.omega2
        self.nu_ = marg.nu
        self.trace_ = trace
        self.n_iter_ = trace.n_iter
        self.relevance_ = relevance_bound(data, dec)
        self.compression_ = compression_bound(enc, data, marg)
        return self

    def _require_fitted(self):
        if not hasattr(self, "W_"):
            raise NotFittedError("this LinearIB instance is not fitted yet")

    def transform(self, X):
        self._require_fitted()
        X = check_array(X)
        return X @ self.W_.T

    def predict(self, X):
        return self.transform(X) @ self.U_.T


class KernelIB(BaseEstimator, TransformerMixin):
    """Kernelized bottleneck code (dual-space expansion over a training subset).

    ``kappa``/``lam`` may be given directly; leave either as None to select
    them by ridge-regression grid search on an internal holdout split of
    ``holdout_fraction`` of the samples.

    Attributes mirror LinearIB with ``A_`` (expansion coefficients),
    ``subset_idx_`` and ``subset_points_`` replacing ``W_``.
    """

    def __init__(self, n_units=10, gamma=0.3, marginal="student",
                 kappa=None, lam=None, subset_size=None,
                 holdout_fraction=0.2, max_iter=500, tol=1e-7,
                 random_state=0):
        self.n_units = n_units
        self.gamma = gamma
        self.marginal = marginal
        self.kappa = kappa
        self.lam = lam
        self.subset_size = subset_size
        self.holdout_fraction = holdout_fraction
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def _config(self):
        return BottleneckConfig(
            gamma=self.gamma,
            n_units=self.n_units,
            marginal=self.marginal,
            max_iter=self.max_iter,
            rel_tol=self.tol,
            seed=self.random_state,
        )

    def fit(self, X, Y):
        X, Y = _check_pair(X, Y)
        kernel = None
        if self.kappa is not None and self.lam is not None:
            kernel = KernelConfig(kind="gaussian", kappa=self.kappa,
                                  lam=self.lam, subset_size=self.subset_size)
            train = dataset_from_pairs(X, Y)
            holdout = None
        else:
            rng = np.random.default_rng(self.random_state)
            n = X.shape[0]
            n_hold = max(1, int(round(self.holdout_fraction * n)))
            perm = rng.permutation(n)
            hold_idx, train_idx = perm[:n_hold], perm[n_hold:]
            train = dataset_from_pairs(X[train_idx], Y[train_idx])
            holdout = dataset_from_pairs(X[hold_idx], Y[hold_idx])
        dual, dec, marg, trace = fit_kernel_ib(
            train, holdout, self._config(), kernel=kernel,
            subset_size=self.subset_size,
        )
        self.A_ = dual.A
        self.Sigma_ = dual.Sigma
        self.subset_idx_ = dual.subset_idx
        self.subset_points_ = dual.subset_points
        self.kernel_ = dual.kernel
        self.dual_ = dual
        self.U_ = dec.U
        self.Lambda_ = dec.Lambda
        self.omega2_ = marg.omega2
        self.nu_ = marg.nu
        self.trace_ = trace
        self.n_iter_ = trace.n_iter
        self.relevance_ = relevance_bound(train, dec)
        self.compression_ = compression_bound(dual, train, marg)
        return self

    def _require_fitted(self):
        if not hasattr(self, "A_"):
            raise NotFittedError("this KernelIB instance is not fitted yet")

    def transform(self, X):
        self._require_fitted()
        X = check_array(X)
        return dual_responses(self.dual_, X)

    def predict(self, X):
        return self.transform(X) @ self.U_.T
