import numpy as np
import scipy.linalg as sla

from varib import core, metrics
from varib.core import BottleneckConfig, StudentMarginal
from varib.dataset import dataset_from_pairs

from conftest import random_paired_data
from oracles import cca_directions


def _gaussian_ib_cycle_oracle(data, W, Sigma, gamma):
    """One hand-written gaussian-IB cycle (decoder, scales, noise, weights).

    Independent of the package's update code: plain formula transcription
    with dense inverses.
    """
    C_xx, C_xy, C_yy = data.C_xx, data.C_xy, data.C_yy
    C_rr = W @ C_xx @ W.T + Sigma
    U = C_xy.T @ W.T @ np.linalg.inv(C_rr)
    Lam = C_yy - U @ W @ C_xy
    Lam = 0.5 * (Lam + Lam.T)
    omega2 = np.diag(W @ C_xx @ W.T + Sigma).copy()
    M = U.T @ np.linalg.inv(Lam) @ U
    Sigma_new = np.linalg.inv(M / gamma + np.diag(1.0 / omega2))
    Sigma_new = 0.5 * (Sigma_new + Sigma_new.T)
    S = M + gamma * np.diag(1.0 / omega2)
    W_new = np.linalg.solve(S, U.T @ np.linalg.inv(Lam) @ C_xy.T) @ np.linalg.inv(C_xx)
    return U, Lam, omega2, Sigma_new, W_new


class TestGaussianReduction:
    def test_cycle_matches_dedicated_gaussian_oracle(self, rng):
        # the student-path updates with xi pinned at 1 must coincide with a
        # dedicated gaussian-IB cycle to full precision
        data = random_paired_data(rng, dx=4, dy=3, n=300)
        gamma, k = 0.35, 3
        W = rng.standard_normal((k, 4)) * 0.4
        Sigma = 0.2 * np.eye(k)
        U0, Lam0, omega2_0, Sigma1, W1 = _gaussian_ib_cycle_oracle(data, W, Sigma, gamma)

        enc = core.LinearEncoder(W=W.copy(), Sigma=Sigma.copy())
        dec = core.update_decoder(data, enc)
        np.testing.assert_allclose(dec.U, U0, atol=1e-10)
        np.testing.assert_allclose(dec.Lambda, Lam0, atol=1e-10)

        marg = StudentMarginal(omega2=np.ones(k), nu=np.full(k, np.inf),
                               Xi=np.ones((data.n, k)), a=np.ones(k))
        marg = core.update_marginal(enc, data, marg)
        np.testing.assert_allclose(marg.omega2, omega2_0, atol=1e-10)

        cfg = BottleneckConfig(gamma=gamma, n_units=k, marginal="gaussian")
        Sigma_pkg = core.update_sigma(dec, marg, cfg)
        np.testing.assert_allclose(Sigma_pkg, Sigma1, atol=1e-10)

        W_pkg = core.solve_W(data, dec, marg, cfg)
        np.testing.assert_allclose(W_pkg, W1, atol=1e-10)


class TestCCAEquivalence:
    def test_gaussian_fit_spans_top_canonical_directions(self):
        rng = np.random.default_rng(11)
        dx = dy = 4
        n = 5000
        rhos = np.array([0.92, 0.84, 0.62, 0.40])
        Qx = sla.qr(rng.standard_normal((dx, dx)))[0]
        Qy = sla.qr(rng.standard_normal((dy, dy)))[0]
        Xw = rng.standard_normal((n, dx))
        Yw = Xw * rhos + rng.standard_normal((n, dy)) * np.sqrt(1 - rhos**2)
        data = dataset_from_pairs(Xw @ Qx.T, Yw @ Qy.T)

        cfg = BottleneckConfig(gamma=0.25, n_units=2, marginal="gaussian",
                               max_iter=4000, rel_tol=1e-14, seed=0)
        enc, dec, marg, trace = core.fit_sparse_ib(data, cfg)
        top, _ = cca_directions(data.C_xx, data.C_xy, data.C_yy, 2)
        angles = sla.subspace_angles(enc.W.T, top)
        assert np.max(angles) < 1e-3


class TestScalarClosedForm:
    def test_1d_gaussian_fit_matches_calculus_optimum(self):
        # SNR s = w^2 c_xx / sigma^2 at the optimum solves
        # (1-gamma)/(1+s) = (1-rho^2)/(1+s(1-rho^2))
        rng = np.random.default_rng(2)
        c_xx, rho, gamma = 1.7, 0.8, 0.3
        n = 20000
        x = rng.normal(0, np.sqrt(c_xx), n)
        y = rho * x / np.sqrt(c_xx) + np.sqrt(1 - rho**2) * rng.normal(0, 1, n)
        data = dataset_from_pairs(x[:, None], y[:, None])
        cfg = BottleneckConfig(gamma=gamma, n_units=1, marginal="gaussian",
                               max_iter=5000, rel_tol=1e-15, seed=1)
        enc, dec, marg, _ = core.fit_sparse_ib(data, cfg)
        rho2 = data.C_xy[0, 0] ** 2 / (data.C_xx[0, 0] * data.C_yy[0, 0])
        s_star = (rho2 - gamma) / (gamma * (1 - rho2))
        s_fit = enc.W[0, 0] ** 2 * data.C_xx[0, 0] / enc.Sigma[0, 0]
        assert abs(s_fit - s_star) / s_star < 1e-6


class TestConvergenceProperties:
    def test_stationarity_at_tight_convergence(self):
        # heavy-tailed latent sources give the student shape parameters an
        # interior optimum, so both marginals converge tightly
        from scipy import stats

        rng = np.random.default_rng(12345)
        n, dx, dy = 500, 4, 3
        S = stats.t.rvs(df=3, size=(n, dx), random_state=rng)
        X = S @ rng.standard_normal((dx, dx)) * 0.5
        Y = X @ rng.standard_normal((dx, dy)) + 0.3 * rng.standard_normal((n, dy))
        data = dataset_from_pairs(X, Y)
        for marginal in ("gaussian", "student"):
            cfg = BottleneckConfig(gamma=0.3, n_units=2, marginal=marginal,
                                   max_iter=8000, rel_tol=1e-14, seed=4)
            enc, dec, marg, trace = core.fit_sparse_ib(data, cfg)
            assert trace.converged
            gW = core.objective_gradient_W(data, dec, marg, cfg, enc.W)
            assert np.max(np.abs(gW)) < 1e-6
            gS = core.objective_gradient_Sigma(dec, marg, cfg, enc.Sigma)
            assert np.max(np.abs(gS)) < 1e-6

    def test_pd_preserved_throughout(self, rng):
        data = random_paired_data(rng, dx=4, dy=4, n=300)
        min_eigs = []

        def cb(stage, W, Sigma, dec, marg):
            min_eigs.append(min(
                np.linalg.eigvalsh(Sigma).min(),
                np.linalg.eigvalsh(dec.Lambda).min(),
            ))

        for marginal in ("gaussian", "student"):
            cfg = BottleneckConfig(gamma=0.3, n_units=3, marginal=marginal,
                                   max_iter=40, rel_tol=1e-14, seed=6)
            core.fit_design(core.linear_design(data), cfg, step_callback=cb)
        assert min(min_eigs) > 0.0

    def test_trace_records_and_flags(self, rng):
        data = random_paired_data(rng)
        cfg = BottleneckConfig(gamma=0.3, n_units=2, marginal="student",
                               max_iter=1000, rel_tol=1e-7, seed=0)
        enc, dec, marg, trace = core.fit_sparse_ib(data, cfg)
        assert trace.converged
        assert len(trace.objectives) == trace.n_iter
        objs = np.array(trace.objectives)
        assert np.all(objs[1:] >= objs[:-1] - 1e-8 * np.abs(objs[:-1]))

    def test_warm_start_resumes(self, rng):
        data = random_paired_data(rng)
        cfg = BottleneckConfig(gamma=0.3, n_units=2, marginal="student",
                               max_iter=60, rel_tol=1e-12, seed=0)
        enc, dec, marg, tr = core.fit_sparse_ib(data, cfg)
        cfg2 = BottleneckConfig(gamma=0.25, n_units=2, marginal="student",
                                max_iter=60, rel_tol=1e-12, seed=0)
        enc2, dec2, marg2, tr2 = core.fit_sparse_ib(data, cfg2, init=(enc, marg))
        assert tr2.n_iter <= tr.n_iter


class TestSparseVsGaussianOnBars:
    def test_sparse_responses_heavier_tailed(self):
        # reduced-size rendition of the denoising comparison; the full desk
        # version runs in the acceptance suite
        from varib.patches import NoiseSpec, PatchSpec, apply_noise, generate_bar_patches

        patches = generate_bar_patches(
            PatchSpec(side=7, n_bars=3, bar_width=1.0, amplitude_std=1.0, seed=5), 800
        )
        X = apply_noise(patches, NoiseSpec(kind="white", variance=0.005), seed=6)
        data = dataset_from_pairs(X, patches)
        kurts = {}
        for marginal in ("gaussian", "student"):
            init = None
            for gamma in (0.5, 0.3):
                cfg = BottleneckConfig(gamma=gamma, n_units=16, marginal=marginal,
                                       max_iter=60, rel_tol=1e-6, seed=3)
                enc, dec, marg, _ = core.fit_sparse_ib(data, cfg, init=init)
                init = (enc, marg)
            reports = metrics.unit_reports(enc, data)
            kurts[marginal] = np.median([r.excess_kurtosis for r in reports])
        assert kurts["student"] > kurts["gaussian"]
