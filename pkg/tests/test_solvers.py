import numpy as np
import pytest

from ppsync import (
    BlockPartition,
    EffectiveCostStrong,
    EffectiveCostWeak,
    block_log_psd,
    build_correspondence,
    dense_fixed_point_strong,
    dense_fixed_point_weak,
    dense_primal,
    ground_truth_product,
    solve_strong,
    solve_weak,
)
from ppsync.dense import dense_strong_step

from conftest import random_ground_truth


def _sqrt_psd(X):
    w, U = np.linalg.eigh(X)
    return (U * np.sqrt(np.maximum(w, 0.0))) @ U.T


class TestBlockLogPsd:
    def test_identity_gives_zero(self):
        assert np.max(np.abs(block_log_psd(np.eye(4)))) < 1e-14

    def test_diagonal_exponentials(self):
        B = np.diag([np.e, np.e**2])
        np.testing.assert_allclose(block_log_psd(B), np.diag([1.0, 2.0]), atol=1e-12)

    def test_exp_log_roundtrip(self):
        gen = np.random.default_rng(5)
        A = gen.standard_normal((6, 6))
        B = A @ A.T + 0.5 * np.eye(6)
        Lg = block_log_psd(B)
        w, U = np.linalg.eigh(Lg)
        back = (U * np.exp(w)) @ U.T
        np.testing.assert_allclose(back, B, atol=1e-8)

    def test_clamps_rank_deficiency(self):
        B = np.outer(np.ones(3), np.ones(3))  # rank one
        out = block_log_psd(B, floor=1e-12)
        assert np.all(np.isfinite(out))


class TestSolveStrong:
    def test_single_image_lands_on_negative_identity(self):
        # one image, Q = I_K: the unique dual optimum is Lambda = -I
        K = 3
        part = BlockPartition([K])
        Q = build_correspondence(part, [])
        duals, report = solve_strong(Q, beta=1.0, S=2000, max_iter=1, tol=1e-8, seed=0)
        lam = duals.lambdas[0]
        assert np.max(np.abs(lam + np.eye(K))) < 0.08
        offdiag = lam - np.diag(np.diag(lam))
        assert np.max(np.abs(offdiag)) < 0.08

    def test_reaches_dense_optimum_on_uncorrupted_instance(self):
        gt = random_ground_truth(seed=4, n_images=4, m=5, k_max=3)
        Q = ground_truth_product(gt)
        beta = 4.0
        duals, report = solve_strong(Q, beta, S=800, gamma=5.0, max_iter=80, tol=1e-9, seed=1)
        X = dense_primal(EffectiveCostStrong(Q, duals.lambdas).dense(), beta).X
        part = Q.partition
        for i in range(1, part.n_images + 1):
            sl = part.block_slice(i)
            K = part.block_sizes[i - 1]
            assert np.linalg.norm(X[sl, sl] - np.eye(K)) < 0.1

    def test_update_increment_vanishes_at_dense_optimum(self):
        gt = random_ground_truth(seed=4, n_images=3, m=4, k_max=3)
        Q = ground_truth_product(gt)
        beta = 2.0
        lambdas, _, _ = dense_fixed_point_strong(Q, beta, max_iter=300, tol=1e-13)
        new, _, residual = dense_strong_step(-Q.dense(), Q.partition, lambdas, beta)
        assert residual < 1e-10
        assert max(np.max(np.abs(a - b)) for a, b in zip(new, lambdas)) < 1e-10

    def test_matvec_count_matches_degrees(self):
        gt = random_ground_truth(seed=8, n_images=3, m=4, k_max=2)
        Q = ground_truth_product(gt)
        S = 16
        duals, report = solve_strong(Q, beta=1.0, S=S, max_iter=4, tol=0.0, seed=2)
        assert report.matvecs == S * sum(report.degrees)
        assert report.iterations == 4
        assert len(report.residuals) == 4

    def test_estimator_error_decays_like_inverse_sqrt_s(self):
        # frozen duals, exact X^{1/2}: median spectral error halves when S
        # quadruples, within the +-30% band
        gt = random_ground_truth(seed=3, n_images=3, m=5, k_max=3)
        Q = ground_truth_product(gt)
        part = Q.partition
        beta = 1.0
        X = dense_primal(-Q.dense(), beta).X
        root = _sqrt_psd(X)
        sl = part.block_slice(1)
        Xblk = X[sl, sl]
        scale = np.linalg.norm(Xblk, 2)

        def median_err(S):
            errs = []
            for seed in range(50):
                Z = np.random.default_rng(seed).standard_normal((part.total, S))
                W = root @ Z
                B = W[sl] @ W[sl].T / S
                errs.append(np.linalg.norm(B - Xblk, 2) / scale)
            return np.median(errs)

        e8, e32 = median_err(8), median_err(32)
        assert 0.35 <= e32 / e8 <= 0.65


class TestSolveWeak:
    def test_scalar_instance_dual_sum(self):
        # N=1, K=1, Q=[1]: X = e^{-beta(-1-lam-mu)} = 1 forces lam+mu = -1.
        # Undamped Jacobi cycles here (both duals fully correct the same
        # scalar), so the exact iteration needs the damped schedule.
        part = BlockPartition([1])
        Q = build_correspondence(part, [])
        beta = 2.0
        lam, mu, X, _ = dense_fixed_point_weak(Q, beta, max_iter=2000, tol=1e-9, gamma=5.0)
        assert abs(lam[0] + mu[0] + 1.0) < 1e-6
        duals, _ = solve_weak(Q, beta, S=512, max_iter=40, tol=1e-9, seed=0)
        assert abs(duals.lam[0] + duals.mu[0] + 1.0) < 0.1

    def test_update_increment_vanishes_at_dense_optimum(self):
        gt = random_ground_truth(seed=10, n_images=3, m=5, k_max=3)
        Q = ground_truth_product(gt)
        beta = 1.0
        lam, mu, X, res = dense_fixed_point_weak(Q, beta, max_iter=2000, tol=1e-11)
        assert res[-1] < 1e-10  # both update lines are log(1 +- residual)

    def test_block_sum_estimate_two_ways(self):
        gt = random_ground_truth(seed=6, n_images=3, m=5, k_max=3)
        Q = ground_truth_product(gt)
        part = Q.partition
        X = dense_primal(-Q.dense(), 1.0).X
        root = _sqrt_psd(X)
        S = 32
        Z = np.random.default_rng(1).standard_normal((part.total, S))
        W = root @ Z
        Xhat = W @ W.T / S
        for i in range(1, part.n_images + 1):
            sl = part.block_slice(i)
            K = part.block_sizes[i - 1]
            w_i = W[sl].T @ np.ones(K) / np.sqrt(K)
            via_w = float(w_i @ w_i) / S
            via_dense = float(np.ones(K) @ Xhat[sl, sl] @ np.ones(K)) / K
            assert abs(via_w - via_dense) < 1e-10

    def test_converged_estimates_near_targets(self):
        gt = random_ground_truth(seed=3, n_images=6, m=8, k_max=4)
        Q = ground_truth_product(gt)
        beta = 4.0
        duals, report = solve_weak(Q, beta, S=10_000, gamma=5.0, max_iter=60, tol=1e-9, seed=5)
        # the residual is exactly the max deviation of the estimates
        assert report.residuals[-1] < 0.05
        X = dense_primal(EffectiveCostWeak(Q, duals.lam, duals.mu).dense(), beta).X
        assert np.max(np.abs(np.diag(X) - 1.0)) < 0.05

    def test_estimator_error_decays_like_inverse_sqrt_s(self):
        gt = random_ground_truth(seed=2, n_images=3, m=5, k_max=3)
        Q = ground_truth_product(gt)
        part = Q.partition
        X = dense_primal(-Q.dense(), 1.0).X
        root = _sqrt_psd(X)
        diag = np.diag(X)

        def median_err(S):
            errs = []
            for seed in range(50):
                Z = np.random.default_rng(seed).standard_normal((part.total, S))
                W = root @ Z
                b = np.mean(W * W, axis=1)
                errs.append(np.median(np.abs(b - diag) / diag))
            return np.median(errs)

        e8, e32, e128 = median_err(8), median_err(32), median_err(128)
        assert 0.35 <= e32 / e8 <= 0.65
        assert 0.35 <= e128 / e32 <= 0.65

    def test_rejects_bad_parameters(self):
        part = BlockPartition([2])
        Q = build_correspondence(part, [])
        with pytest.raises(ValueError):
            solve_weak(Q, beta=-1.0)
        with pytest.raises(ValueError):
            solve_strong(Q, beta=1.0, S=0)
