"""Exact small-instance computations used by tests and acceptance checks.

Everything here is dense and eigendecomposition-based, guarded to small
sizes: the point is exactness, never speed. The fixed-point helpers mirror
the randomized solvers with the stochastic estimators replaced by exact
diagonal blocks.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import SizeGuardExceeded

DENSE_GUARD = 2000
BRUTE_FORCE_GUARD = 8


@dataclass(frozen=True)
class DenseSolution:
    X: np.ndarray
    objective: float


def _check_guard(L):
    if L > DENSE_GUARD:
        raise SizeGuardExceeded(f"dense oracle limited to {DENSE_GUARD}, got {L}")


def dense_primal(A, beta):
    """X = e^{-beta A} for a dense symmetric effective cost A.

    The reported objective is Tr[A X] + S(X)/beta with the entropy
    S(X) = Tr[X log X] - Tr[X], evaluated from the eigenvalues.
    """
    A = np.asarray(A, dtype=np.float64)
    _check_guard(A.shape[0])
    w, U = np.linalg.eigh(0.5 * (A + A.T))
    x = np.exp(-beta * w)
    X = (U * x) @ U.T
    entropy = float(np.sum(x * (-beta * w) - x))
    objective = float(np.sum(w * x)) + entropy / beta
    return DenseSolution(X=0.5 * (X + X.T), objective=objective)


def _blockdiag(partition, blocks):
    D = np.zeros((partition.total, partition.total))
    for i in range(1, partition.n_images + 1):
        D[partition.block_slice(i), partition.block_slice(i)] = blocks[i - 1]
    return D


def _weak_shift(partition, lam, mu):
    D = np.diag(np.asarray(lam, dtype=np.float64))
    for i in range(1, partition.n_images + 1):
        K = partition.block_sizes[i - 1]
        sl = partition.block_slice(i)
        D[sl, sl] += mu[i - 1] * np.ones((K, K)) / K
    return D


def dual_objective_strong(lambdas, C, partition, beta):
    """sum_i Tr[Lambda_i] - Tr[e^{-beta(C - blockdiag(Lambda))}] / beta."""
    C = np.asarray(C, dtype=np.float64)
    _check_guard(C.shape[0])
    Ceff = C - _blockdiag(partition, lambdas)
    w = np.linalg.eigvalsh(0.5 * (Ceff + Ceff.T))
    trace_term = float(np.sum(np.exp(-beta * w)))
    return float(sum(np.trace(l) for l in lambdas)) - trace_term / beta


def dual_objective_weak(lam, mu, C, partition, beta):
    C = np.asarray(C, dtype=np.float64)
    _check_guard(C.shape[0])
    Ceff = C - _weak_shift(partition, lam, mu)
    w = np.linalg.eigvalsh(0.5 * (Ceff + Ceff.T))
    trace_term = float(np.sum(np.exp(-beta * w)))
    return float(np.sum(lam)) + float(np.sum(mu)) - trace_term / beta


def closed_form_block(L_m, beta):
    """Regularized solution block for one registry group of size L_m.

    A convex combination tau*I + (1-tau)*ones with mixing coefficient
    tau = L_m / (L_m + e^{beta L_m} - 1), evaluated overflow-safely.
    """
    if L_m < 1:
        raise ValueError("block size must be >= 1")
    if beta <= 0:
        raise ValueError("beta must be positive")
    tau = mixing_coefficient(L_m, beta)
    return tau * np.eye(L_m) + (1.0 - tau) * np.ones((L_m, L_m))


def mixing_coefficient(L_m, beta):
    """tau such that the closed-form block is tau*I + (1-tau)*ones."""
    x = beta * L_m
    if x > 500.0:
        e = np.exp(-x)
        return float(L_m * e / (1.0 + (L_m - 1.0) * e))
    return float(L_m / (L_m - 1.0 + np.exp(x)))


def brute_force_assignment(costs):
    """Minimum-cost full assignment by enumeration; lexicographic ties.

    Test oracle for the Hungarian rounding, limited to K <= 8.
    """
    costs = np.asarray(costs, dtype=np.float64)
    K = costs.shape[0]
    if costs.shape != (K, K):
        raise ValueError("brute force expects a square cost matrix")
    if K > BRUTE_FORCE_GUARD:
        raise SizeGuardExceeded(f"enumeration limited to K <= {BRUTE_FORCE_GUARD}")
    best_perm, best_cost = None, np.inf
    for perm in itertools.permutations(range(K)):
        c = float(costs[np.arange(K), perm].sum())
        if c < best_cost:
            best_cost, best_perm = c, perm
    return np.array(best_perm, dtype=np.int64)


def _sym_log(B):
    w, U = np.linalg.eigh(0.5 * (B + B.T))
    return (U * np.log(w)) @ U.T


def dense_strong_step(C, partition, lambdas, beta, eta=1.0):
    """One exact dual update with the true diagonal blocks of X."""
    Ceff = C - _blockdiag(partition, lambdas)
    X = dense_primal(Ceff, beta).X
    new = []
    residual = 0.0
    for i in range(1, partition.n_images + 1):
        sl = partition.block_slice(i)
        B = X[sl, sl]
        K = partition.block_sizes[i - 1]
        residual = max(residual, np.linalg.norm(B - np.eye(K)) / np.sqrt(K))
        step = _sym_log(B)
        new.append(lambdas[i - 1] - (eta / beta) * step)
    return new, X, residual


def dense_fixed_point_strong(Q, beta, max_iter=500, tol=1e-10, eta=1.0):
    """Iterate the exact dual update until the diagonal blocks hit identity."""
    part = Q.partition
    _check_guard(part.total)
    C = -Q.dense()
    lambdas = [np.zeros((k, k)) for k in part.block_sizes]
    residuals = []
    X = None
    for _ in range(max_iter):
        lambdas, X, r = dense_strong_step(C, part, lambdas, beta, eta=eta)
        residuals.append(r)
        if r <= tol:
            break
    return lambdas, X, residuals


def dense_weak_step(C, partition, lam, mu, beta, eta=1.0, update_lam=True, update_mu=True):
    """One exact weak dual update; either line can be applied alone."""
    Ceff = C - _weak_shift(partition, lam, mu)
    X = dense_primal(Ceff, beta).X
    d = np.diag(X)
    sums = np.array(
        [
            X[partition.block_slice(i), partition.block_slice(i)].sum()
            / partition.block_sizes[i - 1]
            for i in range(1, partition.n_images + 1)
        ]
    )
    new_lam = lam - (eta / beta) * np.log(d) if update_lam else lam
    new_mu = mu - (eta / beta) * np.log(sums) if update_mu else mu
    residual = max(np.max(np.abs(d - 1.0)), np.max(np.abs(sums - 1.0)))
    return new_lam, new_mu, X, residual


def dense_fixed_point_weak(Q, beta, max_iter=2000, tol=1e-10, eta=1.0, gamma=None):
    """Exact weak dual iteration; ``gamma`` enables the damped schedule.

    The undamped Jacobi update can cycle (diag and block-sum corrections
    double-count, visible already at L=1), just as in the randomized solver;
    gamma = min(gamma/t, 1) damping restores convergence.
    """
    part = Q.partition
    _check_guard(part.total)
    C = -Q.dense()
    lam = np.zeros(part.total)
    mu = np.zeros(part.n_images)
    residuals = []
    X = None
    for t in range(1, max_iter + 1):
        step = min(gamma / t, 1.0) if gamma is not None else eta
        lam, mu, X, r = dense_weak_step(C, part, lam, mu, beta, eta=step)
        residuals.append(r)
        if r <= tol:
            break
    return lam, mu, X, residuals
