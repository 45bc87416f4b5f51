"""Randomized fixed-point optimizers for the two regularized relaxations.

Each iteration draws a fresh Gaussian panel Z, pushes it through
e^{-(beta/2) C_eff} and reads off stochastic estimates of the constrained
quantities: per-image diagonal blocks for the strong formulation, the
diagonal and per-image block sums for the weak one. The dual variables then
take a damped log step toward the constraint targets.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .chebyshev import estimate_interval, expm_multiply, plan_cheb
from .errors import NonFiniteDual, NonPositiveEstimate
from .operators import EffectiveCostStrong, EffectiveCostWeak


@dataclass
class SolveReport:
    """Per-iteration diagnostics of one solve."""

    iterations: int = 0
    residuals: list = field(default_factory=list)
    matvecs: int = 0  # sparse-operator applications inside the exponential
    probe_matvecs: int = 0  # extra applications spent bounding the spectrum
    degrees: list = field(default_factory=list)
    seconds: float = 0.0
    iter_seconds: list = field(default_factory=list)


@dataclass
class DualStrong:
    lambdas: list
    iteration: int = 0


@dataclass
class DualWeak:
    lam: np.ndarray
    mu: np.ndarray
    iteration: int = 0


def block_log_psd(B, floor=1e-12):
    """Symmetric matrix log with eigenvalues clamped below ``floor``.

    The stochastic block estimates are rank <= S, so clamping keeps the log
    finite on unlucky draws without touching well-conditioned input.
    """
    B = np.asarray(B, dtype=np.float64)
    w, U = np.linalg.eigh(0.5 * (B + B.T))
    w = np.maximum(w, floor)
    out = (U * np.log(w)) @ U.T
    return 0.5 * (out + out.T)


def _counting(apply_fn, report):
    def wrapped(v):
        report.probe_matvecs += 1 if v.ndim == 1 else v.shape[1]
        return apply_fn(v)

    return wrapped


def solve_strong(Q, beta, S=None, gamma=5.0, max_iter=10, tol=1e-3, seed=0,
                 expm_tol=1e-8, probes=40):
    """Dual optimizer constraining every diagonal block of X to identity.

    Defaults follow the benchmark protocol: damping gamma=5, panel width
    S = 20 * max block size, 10 iterations.
    """
    part = Q.partition
    L = part.total
    if S is None:
        S = 20 * int(np.max(part.block_sizes))
    if beta <= 0 or S < 1 or gamma <= 0 or max_iter < 1:
        raise ValueError("need beta > 0, S >= 1, gamma > 0, max_iter >= 1")
    lambdas = [np.zeros((k, k)) for k in part.block_sizes]
    report = SolveReport()
    start = time.perf_counter()
    for t in range(1, max_iter + 1):
        it_start = time.perf_counter()
        eta = min(gamma / t, 1.0)
        eff = EffectiveCostStrong(Q, lambdas)
        interval = estimate_interval(_counting(eff.apply, report), L, probes=probes, seed=seed)
        plan = plan_cheb(-0.5 * beta, interval, expm_tol)
        Z = rng.gaussian_panel(seed, rng.PANEL, t, L, S)
        W = expm_multiply(eff.apply, plan, Z)
        report.matvecs += S * plan.degree
        report.degrees.append(plan.degree)
        residual = 0.0
        new = []
        for i in range(1, part.n_images + 1):
            K = part.block_sizes[i - 1]
            Wi = W[part.block_slice(i)]
            B = (Wi @ Wi.T) / S
            residual = max(residual, np.linalg.norm(B - np.eye(K)) / np.sqrt(K))
            new.append(lambdas[i - 1] - (eta / beta) * block_log_psd(B))
        for M in new:
            if not np.all(np.isfinite(M)):
                raise NonFiniteDual("dual block went non-finite")
        lambdas = [0.5 * (M + M.T) for M in new]
        report.iterations = t
        report.residuals.append(residual)
        report.iter_seconds.append(time.perf_counter() - it_start)
        if residual <= tol:
            break
    report.seconds = time.perf_counter() - start
    return DualStrong(lambdas=lambdas, iteration=report.iterations), report


def solve_weak(Q, beta, S=20, gamma=5.0, max_iter=20, tol=1e-3, seed=0,
               expm_tol=1e-8, probes=40):
    """Dual optimizer constraining diag(X) and per-image block sums.

    Per-iteration cost is proportional to nnz(Q); the panel width default
    S=20 does not grow with the instance.
    """
    part = Q.partition
    L = part.total
    if beta <= 0 or S < 1 or gamma <= 0 or max_iter < 1:
        raise ValueError("need beta > 0, S >= 1, gamma > 0, max_iter >= 1")
    lam = np.zeros(L)
    mu = np.zeros(part.n_images)
    sqrt_k = np.sqrt(part.block_sizes.astype(np.float64))
    report = SolveReport()
    start = time.perf_counter()
    for t in range(1, max_iter + 1):
        it_start = time.perf_counter()
        eta = min(gamma / t, 1.0)
        eff = EffectiveCostWeak(Q, lam, mu)
        interval = estimate_interval(_counting(eff.apply, report), L, probes=probes, seed=seed)
        plan = plan_cheb(-0.5 * beta, interval, expm_tol)
        Z = rng.gaussian_panel(seed, rng.PANEL, t, L, S)
        W = expm_multiply(eff.apply, plan, Z)
        report.matvecs += S * plan.degree
        report.degrees.append(plan.degree)
        b = np.mean(W * W, axis=1)
        blocksum = np.add.reduceat(W, part.offsets[:-1], axis=0)
        w_img = blocksum / sqrt_k[:, None]
        b_img = np.mean(w_img * w_img, axis=1)
        if np.any(b <= 0.0) or np.any(b_img <= 0.0):
            raise NonPositiveEstimate(
                "non-positive diagonal estimate; increase S or check the instance"
            )
        residual = max(np.max(np.abs(b - 1.0)), np.max(np.abs(b_img - 1.0)))
        lam = lam - (eta / beta) * np.log(b)
        mu = mu - (eta / beta) * np.log(b_img)
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(mu))):
            raise NonFiniteDual("weak duals went non-finite")
        report.iterations = t
        report.residuals.append(residual)
        report.iter_seconds.append(time.perf_counter() - it_start)
        if residual <= tol:
            break
    report.seconds = time.perf_counter() - start
    return DualWeak(lam=lam, mu=mu, iteration=report.iterations), report
