"""Effective cost operators and implicit primal access.

Both solvers and all recovery procedures touch the primal variable only
through ``e^{t A} Z`` products, where A is the effective cost C - (dual
terms) and C = -Q. The operators below expose a symmetric ``apply`` on
L x S panels; nothing is ever materialized.
"""

import numpy as np

from . import kernels
from .chebyshev import estimate_interval, expm_multiply, plan_cheb
from .errors import DimensionMismatch


class EffectiveCostStrong:
    """A = C - blockdiag(Lambda), C = -Q, per-image symmetric Lambda blocks."""

    def __init__(self, Q, lambdas):
        part = Q.partition
        if len(lambdas) != part.n_images:
            raise DimensionMismatch("need one dual block per image")
        for i, lam in enumerate(lambdas, start=1):
            K = part.block_sizes[i - 1]
            if lam.shape != (K, K):
                raise DimensionMismatch(f"dual block {i} has shape {lam.shape}, want ({K},{K})")
        self.Q = Q
        self.lambdas = [np.asarray(l, dtype=np.float64) for l in lambdas]
        self.dim = part.total

    def apply(self, V):
        vec = V.ndim == 1
        V2 = np.ascontiguousarray(V if not vec else V[:, None], dtype=np.float64)
        out = -self.Q.matvec(V2)
        part = self.Q.partition
        for i in range(1, part.n_images + 1):
            sl = part.block_slice(i)
            out[sl] -= self.lambdas[i - 1] @ V2[sl]
        return out[:, 0] if vec else out

    def dense(self):
        A = -self.Q.dense()
        part = self.Q.partition
        for i in range(1, part.n_images + 1):
            sl = part.block_slice(i)
            A[sl, sl] -= self.lambdas[i - 1]
        return A


class EffectiveCostWeak:
    """A = C - diag(lam) - blockdiag(mu_i * ones ones^T / K_i), C = -Q.

    The rank-one blocks act through per-block column sums; they are never
    formed as matrices.
    """

    def __init__(self, Q, lam, mu):
        part = Q.partition
        lam = np.asarray(lam, dtype=np.float64)
        mu = np.asarray(mu, dtype=np.float64)
        if lam.shape != (part.total,):
            raise DimensionMismatch("lam must have one entry per keypoint")
        if mu.shape != (part.n_images,):
            raise DimensionMismatch("mu must have one entry per image")
        self.Q = Q
        self.lam = lam
        self.mu = mu
        self.mu_over_k = mu / part.block_sizes
        self.dim = part.total

    def apply(self, V):
        vec = V.ndim == 1
        V2 = np.ascontiguousarray(V if not vec else V[:, None], dtype=np.float64)
        if V2.shape[0] != self.dim:
            raise DimensionMismatch(f"panel has {V2.shape[0]} rows, operator has {self.dim}")
        Q = self.Q
        if kernels.active_backend() == "compiled":
            out = kernels.weak_panel_compiled(
                Q.indptr, Q.indices, Q.partition.offsets, self.lam, self.mu_over_k, V2
            )
        else:
            out = kernels.weak_panel_python(
                Q.indptr,
                Q.indices,
                Q.partition.offsets,
                self.lam,
                self.mu_over_k,
                V2,
                csr=Q.scipy_offdiag(),
            )
        return out[:, 0] if vec else out

    def dense(self):
        A = -self.Q.dense() - np.diag(self.lam)
        part = self.Q.partition
        for i in range(1, part.n_images + 1):
            sl = part.block_slice(i)
            K = part.block_sizes[i - 1]
            A[sl, sl] -= self.mu[i - 1] * np.ones((K, K)) / K
        return A


class MatrixOracle:
    """Adapter giving a dense matrix the panel-oracle interface."""

    def __init__(self, M):
        self.M = np.asarray(M, dtype=np.float64)
        self.dim = self.M.shape[0]
        self.matvecs = 0

    def apply(self, V):
        self.matvecs += 1 if V.ndim == 1 else V.shape[1]
        return self.M @ V


class PrimalOracle:
    """Matvec access to e^{-beta_eff * A} for an effective cost A.

    ``beta_eff`` is beta for X itself and beta/2 for X^{1/2}. One spectral
    estimate and one Chebyshev plan are built up front; ``matvecs`` counts
    the sparse-operator applications spent inside ``apply``.
    """

    def __init__(self, eff, beta_eff, tol=1e-8, probes=40, seed=0):
        self.eff = eff
        self.interval = estimate_interval(eff.apply, eff.dim, probes=probes, seed=seed)
        self.plan = plan_cheb(-float(beta_eff), self.interval, tol)
        self.matvecs = 0

    @property
    def dim(self):
        return self.eff.dim

    def apply(self, V):
        out = expm_multiply(self.eff.apply, self.plan, V)
        cols = 1 if V.ndim == 1 else V.shape[1]
        self.matvecs += self.plan.degree * cols
        return out
