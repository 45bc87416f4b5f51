"""Spectral baseline: top eigenvectors of Q and hard-thresholded scores."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import rng
from .errors import DimensionMismatch, NoConvergence


@dataclass(frozen=True)
class SpectralEmbedding:
    V: np.ndarray  # L x M_hat, orthonormal columns
    ritz_values: np.ndarray


def default_rank(partition):
    """Baseline convention: twice the average number of keypoints."""
    return max(1, int(round(2.0 * float(np.mean(partition.block_sizes)))))


def top_eigvecs(Q, M_hat, iters=5000, tol=1e-8, seed=0):
    """Top-M_hat eigenpairs of Q by largest algebraic eigenvalue.

    Lanczos (ARPACK) from a seeded start vector; near-full requests fall
    back to a dense solve. Exhausting the iteration budget raises
    NoConvergence with the converged part attached.
    """
    L = Q.partition.total
    if M_hat > L:
        raise DimensionMismatch(f"cannot ask for {M_hat} eigenvectors of a {L}x{L} matrix")
    if M_hat >= L - 1:
        A = Q.dense()
        w, U = np.linalg.eigh(A)
        order = np.argsort(w)[::-1][:M_hat]
        return SpectralEmbedding(V=U[:, order], ritz_values=w[order])
    op = spla.LinearOperator((L, L), matvec=lambda v: Q.matvec(v), dtype=np.float64)
    v0 = rng.substream(seed, rng.SPECTRAL).standard_normal(L)
    try:
        w, U = spla.eigsh(op, k=M_hat, which="LA", tol=tol, maxiter=iters, v0=v0)
    except spla.ArpackNoConvergence as exc:
        partial = None
        if exc.eigenvalues is not None and len(exc.eigenvalues):
            order = np.argsort(exc.eigenvalues)[::-1]
            partial = SpectralEmbedding(
                V=exc.eigenvectors[:, order], ritz_values=exc.eigenvalues[order]
            )
        raise NoConvergence("eigensolver budget exhausted", partial=partial) from exc
    order = np.argsort(w)[::-1]
    return SpectralEmbedding(V=U[:, order], ritz_values=w[order])


def spectral_scores(embedding, Q):
    """Rank-M_hat reconstruction values read off on the stored entries of Q.

    The refined matrix is V diag(ritz) V^T, the spectral approximation of Q
    itself, so true matches score near 1 on uncorrupted data.
    """
    from .recovery import MaskedScores

    part = Q.partition
    V = embedding.V
    if V.shape[0] != part.total:
        raise DimensionMismatch("embedding rows must match the keypoint count")
    if len(Q.pairs) == 0:
        return MaskedScores(part, (), np.zeros(0), np.nan, np.zeros(0, dtype=bool), "raw")
    rows_a = np.array([part.row(i, k) for i, j, k, l in Q.pairs])
    rows_b = np.array([part.row(j, l) for i, j, k, l in Q.pairs])
    values = np.einsum("ij,j,ij->i", V[rows_a], embedding.ritz_values, V[rows_b])
    return MaskedScores(
        partition=part,
        pairs=Q.pairs,
        values=values,
        threshold=np.nan,
        keep=np.zeros(len(values), dtype=bool),
        mode="raw",
    )
