"""Backend selection for the hot panel kernels.

The compiled extension is preferred when it imported cleanly; a numpy/scipy
path gives identical results (to round-off) otherwise. ``PPS_BACKEND`` can
force either backend ("compiled" or "python"), and ``PPS_THREADS`` caps the
extension's thread count. Threading never changes results: every output row
is computed independently.
"""

import os

import numpy as np
import scipy.sparse as sp

try:
    from . import _kernels

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    _kernels = None
    HAVE_COMPILED = False


def active_backend():
    forced = os.environ.get("PPS_BACKEND", "").strip().lower()
    if forced == "python":
        return "python"
    if forced == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("PPS_BACKEND=compiled but ppsync._kernels is not built")
        return "compiled"
    return "compiled" if HAVE_COMPILED else "python"


def num_threads():
    raw = os.environ.get("PPS_THREADS", "").strip()
    if not raw:
        return 1
    return max(1, int(raw))


def q_panel_python(indptr, indices, V, csr=None):
    """Pure path for Q @ V; ``csr`` may carry a cached off-diagonal matrix."""
    if csr is None:
        nnz = len(indices)
        csr = sp.csr_matrix(
            (np.ones(nnz), indices, indptr), shape=(len(indptr) - 1,) * 2
        )
    return V + csr @ V


def q_panel_compiled(indptr, indices, V):
    out = np.empty_like(V)
    _kernels.q_panel(indptr, indices, V, out, num_threads())
    return out


def weak_panel_python(indptr, indices, offsets, lam, mu_over_k, V, csr=None):
    qv = q_panel_python(indptr, indices, V, csr=csr)
    out = -qv - lam[:, None] * V
    sizes = np.diff(offsets)
    blocksum = np.add.reduceat(V, offsets[:-1], axis=0)
    out -= np.repeat(mu_over_k[:, None] * blocksum, sizes, axis=0)
    return out


def weak_panel_compiled(indptr, indices, offsets, lam, mu_over_k, V):
    out = np.empty_like(V)
    scratch = np.empty((len(offsets) - 1, V.shape[1]), dtype=np.float64)
    _kernels.weak_panel(
        indptr, indices, offsets, lam, mu_over_k, V, scratch, out, num_threads()
    )
    return out
