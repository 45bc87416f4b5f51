"""Index structures and the sparse symmetric correspondence matrix.

Keypoints are addressed as (i, k): image i in [1..N], keypoint k in
[1..K^(i)]. Externally everything is 1-based (matching the file formats);
internal arrays are 0-based with a row index r = offsets[i-1] + (k-1).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import DimensionMismatch, DuplicateEntry, IndexOutOfRange


@dataclass(frozen=True)
class BlockPartition:
    """Image/keypoint index structure: N block sizes and their prefix sums."""

    block_sizes: np.ndarray  # K^(1..N), positive ints
    offsets: np.ndarray = field(init=False)  # length N+1 prefix sums
    total: int = field(init=False)  # L

    def __post_init__(self):
        sizes = np.asarray(self.block_sizes, dtype=np.int64)
        if sizes.ndim != 1 or sizes.size < 1:
            raise IndexOutOfRange("need at least one block")
        if np.any(sizes < 1):
            raise IndexOutOfRange("every block size must be >= 1")
        object.__setattr__(self, "block_sizes", sizes)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "total", int(offsets[-1]))

    @property
    def n_images(self):
        return len(self.block_sizes)

    def row(self, i, k):
        """Global 0-based row of keypoint (i, k), both 1-based."""
        if not (1 <= i <= self.n_images):
            raise IndexOutOfRange(f"image index {i} out of range")
        if not (1 <= k <= self.block_sizes[i - 1]):
            raise IndexOutOfRange(f"keypoint index ({i},{k}) out of range")
        return int(self.offsets[i - 1]) + (k - 1)

    def image_of_row(self, r):
        """Inverse of ``row``: 1-based (i, k) for a global 0-based row."""
        i = int(np.searchsorted(self.offsets, r, side="right"))
        return i, r - int(self.offsets[i - 1]) + 1

    def block_slice(self, i):
        return slice(int(self.offsets[i - 1]), int(self.offsets[i]))


class CorrespondenceMatrix:
    """Sparse symmetric 0/1 matrix Q of observed matches.

    Stored as the set of upper block-triangle entries ((i,k),(j,l)), i < j;
    the diagonal blocks are an implicit identity and the lower triangle is
    the symmetric closure. Immutable after construction.
    """

    def __init__(self, partition, pairs):
        self.partition = partition
        canon = []
        for (i, k), (j, l) in pairs:
            if i == j:
                raise IndexOutOfRange("diagonal blocks are implicit; need i != j")
            if i > j:
                (i, k), (j, l) = (j, l), (i, k)
            # range checks happen inside row()
            partition.row(i, k), partition.row(j, l)
            canon.append((i, j, k, l))
        canon.sort()
        seen_rows = set()
        seen_cols = set()
        for i, j, k, l in canon:
            if (i, j, k) in seen_rows:
                raise DuplicateEntry(f"row {k} of block ({i},{j}) matched twice")
            if (i, j, l) in seen_cols:
                raise DuplicateEntry(f"column {l} of block ({i},{j}) matched twice")
            seen_rows.add((i, j, k))
            seen_cols.add((i, j, l))
        self.pairs = tuple(canon)
        self._build_csr()

    def _build_csr(self):
        part = self.partition
        L = part.total
        rows = np.empty(2 * len(self.pairs), dtype=np.int64)
        cols = np.empty(2 * len(self.pairs), dtype=np.int64)
        for t, (i, j, k, l) in enumerate(self.pairs):
            a = part.row(i, k)
            b = part.row(j, l)
            rows[2 * t], cols[2 * t] = a, b
            rows[2 * t + 1], cols[2 * t + 1] = b, a
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        self.indptr = np.zeros(L + 1, dtype=np.int64)
        np.add.at(self.indptr, rows + 1, 1)
        np.cumsum(self.indptr, out=self.indptr)
        self.indices = cols
        self._csr = None

    @property
    def nnz(self):
        """Stored entries both orientations plus the implicit diagonal."""
        return self.partition.total + 2 * len(self.pairs)

    def scipy_offdiag(self):
        if self._csr is None:
            L = self.partition.total
            self._csr = sp.csr_matrix(
                (np.ones(len(self.indices)), self.indices, self.indptr), shape=(L, L)
            )
        return self._csr

    def matvec(self, V):
        """Q @ V for an L x S panel (or length-L vector)."""
        vec = V.ndim == 1
        V = np.ascontiguousarray(V if not vec else V[:, None], dtype=np.float64)
        if V.shape[0] != self.partition.total:
            raise DimensionMismatch(
                f"panel has {V.shape[0]} rows, operator has {self.partition.total}"
            )
        if kernels.active_backend() == "compiled":
            out = kernels.q_panel_compiled(self.indptr, self.indices, V)
        else:
            out = kernels.q_panel_python(
                self.indptr, self.indices, V, csr=self.scipy_offdiag()
            )
        return out[:, 0] if vec else out

    def dense(self):
        """Dense realization, for tests and the dense oracle only."""
        L = self.partition.total
        Q = np.eye(L) + self.scipy_offdiag().toarray()
        return Q

    def block(self, i, j):
        """Dense K^(i) x K^(j) block Q^(i,j)."""
        return self.dense()[self.partition.block_slice(i), self.partition.block_slice(j)]


def build_correspondence(partition, pairs):
    """Validated correspondence matrix from ((i,k),(j,l)) match pairs."""
    return CorrespondenceMatrix(partition, pairs)


def q_matvec(Q, V):
    return Q.matvec(V)


@dataclass(frozen=True)
class GroundTruth:
    """Assignment of every keypoint to a registry point, injective per image."""

    partition: BlockPartition
    registry_size: int
    assignment: np.ndarray  # length L, values in [0, M)

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.shape != (self.partition.total,):
            raise DimensionMismatch("assignment length must equal total keypoints")
        if np.any(a < 0) or np.any(a >= self.registry_size):
            raise IndexOutOfRange("registry index out of range")
        for i in range(1, self.partition.n_images + 1):
            blk = a[self.partition.block_slice(i)]
            if len(np.unique(blk)) != len(blk):
                raise DuplicateEntry(f"image {i} maps two keypoints to one registry point")
        object.__setattr__(self, "assignment", a)


def ground_truth_product(gt):
    """Q = P P^T: keypoints match iff they share a registry index."""
    part = gt.partition
    pairs = []
    by_registry = {}
    for r, m in enumerate(gt.assignment):
        by_registry.setdefault(int(m), []).append(r)
    for members in by_registry.values():
        for a_idx in range(len(members)):
            for b_idx in range(a_idx + 1, len(members)):
                i, k = part.image_of_row(members[a_idx])
                j, l = part.image_of_row(members[b_idx])
                pairs.append(((i, k), (j, l)))
    return CorrespondenceMatrix(part, pairs)


def registry_order(gt):
    """Row permutation grouping keypoints by registry point.

    Applying it to an uncorrupted Q = P P^T makes Q block-diagonal with an
    all-ones block per registry point; used by the exactness checks.
    """
    return np.argsort(gt.assignment, kind="stable")


def registry_block_sizes(gt):
    """Occupancy L_m of each registry point, in registry order."""
    return np.bincount(gt.assignment, minlength=gt.registry_size)
