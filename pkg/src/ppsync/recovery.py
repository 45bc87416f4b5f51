"""Rounding: from implicit primal access to combinatorial matches.

Three routes out of the solver:

* registration sweeps (slow: one-hot pivot panels; fast: short binary-code
  panels) that build a cycle-consistent keypoint-to-registry map,
* masked scoring of the observed entries followed by thresholding, which
  filters matches without enforcing consistency.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import rng
from .blocks import CorrespondenceMatrix, GroundTruth
from .errors import (
    DegenerateGMM,
    DimensionMismatch,
    DuplicateEntry,
    EmptyInput,
    IndexOutOfRange,
    NonTermination,
)


@dataclass(frozen=True)
class RegistrationMap:
    """Assignment of every keypoint to a discovered registry point."""

    partition: object
    M: int
    assignment: np.ndarray  # length L, values in [0, M)

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.shape != (self.partition.total,):
            raise DimensionMismatch("assignment length must equal total keypoints")
        if np.any(a < 0) or np.any(a >= self.M):
            raise IndexOutOfRange("registry index out of range")
        if len(np.unique(a)) != self.M:
            raise IndexOutOfRange("every registry point must be hit at least once")
        for i in range(1, self.partition.n_images + 1):
            blk = a[self.partition.block_slice(i)]
            if len(np.unique(blk)) != len(blk):
                raise DuplicateEntry(f"image {i} reuses a registry point")
        object.__setattr__(self, "assignment", a)

    def to_ground_truth(self):
        return GroundTruth(self.partition, self.M, self.assignment)


@dataclass(frozen=True)
class BinaryEncoding:
    """Sign-valued binary codes for one image's keypoints."""

    image: int
    codes: np.ndarray  # K x d entries in {-1, +1}
    permutation: np.ndarray  # the shuffle over k_tilde letters
    k_tilde: int

    @property
    def digits(self):
        return self.codes.shape[1]


def make_binary_encoding(K, K_tilde, seed=0, image=0, permutation=None):
    """Codes b(k): d-digit binary of tau(k)-1 with 0 digits mapped to -1.

    ``K_tilde >= K`` pads the code space for robustness; d = ceil(log2
    K_tilde), clamped to one digit so a code is never the empty (all-zero)
    row reserved for "no match".
    """
    if K_tilde < K:
        raise ValueError("K_tilde must be at least K")
    if permutation is None:
        permutation = rng.substream(seed, rng.ENCODING, image).permutation(K_tilde)
    permutation = np.asarray(permutation, dtype=np.int64)
    d = max(1, math.ceil(math.log2(K_tilde))) if K_tilde > 1 else 1
    shifts = np.arange(d - 1, -1, -1)
    bits = (permutation[:K, None] >> shifts[None, :]) & 1
    codes = np.where(bits == 1, 1.0, -1.0)
    return BinaryEncoding(image=image, codes=codes, permutation=permutation, k_tilde=int(K_tilde))


def make_encodings(partition, k_tilde=None, seed=0):
    """One encoding per image; default pad is 10x the largest block."""
    if k_tilde is None:
        k_tilde = 10 * int(np.max(partition.block_sizes))
    return [
        make_binary_encoding(int(partition.block_sizes[i - 1]), k_tilde, seed=seed, image=i)
        for i in range(1, partition.n_images + 1)
    ]


def hungarian(costs):
    """Minimum-cost assignment; row -> column, -1 where a row is unmatched."""
    costs = np.asarray(costs, dtype=np.float64)
    if not np.all(np.isfinite(costs)):
        raise ValueError("costs must be finite")
    rows, cols = linear_sum_assignment(costs)
    out = np.full(costs.shape[0], -1, dtype=np.int64)
    out[rows] = cols
    return out


def recover_full_slow(X, partition):
    """Full-permutation recovery against image 1 via Hungarian rounding."""
    sizes = partition.block_sizes
    if len(np.unique(sizes)) != 1:
        raise DimensionMismatch("full recovery needs a uniform block size")
    K = int(sizes[0])
    L = partition.total
    E = np.zeros((L, K))
    E[partition.block_slice(1)] = np.eye(K)
    Xcol = X.apply(E)
    perms = [np.arange(K, dtype=np.int64)]
    for i in range(2, partition.n_images + 1):
        block = Xcol[partition.block_slice(i)]
        perms.append(hungarian(-block))
    return perms


def _pivot_scores(Q, registration):
    """Unregistered-correspondence mass per candidate pivot image."""
    part = Q.partition
    unreg = registration < 0
    scores = np.array(
        [unreg[part.block_slice(i)].sum() for i in range(1, part.n_images + 1)],
        dtype=np.float64,
    )
    for i, j, k, l in Q.pairs:
        if unreg[part.row(i, k)] and unreg[part.row(j, l)]:
            scores[i - 1] += 1.0
            scores[j - 1] += 1.0
    return scores


def _registration_sweep(X, Q, selection, seed, make_panel, match_row):
    part = Q.partition
    N = part.n_images
    if selection == "auto":
        selection = "max_overlap" if N <= 500 else "random"
    registration = np.full(part.total, -1, dtype=np.int64)
    chosen = np.zeros(N, dtype=bool)
    gen = rng.substream(seed, rng.PIVOT)
    m = 0
    pivots = []
    while np.any(registration < 0):
        if len(pivots) > N:
            raise NonTermination("pivot count exceeded the number of images")
        if selection == "random":
            cand = [
                j
                for j in range(1, N + 1)
                if not chosen[j - 1] and np.any(registration[part.block_slice(j)] < 0)
            ]
            j = int(gen.choice(np.array(cand)))
        else:
            j = int(np.argmax(_pivot_scores(Q, registration))) + 1
        chosen[j - 1] = True
        pivots.append(j)
        sl_j = part.block_slice(j)
        K_j = int(part.block_sizes[j - 1])
        fresh = [l for l in range(K_j) if registration[sl_j.start + l] < 0]
        Y = X.apply(make_panel(j))
        for l in fresh:
            registration[sl_j.start + l] = m
            m += 1
        for i in range(1, N + 1):
            if i == j:
                continue
            targets = list(fresh)
            base = int(part.offsets[i - 1])
            for k in range(int(part.block_sizes[i - 1])):
                if registration[base + k] >= 0 or not targets:
                    continue
                l = match_row(j, Y[base + k], targets)
                if l is not None:
                    registration[base + k] = registration[sl_j.start + l]
                    targets.remove(l)
    return RegistrationMap(partition=part, M=m, assignment=registration), pivots


def recover_partial_slow(X, Q, selection="auto", seed=0):
    """Registration sweep reading one-hot block columns of X.

    Each pivot costs K^(j) matvecs by X. A keypoint row is matched to the
    nearest basis vector among the pivot's unclaimed targets, with the zero
    vector (no match) winning all exact ties.
    """
    part = Q.partition
    L = part.total

    def make_panel(j):
        E = np.zeros((L, int(part.block_sizes[j - 1])))
        E[part.block_slice(j)] = np.eye(int(part.block_sizes[j - 1]))
        return E

    def match_row(j, y, targets):
        d0 = float(y @ y)
        t = np.asarray(targets)
        dists = d0 - 2.0 * y[t] + 1.0
        best = int(np.argmin(dists))
        if dists[best] < d0:
            return targets[best]
        return None

    reg, _ = _registration_sweep(X, Q, selection, seed, make_panel, match_row)
    return reg


def recover_partial_fast(X, Q, encodings, selection="auto", seed=0):
    """Registration sweep reading binary-code panels of X.

    Identical control flow to the slow sweep, but each pivot needs only
    d^(j) = ceil(log2 K_tilde) matvecs; rows are matched to the nearest
    code, the zero row meaning "no match".
    """
    part = Q.partition
    L = part.total
    if len(encodings) != part.n_images:
        raise DimensionMismatch("need one encoding per image")

    def make_panel(j):
        E = np.zeros((L, encodings[j - 1].digits))
        E[part.block_slice(j)] = encodings[j - 1].codes
        return E

    def match_row(j, y, targets):
        enc = encodings[j - 1]
        d0 = float(y @ y)
        t = np.asarray(targets)
        dots = enc.codes[t] @ y
        dists = d0 - 2.0 * dots + enc.digits
        best = int(np.argmin(dists))
        if dists[best] < d0:
            return targets[best]
        return None

    reg, _ = _registration_sweep(X, Q, selection, seed, make_panel, match_row)
    return reg


@dataclass
class MaskedScores:
    """Stochastic primal values on the observed support, plus the cut."""

    partition: object
    pairs: tuple
    values: np.ndarray
    threshold: float
    keep: np.ndarray
    mode: str
    gmm_fallback: bool = False

    def filtered(self):
        kept = [((i, k), (j, l)) for (i, j, k, l), f in zip(self.pairs, self.keep) if f]
        return CorrespondenceMatrix(self.partition, kept)


def score_support(Xhalf, Q, S=200, seed=0):
    """Stochastic estimates of X on the observed support, no thresholding.

    W = X^{1/2} Z for a Gaussian panel Z, so w_a . w_b / S estimates X_ab.
    """
    part = Q.partition
    Z = rng.gaussian_panel(seed, rng.MASKED_PANEL, 0, part.total, S)
    W = Xhalf.apply(Z)
    if len(Q.pairs) == 0:
        return MaskedScores(part, (), np.zeros(0), np.nan, np.zeros(0, dtype=bool), "raw")
    rows_a = np.array([part.row(i, k) for i, j, k, l in Q.pairs])
    rows_b = np.array([part.row(j, l) for i, j, k, l in Q.pairs])
    values = np.einsum("ij,ij->i", W[rows_a], W[rows_b]) / S
    return MaskedScores(
        partition=part,
        pairs=Q.pairs,
        values=values,
        threshold=np.nan,
        keep=np.zeros(len(values), dtype=bool),
        mode="raw",
    )


def masked_recover(Xhalf, Q, S=200, threshold_mode="gmm", percentile=90.0, seed=0):
    """Score every observed match, then keep the entries above a cutoff.

    The cutoff comes from a two-component mixture fit or a nearest-rank
    percentile; a degenerate mixture falls back to the percentile cut and
    flags it in the result.
    """
    raw = score_support(Xhalf, Q, S=S, seed=seed)
    if len(raw.pairs) == 0:
        raw.mode = threshold_mode
        return raw
    values = raw.values
    part = Q.partition
    fallback = False
    if threshold_mode == "gmm":
        try:
            cutoff = gmm_threshold(values)
        except DegenerateGMM:
            cutoff = percentile_threshold(values, percentile)
            fallback = True
    elif threshold_mode == "percentile":
        cutoff = percentile_threshold(values, percentile)
    else:
        raise ValueError(f"unknown threshold mode {threshold_mode!r}")
    keep = values > cutoff
    return MaskedScores(
        partition=part,
        pairs=Q.pairs,
        values=values,
        threshold=float(cutoff),
        keep=keep,
        mode=threshold_mode,
        gmm_fallback=fallback,
    )


def gmm_threshold(values, iters=100, seed=0):
    """Cutoff between the two modes of a 1-D two-component Gaussian fit.

    EM initialized by a median split; the cutoff is the equal-density point
    between the component means, or their weight-averaged mean when the
    quadratic degenerates. ``seed`` is reserved (the init is deterministic).
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyInput("no values to threshold")
    if x.size < 4:
        raise DegenerateGMM("need at least 4 values for a two-component fit")
    med = np.median(x)
    lo, hi = x[x <= med], x[x > med]
    if hi.size == 0 or lo.size == 0:
        raise DegenerateGMM("median split produced an empty component")
    w = np.array([lo.size, hi.size], dtype=np.float64) / x.size
    m = np.array([lo.mean(), hi.mean()])
    v = np.array([max(lo.var(), 1e-300), max(hi.var(), 1e-300)])
    _check_components(w, v)
    ll_prev = -np.inf
    for _ in range(iters):
        log_dens = (
            np.log(w)[:, None]
            - 0.5 * np.log(2.0 * np.pi * v)[:, None]
            - 0.5 * (x[None, :] - m[:, None]) ** 2 / v[:, None]
        )
        mx = np.max(log_dens, axis=0)
        log_total = mx + np.log(np.sum(np.exp(log_dens - mx), axis=0))
        resp = np.exp(log_dens - log_total)
        ll = float(np.sum(log_total))
        counts = resp.sum(axis=1)
        w = counts / x.size
        _check_components(w, v)
        m = (resp @ x) / counts
        v = (resp @ (x**2)) / counts - m**2
        v = np.maximum(v, 1e-300)
        _check_components(w, v)
        if abs(ll - ll_prev) < 1e-8 * (abs(ll_prev) + 1.0):
            break
        ll_prev = ll
    order = np.argsort(m)
    w, m, v = w[order], m[order], v[order]
    return _density_crossing(w, m, v)


def _check_components(w, v):
    if np.any(w < 1e-6):
        raise DegenerateGMM("component weight collapsed")
    if np.any(v < 1e-12):
        raise DegenerateGMM("component variance collapsed")


def _density_crossing(w, m, v):
    """Equal weighted-density point between two sorted component means."""
    midpoint = float((w[0] * m[0] + w[1] * m[1]) / (w[0] + w[1]))
    a = 0.5 / v[1] - 0.5 / v[0]
    b = m[0] / v[0] - m[1] / v[1]
    c = (
        0.5 * m[1] ** 2 / v[1]
        - 0.5 * m[0] ** 2 / v[0]
        - math.log(w[1] / w[0])
        - 0.5 * math.log(v[0] / v[1])
    )
    scale = max(abs(a), abs(b), abs(c), 1e-300)
    if abs(a) <= 1e-12 * scale:
        if abs(b) <= 1e-12 * scale:
            return midpoint
        root = -c / b
        return float(root) if m[0] < root < m[1] else midpoint
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return midpoint
    r = math.sqrt(disc)
    roots = [(-b - r) / (2.0 * a), (-b + r) / (2.0 * a)]
    inside = [x for x in roots if m[0] < x < m[1]]
    if not inside:
        return midpoint
    return float(min(inside, key=lambda x: abs(x - 0.5 * (m[0] + m[1]))))


def percentile_threshold(values, p):
    """Nearest-rank percentile of the value multiset."""
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyInput("no values to threshold")
    if not (0.0 < p < 100.0):
        raise ValueError("percentile must lie in (0, 100)")
    rank = max(1, math.ceil(p / 100.0 * x.size))
    return float(np.sort(x)[rank - 1])


def induced_matches(reg, Q):
    """Binary filter of Q keeping entries consistent with a registration."""
    part = Q.partition
    a = reg.assignment
    kept = [
        ((i, k), (j, l))
        for (i, j, k, l) in Q.pairs
        if a[part.row(i, k)] == a[part.row(j, l)]
    ]
    return CorrespondenceMatrix(part, kept)
