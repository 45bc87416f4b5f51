"""Synthetic ground truth and independent pairwise corruption."""

from dataclasses import dataclass

import numpy as np

from . import rng
from .blocks import BlockPartition, CorrespondenceMatrix, GroundTruth


@dataclass(frozen=True)
class SynthConfig:
    N: int
    M: int
    K_min: int
    K_max: int
    q: float
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.K_min <= self.K_max <= self.M):
            raise ValueError("need 1 <= K_min <= K_max <= M")
        if self.N < 1:
            raise ValueError("need at least one image")
        if not (0.0 <= self.q <= 1.0):
            raise ValueError("corruption probability must lie in [0, 1]")


def gen_ground_truth(cfg):
    """Uniform injective keypoint-to-registry maps, one per image.

    Block sizes are uniform on [K_min, K_max]; each image sees the first
    K^(i) elements of a fresh uniform permutation of the registry.
    """
    sizes = rng.substream(cfg.seed, rng.SYNTH_SIZES).integers(
        cfg.K_min, cfg.K_max + 1, size=cfg.N
    )
    part = BlockPartition(sizes)
    assignment = np.empty(part.total, dtype=np.int64)
    for i in range(1, cfg.N + 1):
        perm = rng.substream(cfg.seed, rng.SYNTH_ASSIGN, i).permutation(cfg.M)
        assignment[part.block_slice(i)] = perm[: sizes[i - 1]]
    return GroundTruth(part, cfg.M, assignment)


def _pair_entries(a_i, a_j):
    """Match pairs (k, l) where two assignment vectors agree, 1-based."""
    pos = {int(v): k for k, v in enumerate(a_i)}
    out = []
    for l, v in enumerate(a_j):
        k = pos.get(int(v))
        if k is not None:
            out.append((k + 1, l + 1))
    return out


def corrupt(gt, q, seed=0):
    """Observed correspondences: each image pair replaced w.p. q.

    A corrupted pair gets the product of two fresh independent uniform
    injective maps of the same shapes, so its blocks remain valid partial
    permutations; a clean pair keeps the ground-truth product.
    """
    if not (0.0 <= q <= 1.0):
        raise ValueError("corruption probability must lie in [0, 1]")
    part = gt.partition
    M = gt.registry_size
    pairs = []
    for i in range(1, part.n_images + 1):
        a_i = gt.assignment[part.block_slice(i)]
        for j in range(i + 1, part.n_images + 1):
            a_j = gt.assignment[part.block_slice(j)]
            corrupted = rng.substream(seed, rng.CORRUPT_COIN, i, j).random() < q
            if corrupted:
                g = rng.substream(seed, rng.CORRUPT_DRAW, i, j)
                a_i_f = g.permutation(M)[: part.block_sizes[i - 1]]
                a_j_f = g.permutation(M)[: part.block_sizes[j - 1]]
                entries = _pair_entries(a_i_f, a_j_f)
            else:
                entries = _pair_entries(a_i, a_j)
            pairs.extend((((i, k), (j, l)) for k, l in entries))
    return CorrespondenceMatrix(part, pairs)
