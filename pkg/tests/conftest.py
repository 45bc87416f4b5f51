import numpy as np
import pytest

from ppsync import BlockPartition, CorrespondenceMatrix, GroundTruth


def dense_from_pairs(partition, pairs):
    """Independent densification: identity plus loops over the pair list."""
    L = partition.total
    Q = np.eye(L)
    for (i, k), (j, l) in pairs:
        a, b = partition.row(i, k), partition.row(j, l)
        Q[a, b] = 1.0
        Q[b, a] = 1.0
    return Q


def random_instance(seed, n_images=5, max_k=4, match_prob=0.6):
    """Small random valid correspondence matrix plus its pair list."""
    gen = np.random.default_rng(seed)
    sizes = gen.integers(1, max_k + 1, size=n_images)
    part = BlockPartition(sizes)
    pairs = []
    for i in range(1, n_images + 1):
        for j in range(i + 1, n_images + 1):
            ks = list(range(1, sizes[i - 1] + 1))
            ls = list(range(1, sizes[j - 1] + 1))
            gen.shuffle(ks)
            gen.shuffle(ls)
            for k, l in zip(ks, ls):
                if gen.random() < match_prob:
                    pairs.append(((i, k), (j, l)))
    return part, CorrespondenceMatrix(part, pairs), pairs


def random_ground_truth(seed, n_images=4, m=6, k_max=4):
    gen = np.random.default_rng(seed)
    sizes = gen.integers(1, min(k_max, m) + 1, size=n_images)
    part = BlockPartition(sizes)
    assignment = np.concatenate(
        [gen.permutation(m)[: sizes[i]] for i in range(n_images)]
    )
    return GroundTruth(part, m, assignment)


@pytest.fixture(params=["compiled", "python"])
def backend(request, monkeypatch):
    from ppsync import kernels

    if request.param == "compiled" and not kernels.HAVE_COMPILED:
        pytest.skip("compiled kernels not built")
    monkeypatch.setenv("PPS_BACKEND", request.param)
    return request.param
