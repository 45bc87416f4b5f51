"""Text and binary file formats used by the CLI.

Correspondences (PPSQ v1) and registrations (PPSR v1) are line-oriented
text, 1-based, deterministic down to the byte for a fixed object. Duals
(PPSD v1) are a one-line JSON header followed by little-endian float64
payload.
"""

import json

import numpy as np

from .blocks import BlockPartition, CorrespondenceMatrix, GroundTruth
from .solvers import DualStrong, DualWeak

Q_MAGIC = "PPSQ v1"
R_MAGIC = "PPSR v1"
D_MAGIC = "PPSD v1"


class FormatError(ValueError):
    pass


def _sizes_line(partition):
    return " ".join(str(int(s)) for s in partition.block_sizes)


def write_correspondence(path, Q):
    lines = [Q_MAGIC, str(Q.partition.n_images), _sizes_line(Q.partition)]
    lines.extend(f"{i} {j} {k} {l}" for i, j, k, l in Q.pairs)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_correspondence(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != Q_MAGIC:
        raise FormatError(f"{path}: expected header {Q_MAGIC!r}")
    n = int(lines[1])
    sizes = np.array([int(tok) for tok in lines[2].split()], dtype=np.int64)
    if len(sizes) != n:
        raise FormatError(f"{path}: expected {n} block sizes")
    part = BlockPartition(sizes)
    pairs = []
    for line in lines[3:]:
        if not line.strip():
            continue
        i, j, k, l = (int(tok) for tok in line.split())
        pairs.append(((i, k), (j, l)))
    return CorrespondenceMatrix(part, pairs)


def write_registration(path, reg):
    """Works for ground truths and recovered registration maps alike."""
    part = reg.partition
    M = getattr(reg, "registry_size", None)
    if M is None:
        M = reg.M
    lines = [R_MAGIC, str(part.n_images), _sizes_line(part), str(int(M))]
    for r, m in enumerate(reg.assignment):
        i, k = part.image_of_row(r)
        lines.append(f"{i} {k} {int(m) + 1}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_registration(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != R_MAGIC:
        raise FormatError(f"{path}: expected header {R_MAGIC!r}")
    n = int(lines[1])
    sizes = np.array([int(tok) for tok in lines[2].split()], dtype=np.int64)
    if len(sizes) != n:
        raise FormatError(f"{path}: expected {n} block sizes")
    part = BlockPartition(sizes)
    M = int(lines[3])
    assignment = np.full(part.total, -1, dtype=np.int64)
    for line in lines[4:]:
        if not line.strip():
            continue
        i, k, m = (int(tok) for tok in line.split())
        assignment[part.row(i, k)] = m - 1
    if np.any(assignment < 0):
        raise FormatError(f"{path}: some keypoints lack an assignment")
    return GroundTruth(part, M, assignment)


def write_duals(path, duals, partition, beta):
    if isinstance(duals, DualStrong):
        kind = "strong"
        payload = np.concatenate([b.ravel() for b in duals.lambdas])
    elif isinstance(duals, DualWeak):
        kind = "weak"
        payload = np.concatenate([duals.lam, duals.mu])
    else:
        raise TypeError(f"cannot serialize {type(duals).__name__}")
    header = {
        "magic": D_MAGIC,
        "kind": kind,
        "beta": float(beta),
        "n_images": partition.n_images,
        "block_sizes": [int(s) for s in partition.block_sizes],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode())
        fh.write(b"\n")
        fh.write(payload.astype("<f8").tobytes())


def read_duals(path):
    """Returns (duals, partition, beta)."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = np.frombuffer(fh.read(), dtype="<f8")
    header = json.loads(header_line.decode())
    if header.get("magic") != D_MAGIC:
        raise FormatError(f"{path}: expected header magic {D_MAGIC!r}")
    part = BlockPartition(np.array(header["block_sizes"], dtype=np.int64))
    beta = float(header["beta"])
    if header["kind"] == "strong":
        blocks = []
        pos = 0
        for K in part.block_sizes:
            K = int(K)
            blocks.append(payload[pos : pos + K * K].reshape(K, K).copy())
            pos += K * K
        if pos != len(payload):
            raise FormatError(f"{path}: trailing payload bytes")
        return DualStrong(lambdas=blocks), part, beta
    if header["kind"] == "weak":
        L = part.total
        if len(payload) != L + part.n_images:
            raise FormatError(f"{path}: payload length mismatch")
        return DualWeak(lam=payload[:L].copy(), mu=payload[L:].copy()), part, beta
    raise FormatError(f"{path}: unknown dual kind {header['kind']!r}")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)
