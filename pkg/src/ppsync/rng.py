"""Seeded counter-based random streams.

Every random draw in the package flows from one integer seed through a
Philox substream addressed by a small integer path, so results never depend
on execution order or thread count.
"""

import numpy as np

# Stream tags. One per purpose so substreams never collide.
PANEL = 0
SYNTH_SIZES = 1
SYNTH_ASSIGN = 2
CORRUPT_COIN = 3
CORRUPT_DRAW = 4
LANCZOS = 5
ENCODING = 6
MASKED_PANEL = 7
PIVOT = 8
SPECTRAL = 9


def substream(seed, *path):
    """Generator for the substream addressed by ``path`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def gaussian_panel(seed, tag, iteration, dim, cols):
    """Standard-Gaussian ``dim x cols`` panel, one substream per column.

    Column ``c`` is drawn from ``substream(seed, tag, iteration, c)``, making
    the panel bitwise independent of any parallel schedule over columns.
    """
    Z = np.empty((dim, cols), dtype=np.float64)
    for c in range(cols):
        Z[:, c] = substream(seed, tag, iteration, c).standard_normal(dim)
    return Z
