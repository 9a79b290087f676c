"""Counter-based random streams addressed by logical indices.

Every draw in the package comes from a Philox generator whose key is derived
from ``(seed, purpose, *indices)`` through :class:`numpy.random.SeedSequence`.
Position inside a stream is the logical index of the draw (mode number,
particle number within a block), never the order in which work executes.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

# Purpose tags keep streams for different concerns disjoint.
PURPOSES: dict[str, int] = {
    "zeta": 0,
    "eta": 1,
    "init": 2,
    "noise": 3,
    "select": 4,
    "empirical": 5,
    "field": 6,
    "ipm": 7,
}

# Particles per logical block; each block owns one noise stream.
BLOCK_SIZE = 4096

_U52 = 1 << 52


def stream(seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """Return a fresh Philox generator keyed by *seed*, *purpose* and *indices*."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    try:
        tag = PURPOSES[purpose]
    except KeyError:
        available = ", ".join(sorted(PURPOSES))
        raise KeyError(f"Unknown stream purpose '{purpose}'. Available: {available}") from None
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(tag, *indices))
    return np.random.Generator(np.random.Philox(ss))


def open_uniforms(gen: np.random.Generator, size: int | tuple[int, ...]) -> np.ndarray:
    """Uniforms on the open interval (0, 1), one 64-bit draw each."""
    k = gen.integers(0, _U52, size=size, dtype=np.int64)
    return (k + 0.5) * 2.0**-52


def normals(seed: int, purpose: str, *indices: int, size: int | tuple[int, ...]) -> np.ndarray:
    """Standard normals by inverse CDF of counter uniforms.

    The first ``n`` values of a stream do not depend on how many are drawn,
    so a longer request extends a shorter one exactly.
    """
    return ndtri(open_uniforms(stream(seed, purpose, *indices), size))


def derive_seed(master: int, purpose: str, *indices: int) -> int:
    """Derive a 63-bit subsystem seed from the master seed."""
    if master < 0:
        raise ValueError(f"seed must be non-negative, got {master}")
    ss = np.random.SeedSequence(entropy=master, spawn_key=(PURPOSES[purpose], *indices))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def n_blocks(n: int) -> int:
    return (n + BLOCK_SIZE - 1) // BLOCK_SIZE
