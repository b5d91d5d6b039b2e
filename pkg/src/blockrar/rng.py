"""Counter-based random streams (Philox4x32-10) evaluated on arrays of counters.

Every random number used by the simulator is a pure function of
``(seed, replication, stream label, block, slot)``.  The seed is the 64-bit
Philox key; the four 32-bit counter words are the replication index, the
stream label, the block index and the slot-pair index.  Because no state is
carried between draws, a batch of replications can be generated in one
vectorized call and the result for replication ``r`` never depends on which
other replications are in the batch or on how work is split across workers.

Each Philox block yields four 32-bit words, turned into two doubles with 53
random bits each, shifted by half an ulp so that 0 and 1 never occur.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)

# stream labels (counter word 1)
AUXILIARY = 1
ALLOCATION = 2
RESPONSE_EXPERIMENTAL = 3
RESPONSE_CONTROL = 4
RESPONSE_RUNIN = 5


def philox4x32(counter, key, rounds: int = 10):
    """Philox4x32 bijection.

    ``counter`` is a sequence of four broadcastable integer arrays, ``key`` a
    pair of integers.  Returns four uint64 arrays holding 32-bit words.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in counter)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint64(int(key[0]) & 0xFFFFFFFF)
    k1 = np.uint64(int(key[1]) & 0xFFFFFFFF)
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT, p0 & _MASK
        hi1, lo1 = p1 >> _SHIFT, p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def split_seed(seed: int) -> tuple[int, int]:
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return seed & 0xFFFFFFFF, seed >> 32


def _words_to_unit(a, b):
    bits = (a >> np.uint64(5)) * np.uint64(1 << 26) + (b >> np.uint64(6))
    return (bits.astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def uniforms(seed: int, reps, stream: int, block: int, n: int) -> np.ndarray:
    """Uniform(0, 1) draws of shape ``(len(reps), n)``."""
    reps = np.asarray(reps, dtype=np.uint64).reshape(-1, 1)
    if n == 0:
        return np.empty((reps.shape[0], 0))
    pairs = np.arange((n + 1) // 2, dtype=np.uint64).reshape(1, -1)
    x0, x1, x2, x3 = philox4x32((reps, stream, block, pairs), split_seed(seed))
    out = np.empty((reps.shape[0], 2 * pairs.shape[1]))
    out[:, 0::2] = _words_to_unit(x0, x1)
    out[:, 1::2] = _words_to_unit(x2, x3)
    return out[:, :n]


def normals(seed: int, reps, stream: int, block: int, n: int) -> np.ndarray:
    """Standard normal draws by inversion of :func:`uniforms`."""
    return ndtri(uniforms(seed, reps, stream, block, n))


class ReplicationStream:
    """Handle on the random streams of a fixed set of replications."""

    def __init__(self, seed: int, reps):
        split_seed(seed)
        self.seed = int(seed)
        self.reps = np.atleast_1d(np.asarray(reps, dtype=np.int64))
        if self.reps.ndim != 1 or np.any(self.reps < 0) or np.any(self.reps >= 2**32):
            raise ValueError("replication indices must be in [0, 2**32)")

    def __len__(self) -> int:
        return len(self.reps)

    def uniforms(self, stream: int, block: int, n: int) -> np.ndarray:
        return uniforms(self.seed, self.reps, stream, block, n)

    def normals(self, stream: int, block: int, n: int) -> np.ndarray:
        return normals(self.seed, self.reps, stream, block, n)
