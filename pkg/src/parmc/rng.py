"""Counter-based random streams.

Every random number in the package is a pure function of
``(seed, processor, replication, draw index)``, computed with the
Philox4x32-10 bijection.  Nothing is carried between draws except an
integer cursor, so a replication produces the same numbers whether it
runs alone, inside a vectorised batch, or on any number of threads.

One Philox block (four 32-bit words) is spent per primitive draw and
yields two 53-bit uniforms.  ``normal`` uses both of them through the
Box-Muller transform.
"""

from __future__ import annotations

import numba
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_ROUNDS = 10
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


def philox4x32(counter, key):
    """Philox4x32-10 on broadcastable word arrays.

    ``counter`` is a 4-sequence of uint32-valued arrays, ``key`` a pair of
    python ints.  Returns four uint64 arrays holding 32-bit words.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in counter)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(_ROUNDS):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0 = hi1 ^ c1 ^ np.uint64(k0)
        c1 = lo1
        c2 = hi0 ^ c3 ^ np.uint64(k1)
        c3 = lo0
        if r < _ROUNDS - 1:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
    return c0, c1, c2, c3


@numba.njit(cache=True, nogil=True)
def _philox_uniforms(k0, k1, c0s, c1s, c2s, c3s, u1, u2):
    m0 = np.uint64(0xD2511F53)
    m1 = np.uint64(0xCD9E8D57)
    mask = np.uint64(0xFFFFFFFF)
    s32 = np.uint64(32)
    for j in range(u1.size):
        c0, c1, c2, c3 = c0s[j], c1s[j], c2s[j], c3s[j]
        a0, a1 = np.uint64(k0), np.uint64(k1)
        for r in range(10):
            p0 = m0 * c0
            p1 = m1 * c2
            c0, c1, c2, c3 = (p1 >> s32) ^ c1 ^ a0, p1 & mask, (p0 >> s32) ^ c3 ^ a1, p0 & mask
            a0 = (a0 + np.uint64(0x9E3779B9)) & mask
            a1 = (a1 + np.uint64(0xBB67AE85)) & mask
        hi = ((c0 << s32) | c1) >> np.uint64(11)
        lo = ((c2 << s32) | c3) >> np.uint64(11)
        u1[j] = (np.float64(hi) + 0.5) * 1.1102230246251565e-16
        u2[j] = (np.float64(lo) + 0.5) * 1.1102230246251565e-16


def _split64(x):
    x = int(x) & 0xFFFFFFFFFFFFFFFF
    return x & 0xFFFFFFFF, x >> 32


def _uniform_pair(seed, processor, replication, index):
    """Two arrays of uniforms in the open interval (0, 1)."""
    index = np.asarray(index, dtype=np.uint64)
    k0, k1 = _split64(seed)
    rep, proc, idx = np.broadcast_arrays(
        np.asarray(replication, dtype=np.uint64), np.asarray(processor, dtype=np.uint64), index
    )
    shape = rep.shape
    rep, proc, idx = (np.array(a, dtype=np.uint64).reshape(-1) for a in (rep, proc, idx))
    u1 = np.empty(rep.size)
    u2 = np.empty(rep.size)
    _philox_uniforms(k0, k1, rep, proc, idx & _MASK32, idx >> _SHIFT32, u1, u2)
    return u1.reshape(shape), u2.reshape(shape)


def _uniform_pair_reference(seed, processor, replication, index):
    """Pure-numpy twin of :func:`_uniform_pair` (slow; kept for cross-checks)."""
    index = np.asarray(index, dtype=np.uint64)
    w0, w1, w2, w3 = philox4x32(
        (replication, processor, index & _MASK32, index >> _SHIFT32), _split64(seed)
    )
    a = ((w0 << _SHIFT32) | w1) >> np.uint64(11)
    b = ((w2 << _SHIFT32) | w3) >> np.uint64(11)
    u1 = (a.astype(np.float64) + 0.5) * _INV_2_53
    u2 = (b.astype(np.float64) + 0.5) * _INV_2_53
    return u1, u2


def _box_muller(u1, u2):
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def derive_seed(seed: int, *path: int) -> int:
    """Child 64-bit seed for a numbered sub-experiment (up to three indices)."""
    words = list(path) + [0] * (3 - len(path))
    if len(words) > 3:
        raise ValueError("derive_seed supports at most three path indices")
    w0, w1, _, _ = philox4x32(
        (np.uint64(words[0]), np.uint64(words[1]), np.uint64(words[2]), np.uint64(0xA5A5A5A5)),
        _split64(seed),
    )
    return (int(w0) << 32) | int(w1)


class Stream:
    """Random stream of one replication ``(processor, replication)``.

    Draw ``i`` is Philox block ``i`` under ``seed``.  Sequential methods
    advance an internal cursor; the ``*_at`` variants address blocks
    directly and leave the cursor alone.
    """

    def __init__(self, seed: int, processor: int = 0, replication: int = 0, start: int = 0):
        self.seed = int(seed)
        self.processor = int(processor)
        self.replication = int(replication)
        self.cursor = int(start)

    def __repr__(self):
        return (
            f"Stream(seed={self.seed}, processor={self.processor}, "
            f"replication={self.replication}, cursor={self.cursor})"
        )

    def _take(self, k):
        idx = np.arange(self.cursor, self.cursor + k, dtype=np.uint64)
        self.cursor += k
        return idx

    def uniform_at(self, index: int) -> float:
        u1, _ = _uniform_pair(self.seed, self.processor, self.replication, index)
        return float(u1)

    def normal_at(self, index: int) -> float:
        u1, u2 = _uniform_pair(self.seed, self.processor, self.replication, index)
        return float(_box_muller(u1, u2))

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def normal(self) -> float:
        return float(self.normals(1)[0])

    def uniforms(self, k: int) -> np.ndarray:
        u1, _ = _uniform_pair(self.seed, self.processor, self.replication, self._take(k))
        return u1

    def normals(self, k: int) -> np.ndarray:
        u1, u2 = _uniform_pair(self.seed, self.processor, self.replication, self._take(k))
        return _box_muller(u1, u2)


class BatchStream:
    """Many replications advanced in lock-step.

    Lane ``j`` is the stream of ``(processors[j], replications[j])``, so
    ``batch.normal_at(i)[j] == Stream(seed, processors[j], replications[j]).normal_at(i)``.
    """

    def __init__(self, seed: int, processors, replications):
        self.seed = int(seed)
        self.processors = np.asarray(processors, dtype=np.uint64)
        self.replications = np.asarray(replications, dtype=np.uint64)
        if self.processors.shape != self.replications.shape:
            raise ValueError("processors and replications must have equal shape")

    @classmethod
    def for_grid(cls, seed: int, m: int, n: int) -> "BatchStream":
        """Lanes for every (processor, replication) of an m-by-n farm, row-major."""
        proc = np.repeat(np.arange(m, dtype=np.uint64), n)
        rep = np.tile(np.arange(n, dtype=np.uint64), m)
        return cls(seed, proc, rep)

    def __len__(self):
        return self.processors.size

    def subset(self, mask_or_index) -> "BatchStream":
        return BatchStream(self.seed, self.processors[mask_or_index], self.replications[mask_or_index])

    def lane(self, j: int) -> Stream:
        return Stream(self.seed, int(self.processors[j]), int(self.replications[j]))

    def uniform_at(self, index: int) -> np.ndarray:
        u1, _ = _uniform_pair(self.seed, self.processors, self.replications, np.uint64(index))
        return u1

    def normal_at(self, index: int) -> np.ndarray:
        u1, u2 = _uniform_pair(self.seed, self.processors, self.replications, np.uint64(index))
        return _box_muller(u1, u2)

    def uniform_pair_at(self, index: int):
        return _uniform_pair(self.seed, self.processors, self.replications, np.uint64(index))
