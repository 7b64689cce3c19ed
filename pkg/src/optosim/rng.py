"""Counter-based random streams shared by the numba and numpy kernels.

Every trajectory ``j`` owns a 64-bit key derived from ``(seed, j)``; the
``c``-th uniform of that trajectory is ``splitmix64(key + (c + 1) * golden)``.
Nothing is sequential, so any partition of trajectories over threads draws
identical numbers.  The numpy path reproduces the integer stream of the
numba path exactly; normals may differ in the last ulp through libm.

Draws are organised in blocks of :data:`BLOCK` standard normals.  Block 0
seeds the initial state and block ``n + 1`` feeds integration step ``n``.
"""

import math

import numpy as np

from ._accel import njit

BLOCK = 8

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def stream_key(seed, traj):
    s0 = mix64(np.uint64(seed))
    return mix64(s0 + (np.uint64(traj) + _ONE) * GOLDEN)


@njit(cache=True)
def uniform(key, counter):
    """Uniform double in (0, 1]."""
    x = mix64(key + (np.uint64(counter) + _ONE) * GOLDEN)
    return (float(x >> _S11) + 1.0) * _INV53


@njit(cache=True)
def fill_block(key, block, out, count=BLOCK):
    """Write the first ``count`` (even) standard normals of ``block`` into ``out``."""
    base = block * BLOCK
    for p in range(count // 2):
        u1 = uniform(key, base + 2 * p)
        u2 = uniform(key, base + 2 * p + 1)
        rad = math.sqrt(-2.0 * math.log(u1))
        ang = _TWO_PI * u2
        out[2 * p] = rad * math.cos(ang)
        out[2 * p + 1] = rad * math.sin(ang)


# numpy twins, vectorised over trajectories -------------------------------


def mix64_np(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def stream_keys_np(seed, trajs):
    trajs = np.asarray(trajs, dtype=np.uint64)
    s0 = mix64_np(np.array([seed], dtype=np.uint64))[0]
    with np.errstate(over="ignore"):
        return mix64_np(s0 + (trajs + _ONE) * GOLDEN)


def block_np(keys, block, count=BLOCK):
    """First ``count`` normals of ``block`` for every key; shape ``(count, n)``."""
    keys = np.asarray(keys, dtype=np.uint64)
    base = np.uint64(block * BLOCK)
    out = np.empty((count, keys.size))
    with np.errstate(over="ignore"):
        _fill_np(keys, base, out)
    return out


def _fill_np(keys, base, out):
    for p in range(out.shape[0] // 2):
        c1 = base + np.uint64(2 * p)
        x1 = mix64_np(keys + (c1 + _ONE) * GOLDEN)
        x2 = mix64_np(keys + (c1 + np.uint64(2)) * GOLDEN)
        u1 = ((x1 >> _S11).astype(np.float64) + 1.0) * _INV53
        u2 = ((x2 >> _S11).astype(np.float64) + 1.0) * _INV53
        rad = np.sqrt(-2.0 * np.log(u1))
        ang = _TWO_PI * u2
        out[2 * p] = rad * np.cos(ang)
        out[2 * p + 1] = rad * np.sin(ang)


class CounterStream:
    """Single-trajectory stream with a ``standard_normal`` method.

    Each call consumes one whole block, matching the kernel layout: the
    first call returns block 0 (initial sampling), the next block 1 (step
    0), and so on.  ``size`` may not exceed :data:`BLOCK`.
    """

    def __init__(self, seed, traj):
        # numba returns a Python int; keep the key typed as uint64
        self.key = np.uint64(stream_key(np.uint64(seed), np.uint64(traj)))
        self.block = 0

    def standard_normal(self, size=BLOCK):
        if size > BLOCK:
            raise ValueError(f"at most {BLOCK} normals per draw")
        out = np.empty(BLOCK)
        fill_block(self.key, self.block, out)
        self.block += 1
        return out[:size]
