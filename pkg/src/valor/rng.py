"""Counter-based random streams shared by all simulation backends.

Every random draw in the simulator is a pure function of
``(master seed, replication, particle, step, attempt)``, realized as a
Philox-4x32-10 block cipher applied to that tuple.  This is what makes
ensembles reproducible regardless of execution order, thread count, or
backend: there is no generator state to share or hand off.

Counter layout (four 32-bit words)::

    c0 = attempt   (0 on the first try; bumped when a step is resampled)
    c1 = context   (0 = particle initialization, s >= 1 = step number s)
    c2 = particle id
    c3 = replication id

The 64-bit master seed forms the Philox key.  One block yields four
32-bit words, mapped to uniforms in (0, 1) and then to normal variates
via Box-Muller.  The compiled kernel reimplements the identical scheme.
"""

from __future__ import annotations

import numpy as np

PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85
PHILOX_ROUNDS = 10

_MASK32 = np.uint64(0xFFFFFFFF)
_U64 = np.uint64

#: maps a 32-bit word to the open interval (0, 1); the +0.5 offset keeps
#: Box-Muller's log() away from u = 0 exactly.
U32_TO_UNIT = 2.0 ** -32

TWO_PI = 2.0 * np.pi


def philox4x32(c0, c1, c2, c3, key0: int, key1: int):
    """Run the Philox-4x32-10 block function on counter words.

    Accepts scalars or arrays for the counter words (broadcast together);
    returns four uint64 arrays holding 32-bit output words.
    """
    c0 = np.asarray(c0, dtype=np.uint64)
    c1 = np.asarray(c1, dtype=np.uint64)
    c2 = np.asarray(c2, dtype=np.uint64)
    c3 = np.asarray(c3, dtype=np.uint64)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = _U64(key0 & 0xFFFFFFFF)
    k1 = _U64(key1 & 0xFFFFFFFF)
    m0 = _U64(PHILOX_M0)
    m1 = _U64(PHILOX_M1)
    w0 = _U64(PHILOX_W0)
    w1 = _U64(PHILOX_W1)
    for _ in range(PHILOX_ROUNDS):
        p0 = m0 * c0  # 32x32 -> 64 bit product, exact in uint64
        p1 = m1 * c2
        hi0 = p0 >> _U64(32)
        lo0 = p0 & _MASK32
        hi1 = p1 >> _U64(32)
        lo1 = p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + w0) & _MASK32
        k1 = (k1 + w1) & _MASK32
    return c0, c1, c2, c3


def _seed_key(seed: int) -> tuple[int, int]:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return seed & 0xFFFFFFFF, seed >> 32


def uniforms(seed: int, rep: int, context, pid, attempt=0):
    """Four uniform(0, 1) arrays for the given counter coordinates."""
    k0, k1 = _seed_key(seed)
    x0, x1, x2, x3 = philox4x32(attempt, context, pid, rep, k0, k1)
    return tuple((x.astype(np.float64) + 0.5) * U32_TO_UNIT for x in (x0, x1, x2, x3))


def step_normals(seed: int, rep: int, pid, step: int, attempt=0):
    """Three standard-normal draws per particle for one displacement step.

    One Philox block (four uniforms) feeds two Box-Muller pairs; the
    fourth variate is discarded.  ``step`` is 1-based.
    """
    u0, u1, u2, u3 = uniforms(seed, rep, step, pid, attempt)
    r0 = np.sqrt(-2.0 * np.log(u0))
    t0 = TWO_PI * u1
    z0 = r0 * np.cos(t0)
    z1 = r0 * np.sin(t0)
    r1 = np.sqrt(-2.0 * np.log(u2))
    z2 = r1 * np.cos(TWO_PI * u3)
    return z0, z1, z2


def init_angles(seed: int, rep: int, pid):
    """Uniform polar angle in [0, 2*pi) for off-axis emitter placement."""
    u0, _, _, _ = uniforms(seed, rep, 0, pid, 0)
    return TWO_PI * u0


def init_disk(seed: int, rep: int, pid, r_v: float):
    """(radius, angle) pairs uniform over the vessel cross-section."""
    u0, u1, _, _ = uniforms(seed, rep, 0, pid, 0)
    return r_v * np.sqrt(u0), TWO_PI * u1


_SM64_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One output of the splitmix64 sequence started at ``state``."""
    z = (state + _SM64_GAMMA) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Deterministic per-substream seed (grid points, figure curves).

    Equals the ``index``-th output of a splitmix64 stream seeded with the
    master seed, so substreams never collide for index < 2**64.
    """
    state = (int(master_seed) + index * _SM64_GAMMA) & 0xFFFFFFFFFFFFFFFF
    return splitmix64(state)
