"""Pure-NumPy twin of the compiled Monte Carlo core.

Same draw streams, same update rules, same receiver bookkeeping as
``_kernel``: trajectories agree with the compiled backend to floating
ulps (libm vs NumPy transcendentals), and occupancy counts agree exactly
except for astronomically unlikely boundary coincidences.

Vectorized over the whole population per step, so it is memory-bound and
roughly an order of magnitude slower than the compiled core; intended for
small runs, tests, and machines without a C toolchain.
"""

from __future__ import annotations

import math

import numpy as np

from . import rng

MAX_POINTS = 64
FREEZE_SIGMA = 8.5  # matches the compiled kernel's drop-out margin
_FREEZE_PERIOD = 32
_MAX_ATTEMPTS = 64


def _reflect_scalar(y: float, z: float, r_v: float, rv2: float):
    """Specular radial reflection into the disk; at most 8 applications."""
    for _ in range(8):
        rr2 = y * y + z * z
        if rr2 <= rv2:
            return y, z, True
        rr = math.sqrt(rr2)
        fac = (2.0 * r_v - rr) / rr
        y *= fac
        z *= fac
    return y, z, (y * y + z * z) <= rv2


def _fix_particle(seed, rep, pid, step, y_pre, z_pre, yn, zn, n0, bx_i, sn, r_v, rv2):
    """Reflect one escaped particle, resampling its draws if reflection fails."""
    attempt = 0
    while True:
        yn, zn, ok = _reflect_scalar(yn, zn, r_v, rv2)
        if ok:
            return yn, zn, n0, bx_i
        attempt += 1
        if attempt > _MAX_ATTEMPTS:
            raise RuntimeError(
                "wall reflection failed to converge after resampling"
            )
        d0, d1, d2 = (
            float(v) for v in rng.step_normals(seed, rep, pid, step, attempt)
        )
        bx_i += sn * (d0 - n0)
        n0 = d0
        yn = y_pre + sn * d1
        zn = z_pre + sn * d2


def _init_positions(seed, rep, pids, tx_radial_offset, tx_uniform, r_v):
    if tx_uniform:
        rad, th = rng.init_disk(seed, rep, pids, r_v)
        return rad * np.cos(th), rad * np.sin(th)
    if tx_radial_offset > 0.0:
        th = rng.init_angles(seed, rep, pids)
        return tx_radial_offset * np.cos(th), tx_radial_offset * np.sin(th)
    n = pids.shape[0]
    return np.zeros(n), np.zeros(n)


def run_points(
    D: float,
    r_v: float,
    dt: float,
    seed: int,
    rep: int,
    M: int,
    tx_radial_offset: float,
    tx_uniform: int,
    record_every: int,
    two_v: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    first_rec: np.ndarray,
    last_rec: np.ndarray,
    max_samples: int,
    n_threads: int = 1,
) -> np.ndarray:
    """Occupancy counts per (velocity, slab) point; see the compiled twin.

    ``n_threads`` is accepted for signature parity and ignored (NumPy
    kernels run single-threaded; output does not depend on it).
    """
    two_v = np.asarray(two_v, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    first_rec = np.asarray(first_rec, dtype=np.int64)
    last_rec = np.asarray(last_rec, dtype=np.int64)
    n_pts = two_v.shape[0]
    if not 1 <= n_pts <= MAX_POINTS:
        raise ValueError(f"n_pts must be in [1, {MAX_POINTS}], got {n_pts}")
    if M < 1:
        raise ValueError("M must be >= 1")

    n_steps = int(last_rec.max())
    rv2 = r_v * r_v
    inv_rv2 = 1.0 / rv2
    sn = math.sqrt(2.0 * D * dt)

    pids = np.arange(M, dtype=np.uint64)
    y, z = _init_positions(seed, rep, pids, tx_radial_offset, tx_uniform, r_v)
    A = np.zeros(M)
    bx = np.zeros(M)

    counts = np.zeros((n_pts, max_samples), dtype=np.uint32)
    passed = np.zeros(n_pts, dtype=bool)

    for s in range(1, n_steps + 1):
        z0, z1, z2 = rng.step_normals(seed, rep, pids, s)
        r2 = y * y + z * z
        A += (1.0 - r2 * inv_rv2) * dt
        bx += sn * z0
        yn = y + sn * z1
        zn = z + sn * z2
        escaped = (yn * yn + zn * zn) > rv2
        if escaped.any():
            for i in np.flatnonzero(escaped):
                yn[i], zn[i], _, bx[i] = _fix_particle(
                    seed, rep, int(pids[i]), s,
                    float(y[i]), float(z[i]), float(yn[i]), float(zn[i]),
                    float(z0[i]), float(bx[i]), sn, r_v, rv2,
                )
        y, z = yn, zn

        if s % record_every == 0:
            k = s // record_every
            for j in range(n_pts):
                if passed[j] or s < first_rec[j] or s > last_rec[j]:
                    continue
                xj = two_v[j] * A + bx
                counts[j, k] = np.count_nonzero((xj >= lo[j]) & (xj <= hi[j]))

        if s % _FREEZE_PERIOD == 0:
            done = np.ones(pids.shape[0], dtype=bool)
            alldone = True
            for j in range(n_pts):
                if passed[j] or s >= last_rec[j]:
                    continue
                rem = float(last_rec[j] - s) * dt
                thr = hi[j] + FREEZE_SIGMA * math.sqrt(2.0 * D * rem)
                beyond = (two_v[j] * A + bx) > thr
                if beyond.all():
                    passed[j] = True
                else:
                    alldone = False
                    done &= beyond
            if alldone:
                break
            if done.any():
                keep = ~done
                pids = pids[keep]
                A = A[keep]
                bx = bx[keep]
                y = y[keep]
                z = z[keep]
                if pids.shape[0] == 0:
                    break
    return counts


def run_positions(
    D: float,
    r_v: float,
    v_avg: float,
    dt: float,
    seed: int,
    rep: int,
    M: int,
    tx_radial_offset: float,
    tx_uniform: int,
    n_steps: int,
    n_threads: int = 1,
):
    """Final (x, y, z) of every particle after ``n_steps``; no receiver."""
    if M < 1:
        raise ValueError("M must be >= 1")
    rv2 = r_v * r_v
    inv_rv2 = 1.0 / rv2
    sn = math.sqrt(2.0 * D * dt)

    pids = np.arange(M, dtype=np.uint64)
    y, z = _init_positions(seed, rep, pids, tx_radial_offset, tx_uniform, r_v)
    A = np.zeros(M)
    bx = np.zeros(M)

    for s in range(1, int(n_steps) + 1):
        z0, z1, z2 = rng.step_normals(seed, rep, pids, s)
        r2 = y * y + z * z
        A += (1.0 - r2 * inv_rv2) * dt
        bx += sn * z0
        yn = y + sn * z1
        zn = z + sn * z2
        escaped = (yn * yn + zn * zn) > rv2
        if escaped.any():
            for i in np.flatnonzero(escaped):
                yn[i], zn[i], _, bx[i] = _fix_particle(
                    seed, rep, int(pids[i]), s,
                    float(y[i]), float(z[i]), float(yn[i]), float(zn[i]),
                    float(z0[i]), float(bx[i]), sn, r_v, rv2,
                )
        y, z = yn, zn

    return 2.0 * v_avg * A + bx, y, z
