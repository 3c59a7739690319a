# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Monte Carlo core: blocked particle stepping in plain C.

Particles advance in lockstep blocks of 64 so the per-step Philox,
Box-Muller and displacement loops stay branch-free and vectorizable.
Axial position is carried as x = 2*v*A + bx, where A accumulates the
profile factor (1 - r^2/r_v^2)*dt and bx the diffusive displacement;
since neither depends on v, one set of particle paths serves every
(velocity, receiver-slab) point of a sweep at once.

Blocks are embarrassingly parallel; each OpenMP thread accumulates
occupancy counts into its own buffer and the buffers are summed at the
end, so output is bit-identical for any thread count or schedule.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange, threadid
from libc.stdint cimport int64_t, uint32_t, uint64_t

cnp.import_array()

cdef extern from *:
    r"""
#include <stdint.h>
#include <math.h>

#define MC_B 64
#define MC_MAX_PTS 64
#define MC_TWO_NEG32 2.3283064365386962890625e-10
#define MC_TWO_PI 6.283185307179586476925286766559
/* particles this far past a receiver (in units of the remaining diffusive
   spread) are dropped from the step loop; re-entry odds are ~1e-12 */
#define MC_FREEZE_SIGMA 8.5

static inline void mc_philox(uint32_t c0, uint32_t c1, uint32_t c2, uint32_t c3,
                             uint32_t k0, uint32_t k1, uint32_t out[4])
{
    int r;
    for (r = 0; r < 10; ++r) {
        uint64_t p0 = (uint64_t)0xD2511F53u * c0;
        uint64_t p1 = (uint64_t)0xCD9E8D57u * c2;
        uint32_t hi0 = (uint32_t)(p0 >> 32), lo0 = (uint32_t)p0;
        uint32_t hi1 = (uint32_t)(p1 >> 32), lo1 = (uint32_t)p1;
        c0 = hi1 ^ c1 ^ k0;
        c1 = lo1;
        c2 = hi0 ^ c3 ^ k1;
        c3 = lo0;
        k0 += 0x9E3779B9u;
        k1 += 0xBB67AE85u;
    }
    out[0] = c0; out[1] = c1; out[2] = c2; out[3] = c3;
}

/* one triple of step normals: two Box-Muller pairs from one block,
   fourth variate discarded */
static void mc_normals3(uint32_t attempt, uint32_t step, uint32_t pid,
                        uint32_t rep, uint32_t k0, uint32_t k1,
                        double *n0, double *n1, double *n2)
{
    uint32_t o[4];
    double u0, u1, u2, u3, r0, r1, t0;
    mc_philox(attempt, step, pid, rep, k0, k1, o);
    u0 = ((double)o[0] + 0.5) * MC_TWO_NEG32;
    u1 = ((double)o[1] + 0.5) * MC_TWO_NEG32;
    u2 = ((double)o[2] + 0.5) * MC_TWO_NEG32;
    u3 = ((double)o[3] + 0.5) * MC_TWO_NEG32;
    r0 = sqrt(-2.0 * log(u0));
    t0 = MC_TWO_PI * u1;
    *n0 = r0 * cos(t0);
    *n1 = r0 * sin(t0);
    r1 = sqrt(-2.0 * log(u2));
    *n2 = r1 * cos(MC_TWO_PI * u3);
}

/* specular radial reflection into the disk, at most 8 applications;
   returns 1 if contained afterwards */
static inline int mc_reflect(double *py, double *pz, double r_v, double rv2)
{
    double y = *py, z = *pz;
    int it;
    for (it = 0; it < 8; ++it) {
        double rr2 = y * y + z * z;
        if (rr2 <= rv2) { *py = y; *pz = z; return 1; }
        {
            double rr = sqrt(rr2);
            double fac = (2.0 * r_v - rr) / rr;
            y *= fac; z *= fac;
        }
    }
    *py = y; *pz = z;
    return (y * y + z * z) <= rv2;
}

typedef struct {
    double D, r_v, dt, tx_off;
    uint64_t seed;
    uint32_t rep;
    int64_t n_steps;
    int64_t record_every;
    int64_t max_samples;
    int n_pts;
    int tx_uniform;          /* 1: release uniform over the cross-section */
    int want_positions;      /* run full horizon, write final coordinates */
    const double *two_v;     /* 2*v_avg per point */
    const double *lo;        /* slab leading edge per point */
    const double *hi;        /* slab trailing edge per point */
    const int64_t *first_rec; /* earliest step a count is possible */
    const int64_t *last_rec;  /* final recorded step */
    double *out_x, *out_y, *out_z;
} McSpec;

static int mc_block(const McSpec *sp, uint32_t pid0, int nb, uint32_t *counts)
{
    double ya[MC_B], za[MC_B], yb[MC_B], zb[MC_B];
    double A[MC_B], bx[MC_B];
    double u0[MC_B], u1[MC_B], u2[MC_B], u3[MC_B];
    double r0b[MC_B], r1b[MC_B];
    double n0[MC_B], n1[MC_B], n2[MC_B];
    unsigned char flag[MC_B];
    unsigned char passed[MC_MAX_PTS];
    double *yc = ya, *zc = za, *yn = yb, *zn = zb, *tmp;
    const double rv2 = sp->r_v * sp->r_v;
    const double inv_rv2 = 1.0 / rv2;
    const double dt = sp->dt;
    const double sn = sqrt(2.0 * sp->D * dt);
    const uint32_t k0 = (uint32_t)(sp->seed & 0xFFFFFFFFu);
    const uint32_t k1 = (uint32_t)(sp->seed >> 32);
    const uint32_t rep = sp->rep;
    int i, j;
    int64_t s;

    for (j = 0; j < sp->n_pts; ++j) passed[j] = 0;

    if (sp->tx_uniform) {
        /* area-uniform radius needs sqrt(u); angle from the second word */
        for (i = 0; i < nb; ++i) {
            uint32_t o[4];
            double rad, th;
            mc_philox(0u, 0u, pid0 + (uint32_t)i, rep, k0, k1, o);
            rad = sp->r_v * sqrt(((double)o[0] + 0.5) * MC_TWO_NEG32);
            th = MC_TWO_PI * (((double)o[1] + 0.5) * MC_TWO_NEG32);
            yc[i] = rad * cos(th);
            zc[i] = rad * sin(th);
        }
    } else if (sp->tx_off > 0.0) {
        for (i = 0; i < nb; ++i) {
            uint32_t o[4];
            double th;
            mc_philox(0u, 0u, pid0 + (uint32_t)i, rep, k0, k1, o);
            th = MC_TWO_PI * (((double)o[0] + 0.5) * MC_TWO_NEG32);
            yc[i] = sp->tx_off * cos(th);
            zc[i] = sp->tx_off * sin(th);
        }
    } else {
        for (i = 0; i < nb; ++i) { yc[i] = 0.0; zc[i] = 0.0; }
    }
    for (i = 0; i < nb; ++i) { A[i] = 0.0; bx[i] = 0.0; }

    for (s = 1; s <= sp->n_steps; ++s) {
        const uint32_t su = (uint32_t)s;
        int anyfix = 0;

        for (i = 0; i < nb; ++i) {
            uint32_t o[4];
            mc_philox(0u, su, pid0 + (uint32_t)i, rep, k0, k1, o);
            u0[i] = ((double)o[0] + 0.5) * MC_TWO_NEG32;
            u1[i] = ((double)o[1] + 0.5) * MC_TWO_NEG32;
            u2[i] = ((double)o[2] + 0.5) * MC_TWO_NEG32;
            u3[i] = ((double)o[3] + 0.5) * MC_TWO_NEG32;
        }
        /* Box-Muller in split passes: sin and cos of the same angle in one
           loop would fuse into sincos, which has no vector variant */
        for (i = 0; i < nb; ++i) {
            r0b[i] = sqrt(-2.0 * log(u0[i]));
            r1b[i] = sqrt(-2.0 * log(u2[i]));
        }
        for (i = 0; i < nb; ++i) {
            n0[i] = r0b[i] * cos(MC_TWO_PI * u1[i]);
            n2[i] = r1b[i] * cos(MC_TWO_PI * u3[i]);
        }
        for (i = 0; i < nb; ++i) {
            n1[i] = r0b[i] * sin(MC_TWO_PI * u1[i]);
        }
        for (i = 0; i < nb; ++i) {
            double yy = yc[i], zz = zc[i];
            double r2 = yy * yy + zz * zz;
            double ny, nz;
            A[i] += (1.0 - r2 * inv_rv2) * dt;
            bx[i] += sn * n0[i];
            ny = yy + sn * n1[i];
            nz = zz + sn * n2[i];
            yn[i] = ny; zn[i] = nz;
            flag[i] = (unsigned char)(ny * ny + nz * nz > rv2);
            anyfix += flag[i];
        }
        if (anyfix) {
            for (i = 0; i < nb; ++i) {
                uint32_t attempt = 0;
                if (!flag[i]) continue;
                while (!mc_reflect(&yn[i], &zn[i], sp->r_v, rv2)) {
                    double d0, d1, d2;
                    attempt++;
                    if (attempt > 64u) return -1;
                    mc_normals3(attempt, su, pid0 + (uint32_t)i, rep, k0, k1,
                                &d0, &d1, &d2);
                    bx[i] += sn * (d0 - n0[i]);
                    n0[i] = d0;
                    yn[i] = yc[i] + sn * d1;
                    zn[i] = zc[i] + sn * d2;
                }
            }
        }
        tmp = yc; yc = yn; yn = tmp;
        tmp = zc; zc = zn; zn = tmp;

        if (s % sp->record_every == 0) {
            const int64_t k = s / sp->record_every;
            for (j = 0; j < sp->n_pts; ++j) {
                double tv, lj, hj;
                uint32_t c = 0;
                if (passed[j] || s < sp->first_rec[j] || s > sp->last_rec[j])
                    continue;
                tv = sp->two_v[j]; lj = sp->lo[j]; hj = sp->hi[j];
                for (i = 0; i < nb; ++i) {
                    double xj = tv * A[i] + bx[i];
                    c += (uint32_t)((xj >= lj) & (xj <= hj));
                }
                counts[(int64_t)j * sp->max_samples + k] += c;
            }
        }

        if (!sp->want_positions && (s & 31) == 0) {
            int alldone = 1;
            for (j = 0; j < sp->n_pts; ++j) {
                double rem, thr, tv, mn;
                if (passed[j] || s >= sp->last_rec[j]) continue;
                rem = (double)(sp->last_rec[j] - s) * dt;
                thr = sp->hi[j] + MC_FREEZE_SIGMA * sqrt(2.0 * sp->D * rem);
                tv = sp->two_v[j];
                mn = tv * A[0] + bx[0];
                for (i = 1; i < nb; ++i) {
                    double xj = tv * A[i] + bx[i];
                    if (xj < mn) mn = xj;
                }
                if (mn > thr) passed[j] = 1; else alldone = 0;
            }
            if (alldone) break;
        }
    }

    if (sp->want_positions) {
        const double tv = sp->n_pts > 0 ? sp->two_v[0] : 0.0;
        for (i = 0; i < nb; ++i) {
            sp->out_x[pid0 + i] = tv * A[i] + bx[i];
            sp->out_y[pid0 + i] = yc[i];
            sp->out_z[pid0 + i] = zc[i];
        }
    }
    return 0;
}
    """
    int MC_B
    int MC_MAX_PTS
    ctypedef struct McSpec:
        double D, r_v, dt, tx_off
        uint64_t seed
        uint32_t rep
        int64_t n_steps
        int64_t record_every
        int64_t max_samples
        int n_pts
        int tx_uniform
        int want_positions
        const double *two_v
        const double *lo
        const double *hi
        const int64_t *first_rec
        const int64_t *last_rec
        double *out_x
        double *out_y
        double *out_z
    int mc_block(const McSpec *sp, uint32_t pid0, int nb, uint32_t *counts) nogil
    void mc_normals3(uint32_t attempt, uint32_t step, uint32_t pid,
                     uint32_t rep, uint32_t k0, uint32_t k1,
                     double *n0, double *n1, double *n2) nogil


BLOCK = MC_B
MAX_POINTS = MC_MAX_PTS


def run_points(double D, double r_v, double dt, seed, rep, int64_t M,
               double tx_radial_offset, int tx_uniform, int64_t record_every,
               double[::1] two_v, double[::1] lo, double[::1] hi,
               int64_t[::1] first_rec, int64_t[::1] last_rec,
               int64_t max_samples, int n_threads):
    """Occupancy counts for every (velocity, slab) point, uint32 [n_pts, max_samples].

    Sample k of point j is the number of molecules inside [lo_j, hi_j] at
    time k*record_every*dt when the axial coordinate is driven by
    velocity two_v_j/2.  Row j is only meaningful up to its own horizon
    last_rec[j]/record_every.
    """
    cdef int n_pts = two_v.shape[0]
    if n_pts < 1 or n_pts > MC_MAX_PTS:
        raise ValueError(f"n_pts must be in [1, {MC_MAX_PTS}], got {n_pts}")
    if not (lo.shape[0] == hi.shape[0] == first_rec.shape[0]
            == last_rec.shape[0] == n_pts):
        raise ValueError("point arrays must have equal length")
    if M < 1:
        raise ValueError("M must be >= 1")
    if n_threads < 1:
        n_threads = 1

    cdef int64_t n_steps = 0
    cdef int j
    for j in range(n_pts):
        if last_rec[j] > n_steps:
            n_steps = last_rec[j]

    counts_np = np.zeros((n_threads, n_pts, max_samples), dtype=np.uint32)
    cdef uint32_t[:, :, ::1] ct = counts_np

    cdef McSpec sp
    sp.D = D
    sp.r_v = r_v
    sp.dt = dt
    sp.tx_off = tx_radial_offset
    sp.seed = <uint64_t> (int(seed) & 0xFFFFFFFFFFFFFFFF)
    sp.rep = <uint32_t> (int(rep) & 0xFFFFFFFF)
    sp.n_steps = n_steps
    sp.record_every = record_every
    sp.max_samples = max_samples
    sp.n_pts = n_pts
    sp.tx_uniform = tx_uniform
    sp.want_positions = 0
    sp.two_v = &two_v[0]
    sp.lo = &lo[0]
    sp.hi = &hi[0]
    sp.first_rec = &first_rec[0]
    sp.last_rec = &last_rec[0]
    sp.out_x = NULL
    sp.out_y = NULL
    sp.out_z = NULL

    cdef int64_t n_blocks = (M + MC_B - 1) // MC_B
    cdef int64_t b
    cdef int nb, tid
    cdef int nfail = 0
    for b in prange(n_blocks, nogil=True, num_threads=n_threads,
                    schedule='dynamic'):
        tid = threadid()
        nb = MC_B
        if (b + 1) * MC_B > M:
            nb = <int> (M - b * MC_B)
        # reduction: a plain assignment would be thread-private and lost
        nfail += mc_block(&sp, <uint32_t> (b * MC_B), nb, &ct[tid, 0, 0]) != 0
    if nfail != 0:
        raise RuntimeError("wall reflection failed to converge after resampling")

    return counts_np.sum(axis=0, dtype=np.uint32)


def run_positions(double D, double r_v, double v_avg, double dt, seed, rep,
                  int64_t M, double tx_radial_offset, int tx_uniform,
                  int64_t n_steps, int n_threads):
    """Final (x, y, z) of every particle after n_steps; no receiver, no freeze."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if n_threads < 1:
        n_threads = 1

    x_np = np.empty(M, dtype=np.float64)
    y_np = np.empty(M, dtype=np.float64)
    z_np = np.empty(M, dtype=np.float64)
    cdef double[::1] x = x_np
    cdef double[::1] y = y_np
    cdef double[::1] z = z_np

    two_v_np = np.array([2.0 * v_avg], dtype=np.float64)
    zero64 = np.zeros(1, dtype=np.int64)
    cdef double[::1] two_v = two_v_np
    cdef int64_t[::1] zeros = zero64
    # counting disabled: first_rec > last_rec = 0 keeps the record loop idle
    one64 = np.ones(1, dtype=np.int64)
    cdef int64_t[::1] ones = one64

    cdef McSpec sp
    sp.D = D
    sp.r_v = r_v
    sp.dt = dt
    sp.tx_off = tx_radial_offset
    sp.seed = <uint64_t> (int(seed) & 0xFFFFFFFFFFFFFFFF)
    sp.rep = <uint32_t> (int(rep) & 0xFFFFFFFF)
    sp.n_steps = n_steps
    sp.record_every = 1
    sp.max_samples = 1
    sp.n_pts = 1
    sp.tx_uniform = tx_uniform
    sp.want_positions = 1
    sp.two_v = &two_v[0]
    sp.lo = &two_v[0]
    sp.hi = &two_v[0]
    sp.first_rec = &ones[0]
    sp.last_rec = &zeros[0]
    sp.out_x = &x[0]
    sp.out_y = &y[0]
    sp.out_z = &z[0]

    cdef uint32_t scratch[1]
    cdef int64_t n_blocks = (M + MC_B - 1) // MC_B
    cdef int64_t b
    cdef int nb
    cdef int nfail = 0
    for b in prange(n_blocks, nogil=True, num_threads=n_threads,
                    schedule='dynamic'):
        nb = MC_B
        if (b + 1) * MC_B > M:
            nb = <int> (M - b * MC_B)
        nfail += mc_block(&sp, <uint32_t> (b * MC_B), nb, &scratch[0]) != 0
    if nfail != 0:
        raise RuntimeError("wall reflection failed to converge after resampling")
    return x_np, y_np, z_np


def normals3(seed, rep, pid, step, attempt=0):
    """Step-noise triple straight from the C path, for stream cross-checks."""
    pid_arr = np.asarray(pid, dtype=np.uint64).ravel()
    cdef int n = pid_arr.shape[0]
    out0 = np.empty(n, dtype=np.float64)
    out1 = np.empty(n, dtype=np.float64)
    out2 = np.empty(n, dtype=np.float64)
    cdef double[::1] o0 = out0
    cdef double[::1] o1 = out1
    cdef double[::1] o2 = out2
    cdef uint64_t[::1] pv = pid_arr
    cdef uint64_t s64 = <uint64_t> (int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint32_t k0 = <uint32_t> (s64 & 0xFFFFFFFF)
    cdef uint32_t k1 = <uint32_t> (s64 >> 32)
    cdef uint32_t crep = <uint32_t> (int(rep) & 0xFFFFFFFF)
    cdef uint32_t cstep = <uint32_t> (int(step) & 0xFFFFFFFF)
    cdef uint32_t catt = <uint32_t> (int(attempt) & 0xFFFFFFFF)
    cdef int i
    for i in range(n):
        mc_normals3(catt, cstep, <uint32_t> pv[i], crep, k0, k1,
                    &o0[i], &o1[i], &o2[i])
    return out0, out1, out2
