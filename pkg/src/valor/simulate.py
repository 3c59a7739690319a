"""Particle-based ground truth: Monte Carlo transport in the vessel.

Each molecule performs independent Brownian motion with an axial drift
given by the local Poiseuille velocity, evaluated at the pre-step radial
position (explicit Euler-Maruyama).  The lateral wall reflects; the ends
are unbounded.  A transparent slab receiver [l, l+w] spanning the full
cross-section is counted at every recording instant; molecules are never
absorbed or removed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import __version__ as _pkg_version
from .analytic import auto_duration
from .backend import get_kernel, resolve_threads
from .physics import ChannelParams, DomainError

#: generous bound (in units of the diffusive spread) used when deciding
#: how early a molecule could conceivably reach the receiver
_ARRIVAL_SIGMA = 9.0


class ReflectionError(RuntimeError):
    """Wall reflection did not converge; the step must be resampled."""


@dataclass(frozen=True)
class Particle:
    """Position of one molecule, um.  x is axial; (y, z) span the cross-section."""

    x: float
    y: float
    z: float

    @property
    def r(self) -> float:
        return math.hypot(self.y, self.z)


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo controls.

    ``T_sim=None`` selects the automatic horizon t_peak + 12 sigma from
    the analytic model, which keeps variance estimates free of tail
    truncation.  ``tau_offset`` is added to all reported timestamps to
    emulate an unknown emission time.
    """

    M: int
    dt: float
    T_sim: float | None = None
    record_every: int = 1
    seed: int = 0
    tx_release: str = "uniform"
    tx_radial_offset: float = 0.0
    tau_offset: float = 0.0

    def __post_init__(self):
        if self.M < 1:
            raise DomainError(f"M must be >= 1, got {self.M}")
        if self.tx_release not in ("uniform", "point"):
            raise DomainError(
                f"tx_release must be 'uniform' or 'point', got {self.tx_release!r}"
            )
        if not self.dt > 0:
            raise DomainError(f"dt must be > 0, got {self.dt}")
        if self.T_sim is not None and not self.T_sim > 0:
            raise DomainError(f"T_sim must be > 0 or None (auto), got {self.T_sim}")
        if self.record_every < 1:
            raise DomainError(f"record_every must be >= 1, got {self.record_every}")
        if self.tx_radial_offset < 0:
            raise DomainError("tx_radial_offset must be >= 0")
        if self.tau_offset < 0:
            raise DomainError(f"tau_offset must be >= 0, got {self.tau_offset}")


@dataclass
class SignalRecord:
    """Receiver count time series of one replication."""

    timestamps: np.ndarray
    counts: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        self.counts = np.asarray(self.counts)
        if self.timestamps.shape != self.counts.shape:
            raise ValueError("timestamps and counts must have equal length")

    @property
    def sample_spacing(self) -> float:
        if self.timestamps.size < 2:
            raise ValueError("record too short to define a sample spacing")
        return float(self.timestamps[1] - self.timestamps[0])


def reflect(y: float, z: float, r_v: float) -> tuple[float, float]:
    """Map a point back inside the vessel wall by specular radial reflection.

    The radius folds as r -> 2*r_v - r with the polar angle preserved,
    applied iteratively (up to 8 times).  Raises :class:`ReflectionError`
    if the point is still outside afterwards, which at sane time steps
    means the step size is absurd relative to the vessel radius.
    """
    rv2 = r_v * r_v
    for _ in range(8):
        rr2 = y * y + z * z
        if rr2 <= rv2:
            return y, z
        rr = math.sqrt(rr2)
        fac = (2.0 * r_v - rr) / rr
        y *= fac
        z *= fac
    if y * y + z * z <= rv2:
        return y, z
    raise ReflectionError(
        f"point remains outside r_v={r_v} after 8 reflections; "
        "resample the diffusion draws or reduce dt"
    )


def step(
    particle: Particle,
    dt: float,
    params: ChannelParams,
    noise: Sequence[float],
) -> Particle:
    """Advance one molecule by one time step.

    Drift acts axially with the flow velocity evaluated at the pre-step
    radial position; the three ``noise`` values are standard normal draws
    scaled by sqrt(2*D*dt).  Wall containment is restored by reflection;
    a non-converging reflection raises and the caller is expected to
    retry the step with fresh draws.
    """
    if dt <= 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    n0, n1, n2 = (float(n) for n in noise)
    r2 = particle.y * particle.y + particle.z * particle.z
    v = 2.0 * params.v_avg * (1.0 - r2 / (params.r_v * params.r_v))
    sn = math.sqrt(2.0 * params.D * dt)
    x = particle.x + v * dt + sn * n0
    y = particle.y + sn * n1
    z = particle.z + sn * n2
    y, z = reflect(y, z, params.r_v)
    return Particle(x=x, y=y, z=z)


def resolve_duration(params: ChannelParams, cfg: SimConfig) -> float:
    """Simulation horizon in seconds; 'auto' needs flow to place the pulse."""
    if cfg.T_sim is not None:
        return cfg.T_sim
    if params.v_avg <= 0:
        raise DomainError("T_sim=auto requires v_avg > 0; give an explicit T_sim")
    return auto_duration(params)


def earliest_arrival_step(params: ChannelParams, dt: float) -> int:
    """First step at which any molecule could plausibly reach the receiver.

    Bounds the axial position by full centerline advection plus a
    9-sigma diffusive excursion; before this step the occupancy of
    [l, l+w] is zero beyond any statistical doubt, so the kernels skip
    the counting work.
    """
    c = _ARRIVAL_SIGMA * math.sqrt(2.0 * params.D)
    lo = params.l
    if params.v_avg > 0:
        u = (-c + math.sqrt(c * c + 8.0 * params.v_avg * lo)) / (4.0 * params.v_avg)
        t0 = u * u
    else:
        t0 = (lo / c) ** 2
    return max(1, int(t0 / dt))


def _plan_points(channels: Sequence[ChannelParams], cfg: SimConfig):
    """Kernel-ready arrays for a set of receivers sharing one medium."""
    if not channels:
        raise ValueError("at least one channel point is required")
    d0, rv0 = channels[0].D, channels[0].r_v
    for ch in channels:
        if ch.D != d0 or ch.r_v != rv0:
            raise ValueError(
                "shared-path points must agree on D and r_v; "
                "run separate ensembles for different media"
            )
        if cfg.tx_radial_offset >= ch.r_v:
            raise DomainError("tx_radial_offset must be < r_v")
    spacing = cfg.record_every * cfg.dt
    two_v = np.array([2.0 * ch.v_avg for ch in channels], dtype=np.float64)
    lo = np.array([ch.l for ch in channels], dtype=np.float64)
    hi = np.array([ch.l + ch.w for ch in channels], dtype=np.float64)
    n_samples = []
    for ch in channels:
        T = resolve_duration(ch, cfg)
        n_samples.append(int(math.ceil(T / spacing)) + 1)
    n_samples = np.array(n_samples, dtype=np.int64)
    last_rec = (n_samples - 1) * cfg.record_every
    first_rec = np.array(
        [earliest_arrival_step(ch, cfg.dt) for ch in channels], dtype=np.int64
    )
    return two_v, lo, hi, first_rec, last_rec, n_samples


def run_points(
    channels: Sequence[ChannelParams],
    cfg: SimConfig,
    replication_id: int = 0,
    *,
    backend: str | None = None,
    n_threads: int | None = None,
) -> list[SignalRecord]:
    """Simulate one replication observed by several receiver points at once.

    All points share the same medium (D, r_v) and the same molecule
    paths; each point applies its own flow velocity and receiver slab.
    Point j's record is bit-identical to a single-point run of that
    scenario with the same seed and replication id, so a sweep is exactly
    the union of its individual runs (with common random numbers across
    points).
    """
    two_v, lo, hi, first_rec, last_rec, n_samples = _plan_points(channels, cfg)
    kernel = get_kernel(backend)
    nt = resolve_threads(n_threads)
    counts = kernel.run_points(
        channels[0].D,
        channels[0].r_v,
        cfg.dt,
        cfg.seed,
        replication_id,
        cfg.M,
        cfg.tx_radial_offset,
        1 if cfg.tx_release == "uniform" else 0,
        cfg.record_every,
        two_v,
        lo,
        hi,
        first_rec,
        last_rec,
        int(n_samples.max()),
        nt,
    )
    spacing = cfg.record_every * cfg.dt
    records = []
    for j, ch in enumerate(channels):
        ns = int(n_samples[j])
        t = cfg.tau_offset + np.arange(ns, dtype=np.float64) * spacing
        rec = SignalRecord(
            timestamps=t,
            counts=counts[j, :ns].copy(),
            meta=_record_meta(ch, cfg, replication_id),
        )
        records.append(rec)
    return records


def _record_meta(params: ChannelParams, cfg: SimConfig, rep: int) -> dict:
    return {
        "units": {"length": "um", "time": "s"},
        "channel": {
            "D": params.D,
            "r_v": params.r_v,
            "v_avg": params.v_avg,
            "l": params.l,
            "w": params.w,
        },
        "sim": {
            "M": cfg.M,
            "dt": cfg.dt,
            "T_sim": cfg.T_sim,
            "record_every": cfg.record_every,
            "seed": cfg.seed,
            "tx_release": cfg.tx_release,
            "tx_radial_offset": cfg.tx_radial_offset,
            "tau_offset": cfg.tau_offset,
        },
        "rep": rep,
        "version": _pkg_version,
    }


def run_replication(
    params: ChannelParams,
    cfg: SimConfig,
    replication_id: int = 0,
    *,
    backend: str | None = None,
    n_threads: int | None = None,
) -> SignalRecord:
    """Release M molecules at t=0 and record the receiver count series.

    Molecules start at x=0 at radius ``tx_radial_offset`` (angle drawn
    uniformly); counts are instantaneous occupancy of the [l, l+w] slab.
    Timestamps carry the configured ``tau_offset``.
    """
    return run_points(
        [params], cfg, replication_id, backend=backend, n_threads=n_threads
    )[0]


def run_ensemble(
    params: ChannelParams,
    cfg: SimConfig,
    n_reps: int,
    *,
    backend: str | None = None,
    n_threads: int | None = None,
) -> list[SignalRecord]:
    """Independent replications r = 0..n_reps-1.

    Streams are keyed by (seed, replication, particle), so the result is
    the same whatever order or parallelism executes them.
    """
    if n_reps < 1:
        raise ValueError(f"n_reps must be >= 1, got {n_reps}")
    return [
        run_replication(params, cfg, r, backend=backend, n_threads=n_threads)
        for r in range(n_reps)
    ]


def run_positions(
    params: ChannelParams,
    cfg: SimConfig,
    n_steps: int,
    replication_id: int = 0,
    *,
    backend: str | None = None,
    n_threads: int | None = None,
):
    """Final (x, y, z) arrays after ``n_steps``; for moment-level checks."""
    kernel = get_kernel(backend)
    nt = resolve_threads(n_threads)
    if cfg.tx_radial_offset >= params.r_v:
        raise DomainError("tx_radial_offset must be < r_v")
    return kernel.run_positions(
        params.D,
        params.r_v,
        params.v_avg,
        cfg.dt,
        cfg.seed,
        replication_id,
        cfg.M,
        cfg.tx_radial_offset,
        1 if cfg.tx_release == "uniform" else 0,
        int(n_steps),
        nt,
    )


def mean_signal(records: Sequence[SignalRecord]) -> SignalRecord:
    """Ensemble mean of equally-shaped records (float counts)."""
    if not records:
        raise ValueError("no records to average")
    base = records[0]
    for rec in records[1:]:
        if rec.counts.shape != base.counts.shape:
            raise ValueError("records must share a time grid to be averaged")
    mean = np.mean([rec.counts for rec in records], axis=0)
    meta = dict(base.meta)
    meta["rep"] = f"mean of {len(records)}"
    return SignalRecord(timestamps=base.timestamps.copy(), counts=mean, meta=meta)


def with_seed(cfg: SimConfig, seed: int) -> SimConfig:
    """Copy of the config with a different master seed."""
    return replace(cfg, seed=seed)
