"""Distance estimators operating on observed receiver signals.

The variance-based estimator inverts the linear relation between the
received pulse's temporal variance and the emitter distance,
l = sigma^2 * v_avg^3 / (2 * D_e).  Central moments are blind to any
uniform time shift, so it needs no knowledge of the emission instant.
The peak-time baseline maps the smoothed signal maximum to distance via
l = v_avg * t_peak and therefore *does* require the emission time; it is
kept as the comparison method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytic import ApproxDiagnostics, diagnostics_from_ratio
from .physics import ChannelParams
from .simulate import SignalRecord


class NoSignalError(ValueError):
    """The record contains no counts at all."""


class DegenerateSignalError(ValueError):
    """The record cannot support the requested estimate."""


@dataclass(frozen=True)
class SignalMoments:
    """Weighted temporal moments of a count series.

    ``mass`` is the time-integral of the counts (molecule*s); mean and
    variance treat the normalized counts as a probability mass over the
    sample times.  The variance is invariant under any uniform timestamp
    shift.
    """

    mass: float
    mean_time: float
    variance: float


@dataclass(frozen=True)
class EstimateResult:
    """A distance estimate plus the diagnostics needed to judge it."""

    l_hat: float
    method: str
    sigma2_hat: float | None = None
    t_peak_hat: float | None = None
    diagnostics: ApproxDiagnostics | None = None
    cond1_ratio: float | None = None
    truncated: bool = False


def _signal_arrays(signal) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(signal, SignalRecord):
        return signal.timestamps, np.asarray(signal.counts, dtype=np.float64)
    t, c = signal
    return np.asarray(t, dtype=np.float64), np.asarray(c, dtype=np.float64)


def _clip_tails(t: np.ndarray, c: np.ndarray, frac: float):
    """Drop leading/trailing samples below ``frac`` of the peak (biased)."""
    thresh = frac * c.max()
    above = np.flatnonzero(c >= thresh)
    return t[above[0] : above[-1] + 1], c[above[0] : above[-1] + 1]


def signal_moments(signal, *, tail_clip: float | None = None) -> SignalMoments:
    """Mass, mean arrival time and temporal variance of a signal.

    Works on a :class:`SignalRecord` or a ``(timestamps, counts)`` pair
    (counts may be real-valued, e.g. ensemble means).  Times are centered
    on the first sample before accumulating, which keeps the variance
    shift-invariant to ~1e-13 relative even for offsets of hours.

    ``tail_clip`` optionally drops leading/trailing samples below that
    fraction of the peak; useful for short records but biases the
    variance low (documented, off by default).
    """
    t, c = _signal_arrays(signal)
    if t.size == 0 or not np.any(c > 0):
        raise NoSignalError("signal has no nonzero counts")
    if np.any(c < 0):
        raise ValueError("counts must be non-negative")
    if tail_clip is not None:
        if not 0 < tail_clip < 1:
            raise ValueError("tail_clip must be a fraction in (0, 1)")
        t, c = _clip_tails(t, c, tail_clip)

    spacing = float(t[1] - t[0]) if t.size > 1 else 0.0
    wsum = float(np.sum(c))
    u = t - t[0]
    mean_u = float(np.sum(u * c)) / wsum
    du = u - mean_u
    variance = float(np.sum(du * du * c)) / wsum
    return SignalMoments(
        mass=wsum * spacing,
        mean_time=float(t[0]) + mean_u,
        variance=variance,
    )


def estimate_valor(
    signal,
    v_avg: float,
    D_e: float,
    *,
    channel: ChannelParams | None = None,
    tail_clip: float | None = None,
) -> EstimateResult:
    """Distance from the temporal variance of the received signal.

    Needs only the flow speed and the effective diffusion coefficient;
    the emission time never enters.  When the full channel geometry is
    known, the flow-model validity ratio is reported alongside the
    approximation diagnostics (both evaluated at the estimated distance).
    """
    if not v_avg > 0:
        raise ValueError(f"v_avg must be > 0, got {v_avg}")
    if not D_e > 0:
        raise ValueError(f"D_e must be > 0, got {D_e}")
    moments = signal_moments(signal, tail_clip=tail_clip)
    if moments.variance <= 0:
        raise DegenerateSignalError(
            "temporal variance is not positive; the record is a single spike"
        )
    l_hat = moments.variance * v_avg**3 / (2.0 * D_e)
    diags = diagnostics_from_ratio(D_e / (l_hat * v_avg))
    cond1 = None
    if channel is not None:
        pe = channel.v_avg * channel.r_v / channel.D
        cond1 = pe / (4.0 * l_hat / channel.r_v)
    return EstimateResult(
        l_hat=l_hat,
        method="valor",
        sigma2_hat=moments.variance,
        diagnostics=diags,
        cond1_ratio=cond1,
    )


def estimate_ensemble(
    records,
    v_avg: float,
    D_e: float,
    *,
    mode: str = "per_rep",
    channel: ChannelParams | None = None,
):
    """Variance-based estimates over replications.

    ``per_rep`` (default) estimates each replication separately and
    returns the list -- matching how sweep results are averaged.
    ``mean_signal`` first averages the count series and returns the
    single estimate from the pooled signal.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to estimate from")
    if mode == "per_rep":
        return [
            estimate_valor(rec, v_avg, D_e, channel=channel) for rec in records
        ]
    if mode == "mean_signal":
        base = records[0]
        mean = np.mean([np.asarray(r.counts, dtype=np.float64) for r in records], axis=0)
        return estimate_valor(
            (base.timestamps, mean), v_avg, D_e, channel=channel
        )
    raise ValueError(f"mode must be 'per_rep' or 'mean_signal', got {mode!r}")


def smooth_counts(counts: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with edge windows shrunk to what exists."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"smoothing window must be odd and >= 1, got {window}")
    if window == 1:
        return np.asarray(counts, dtype=np.float64)
    c = np.asarray(counts, dtype=np.float64)
    kernel = np.ones(window)
    sums = np.convolve(c, kernel, mode="same")
    norm = np.convolve(np.ones_like(c), kernel, mode="same")
    return sums / norm


def estimate_peak_time(
    signal,
    emission_time: float,
    v_avg: float,
    smoothing_window: int = 51,
    *,
    channel: ChannelParams | None = None,
) -> EstimateResult:
    """Baseline: distance from the smoothed signal peak.

    Assumes the emission time is known -- that is the extra assumption
    this method carries.  The argmax of a moving-average-smoothed count
    series gives the peak arrival time; distance is v_avg times the
    flight time.  A peak on the record boundary sets ``truncated``.
    """
    if not v_avg > 0:
        raise ValueError(f"v_avg must be > 0, got {v_avg}")
    t, c = _signal_arrays(signal)
    if t.size == 0 or not np.any(c > 0):
        raise NoSignalError("signal has no nonzero counts")
    smoothed = smooth_counts(c, smoothing_window)
    idx = int(np.argmax(smoothed))
    truncated = idx == 0 or idx == t.size - 1
    t_hat = float(t[idx]) - emission_time
    if t_hat <= 0:
        raise DegenerateSignalError(
            f"peak at t={t[idx]} does not follow emission_time={emission_time}"
        )
    l_hat = v_avg * t_hat
    diags = None
    cond1 = None
    if channel is not None:
        pe = channel.v_avg * channel.r_v / channel.D
        d_e = channel.D * (1.0 + pe * pe / 48.0)
        diags = diagnostics_from_ratio(d_e / (l_hat * v_avg))
        cond1 = pe / (4.0 * l_hat / channel.r_v)
    return EstimateResult(
        l_hat=l_hat,
        method="peak_time",
        t_peak_hat=t_hat,
        diagnostics=diags,
        cond1_ratio=cond1,
        truncated=truncated,
    )
