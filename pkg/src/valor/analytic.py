"""Closed-form arrival model and its Gaussian-in-time approximation.

The dispersion reduction turns the pipe into a 1-D channel with drift
v_avg and effective diffusion D_e.  The axial marginal density is then
Gaussian in *space* at fixed time; observed at a fixed receiver it is a
skewed pulse in *time*, locally Gaussian around its peak.  This module
provides both the exact time course and the Gaussian approximation, plus
diagnostics quantifying how trustworthy the approximation is.

All functions are pure and accept scalar or array time arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .physics import (
    ChannelParams,
    DomainError,
    effective_diffusion,
    peclet,
    t_peak,
)

# exp() underflows double precision near -745; below this floor the tail
# evaluates to an exact 0.0 instead of a denormal or an FP warning.
_EXP_FLOOR = -700.0


def _exp_floored(arg):
    """exp(arg) with arguments below the floor mapped to exactly 0."""
    arg = np.asarray(arg, dtype=np.float64)
    return np.where(arg > _EXP_FLOOR, np.exp(np.maximum(arg, _EXP_FLOOR)), 0.0)


@dataclass(frozen=True)
class GaussianPulse:
    """Gaussian-in-time approximation of the received pulse."""

    amplitude: float  # peak single-molecule detection probability
    mean: float  # s
    variance: float  # s^2

    def __call__(self, t):
        """Evaluate the pulse at time(s) ``t``."""
        t = np.asarray(t, dtype=np.float64)
        arg = -((t - self.mean) ** 2) / (2.0 * self.variance)
        out = self.amplitude * _exp_floored(arg)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class ApproxDiagnostics:
    """Size of the cubic/quartic terms dropped by the Gaussian approximation.

    alpha3 and alpha4 compare the third and fourth derivative of the
    log-pulse at the peak against the quadratic term, evaluated one
    standard deviation out.  Both must be << 1 for the approximation to
    hold; this collapses to the single ratio D_e/(l*v_avg) << 1.
    """

    alpha3: float
    alpha4: float
    condition2_ratio: float


def p_axial(l_q, t, params: ChannelParams):
    """Axial position density (1/um) of a molecule at time ``t``.

    Gaussian in space with mean v_avg*t and variance 2*D_e*t.  Times
    t <= 0 return 0: release happens at t = 0 and the density is not
    defined before it.
    """
    D_e = effective_diffusion(params)
    t = np.asarray(t, dtype=np.float64)
    l_q = np.asarray(l_q, dtype=np.float64)
    tt = np.where(t > 0.0, t, 1.0)  # placeholder to keep arithmetic finite
    dev = l_q - params.v_avg * tt
    arg = -(dev * dev) / (4.0 * D_e * tt)
    dens = _exp_floored(arg) / np.sqrt(4.0 * math.pi * D_e * tt)
    out = np.where(t > 0.0, dens, 0.0)
    return out if out.ndim else float(out)


def _normal_cdf(x):
    return 0.5 * (1.0 + _erf(x / math.sqrt(2.0)))


_erf = np.vectorize(math.erf, otypes=[np.float64])


def detection_probability(t, params: ChannelParams, mode: str = "small_w"):
    """Probability that one molecule sits inside the receiver span at ``t``.

    ``small_w`` (default) uses the narrow-receiver approximation
    w * p_axial(l, t); ``exact`` integrates the axial density over
    [l, l+w] via the Gaussian CDF.
    """
    if mode == "small_w":
        return params.w * p_axial(params.l, t, params)
    if mode != "exact":
        raise ValueError(f"mode must be 'exact' or 'small_w', got {mode!r}")
    D_e = effective_diffusion(params)
    t = np.asarray(t, dtype=np.float64)
    tt = np.where(t > 0.0, t, 1.0)
    sd = np.sqrt(2.0 * D_e * tt)
    mu = params.v_avg * tt
    prob = _normal_cdf((params.l + params.w - mu) / sd) - _normal_cdf(
        (params.l - mu) / sd
    )
    out = np.where(t > 0.0, prob, 0.0)
    return out if out.ndim else float(out)


def gaussian_approximation(params: ChannelParams) -> GaussianPulse:
    """Second-order expansion of the received pulse around its peak.

    The log of the time course is expanded to quadratic order at
    t = l/v_avg, giving a Gaussian with variance 2*D_e*l/v_avg^3 and peak
    amplitude w*sqrt(v_avg/(4*pi*D_e*l)).
    """
    params._require_flow("gaussian_approximation")
    D_e = effective_diffusion(params)
    v = params.v_avg
    mean = t_peak(params)
    variance = 2.0 * D_e * params.l / (v * v * v)
    amplitude = params.w * math.sqrt(v / (4.0 * math.pi * D_e * params.l))
    return GaussianPulse(amplitude=amplitude, mean=mean, variance=variance)


def approximation_diagnostics(
    params: ChannelParams, margin: float = 0.1
) -> tuple[ApproxDiagnostics, bool]:
    """Correction factors for the Gaussian approximation, with a verdict.

    Passes iff max(alpha3, alpha4) <= 1 and D_e/(l*v_avg) <= margin.
    """
    if not margin > 0:
        raise DomainError(f"margin must be > 0, got {margin}")
    params._require_flow("approximation_diagnostics")
    ratio = effective_diffusion(params) / (params.l * params.v_avg)
    diags = diagnostics_from_ratio(ratio)
    passed = max(diags.alpha3, diags.alpha4) <= 1.0 and ratio <= margin
    return diags, passed


def diagnostics_from_ratio(ratio: float) -> ApproxDiagnostics:
    """Correction factors from the dimensionless ratio D_e/(l*v_avg)."""
    return ApproxDiagnostics(
        alpha3=3.0 * math.sqrt(2.0) * math.sqrt(ratio),
        alpha4=24.0 * ratio,
        condition2_ratio=ratio,
    )


def exact_peak_time(params: ChannelParams) -> float:
    """Exact argmax in time of the narrow-receiver pulse.

    Slightly earlier than l/v_avg because the 1/sqrt(t) prefactor tilts
    the pulse; the offset is D_e/v_avg^2 to leading order.
    """
    params._require_flow("exact_peak_time")
    D_e = effective_diffusion(params)
    v = params.v_avg
    return (-D_e + math.sqrt(D_e * D_e + v * v * params.l * params.l)) / (v * v)


def exact_arrival_moments(params: ChannelParams) -> tuple[float, float]:
    """Mean and variance of the exact narrow-receiver time course.

    Treating w*p_axial(l, t) normalized over t in (0, inf) as the arrival
    time distribution, the moments are available in closed form:

        mean = (l/v) * (1 + 1/xi)
        var  = (l/v)^2 * (1/xi) * (1 + 2/xi),   xi = l*v/(2*D_e)

    which reduce to l/v and 2*D_e*l/v^3 * (1 + 4*D_e/(l*v)).  Used as an
    independent oracle for the variance estimator's expected bias.
    """
    params._require_flow("exact_arrival_moments")
    D_e = effective_diffusion(params)
    v = params.v_avg
    inv_xi = 2.0 * D_e / (params.l * v)
    mean = (params.l / v) * (1.0 + inv_xi)
    var = (params.l / v) ** 2 * inv_xi * (1.0 + 2.0 * inv_xi)
    return mean, var


def auto_duration(params: ChannelParams, n_sigma: float = 12.0) -> float:
    """Simulation horizon capturing the pulse and its tails.

    t_peak plus ``n_sigma`` predicted standard deviations; at the default
    12 sigma the truncated Gaussian mass is below 1e-30, so variance
    estimates are not tail-clipped.
    """
    pulse = gaussian_approximation(params)
    return pulse.mean + n_sigma * math.sqrt(pulse.variance)


__all__ = [
    "ApproxDiagnostics",
    "GaussianPulse",
    "approximation_diagnostics",
    "auto_duration",
    "detection_probability",
    "diagnostics_from_ratio",
    "exact_arrival_moments",
    "exact_peak_time",
    "gaussian_approximation",
    "p_axial",
    "peclet",
]
