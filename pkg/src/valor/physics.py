"""Physical scenario parameters and closed-form flow/transport quantities.

Unit convention, fixed repo-wide: micrometres and seconds.  Every file
format written by this package carries an explicit units header so a
scenario can never silently change scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class DomainError(ValueError):
    """An argument lies outside the physically meaningful domain."""


@dataclass(frozen=True)
class ChannelParams:
    """Cylindrical vessel scenario.

    Attributes
    ----------
    D : float
        Molecular diffusion coefficient, um^2/s.
    r_v : float
        Vessel radius, um.
    v_avg : float
        Cross-sectional average flow velocity, um/s.  Zero is allowed
        (pure diffusion) but all flow-derived quantities then raise.
    l : float
        Axial emitter-to-receiver distance (receiver leading edge), um.
    w : float
        Receiver axial width, um.
    """

    D: float
    r_v: float
    v_avg: float
    l: float
    w: float

    def __post_init__(self):
        if not (self.D > 0):
            raise DomainError(f"D must be > 0, got {self.D}")
        if not (self.r_v > 0):
            raise DomainError(f"r_v must be > 0, got {self.r_v}")
        if not (self.v_avg >= 0):
            raise DomainError(f"v_avg must be >= 0, got {self.v_avg}")
        if not (self.l > 0):
            raise DomainError(f"l must be > 0, got {self.l}")
        if not (self.w > 0):
            raise DomainError(f"w must be > 0, got {self.w}")
        if self.w > self.l:
            raise DomainError(
                f"receiver width w={self.w} exceeds distance l={self.l}; "
                "the receiver would overlap the emitter"
            )

    def _require_flow(self, what: str) -> None:
        if self.v_avg <= 0:
            raise DomainError(f"{what} requires v_avg > 0")


@dataclass(frozen=True)
class DerivedChannel:
    """Quantities derived from a :class:`ChannelParams`."""

    Pe: float
    D_e: float
    t_peak: float
    sigma2_pred: float


@dataclass(frozen=True)
class ConditionCheck:
    """Outcome of a model-validity diagnostic.

    ``ratio`` is the dimensionless quantity that must be small;
    ``passed`` is ``ratio <= margin``.
    """

    ratio: float
    margin: float
    passed: bool


def poiseuille_velocity(r: float, params: ChannelParams) -> float:
    """Axial flow velocity at radial distance ``r`` from the vessel axis.

    Parabolic laminar profile: 2*v_avg on the axis, zero at the wall
    (no slip).  Its cross-sectional average is v_avg.
    """
    if r < 0 or r > params.r_v:
        raise DomainError(f"radial position {r} outside [0, {params.r_v}]")
    return 2.0 * params.v_avg * (1.0 - (r * r) / (params.r_v * params.r_v))


def peclet(params: ChannelParams) -> float:
    """Peclet number v_avg*r_v/D: advective over diffusive transport rate."""
    return params.v_avg * params.r_v / params.D


def effective_diffusion(params: ChannelParams) -> float:
    """Axial dispersion coefficient D*(1 + Pe^2/48).

    Shear across the parabolic profile stretches the solute plug, which
    acts like extra axial diffusion; this is what collapses the 3-D pipe
    transport problem to 1-D.
    """
    pe = peclet(params)
    return params.D * (1.0 + pe * pe / 48.0)


def t_peak(params: ChannelParams) -> float:
    """Arrival time of the expected signal peak, l/v_avg."""
    params._require_flow("t_peak")
    return params.l / params.v_avg


def predicted_variance(params: ChannelParams) -> float:
    """Predicted temporal variance of the received pulse, 2*D_e*l/v_avg^3."""
    params._require_flow("predicted_variance")
    v = params.v_avg
    return 2.0 * effective_diffusion(params) * params.l / (v * v * v)


def derive_channel(params: ChannelParams) -> DerivedChannel:
    """Bundle Pe, D_e, t_peak and the predicted variance for a scenario."""
    return DerivedChannel(
        Pe=peclet(params),
        D_e=effective_diffusion(params),
        t_peak=t_peak(params),
        sigma2_pred=predicted_variance(params),
    )


def check_condition1(params: ChannelParams, margin: float = 0.1) -> ConditionCheck:
    """Dispersion-model validity diagnostic: Pe must be << 4*l/r_v.

    Operationalized as ratio Pe/(4*l/r_v) <= margin.  The default margin
    0.1 is a diagnostic convention, not a hard physical gate.
    """
    if not margin > 0:
        raise DomainError(f"margin must be > 0, got {margin}")
    ratio = peclet(params) / (4.0 * params.l / params.r_v)
    return ConditionCheck(ratio=ratio, margin=margin, passed=ratio <= margin)


def velocity_extremes(params: ChannelParams) -> tuple[float, float]:
    """(v_min, v_max) of the profile: 0 at the wall, 2*v_avg on the axis."""
    return 0.0, 2.0 * params.v_avg


def diffusion_step_scale(D: float, dt: float) -> float:
    """Standard deviation sqrt(2*D*dt) of one diffusive displacement."""
    if dt <= 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    return math.sqrt(2.0 * D * dt)
