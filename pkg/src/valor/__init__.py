"""Diffusion-advection channel simulation and transmitter ranging in vessels.

Monte Carlo ground truth, the dispersion-based analytic channel model,
variance-based and peak-time distance estimators, and an experiment
harness that writes plot-ready CSV.
"""

__version__ = "0.1.0"

from .physics import (  # noqa: F401
    ChannelParams,
    ConditionCheck,
    DerivedChannel,
    DomainError,
    check_condition1,
    derive_channel,
    effective_diffusion,
    peclet,
    poiseuille_velocity,
)
from .analytic import (  # noqa: F401
    ApproxDiagnostics,
    GaussianPulse,
    approximation_diagnostics,
    detection_probability,
    gaussian_approximation,
    p_axial,
)
from .simulate import (  # noqa: F401
    Particle,
    SignalRecord,
    SimConfig,
    mean_signal,
    reflect,
    run_ensemble,
    run_points,
    run_replication,
    step,
)
from .estimators import (  # noqa: F401
    DegenerateSignalError,
    EstimateResult,
    NoSignalError,
    SignalMoments,
    estimate_peak_time,
    estimate_valor,
    signal_moments,
)
from .backend import DEFAULT_BACKEND, HAVE_COMPILED  # noqa: F401
