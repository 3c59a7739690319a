"""Experiment harness: parameter sweeps, agreement metrics, figure CSVs.

Composes the simulator and the estimators into the verification
experiments: channel-model match, variance-vs-distance linearity for
several velocities / vessel radii / receiver widths, and the estimator
error comparison.  Everything is driven by a master seed and emits
plot-ready CSV plus a JSON run manifest; outputs are bit-identical for a
fixed (spec, seed) whatever the thread count.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__ as _pkg_version
from .analytic import gaussian_approximation
from .backend import DEFAULT_BACKEND, HAVE_COMPILED, resolve_threads
from .estimators import estimate_peak_time, estimate_valor, signal_moments
from .physics import ChannelParams, check_condition1, effective_diffusion
from .analytic import approximation_diagnostics
from .simulate import SimConfig, run_points
from . import dataio
from .rng import derive_seed

AXIS_FIELDS = ("l", "v_avg", "r_v", "w", "D")
METRICS = ("variance", "l_hat_valor", "l_hat_peak", "model_match")

#: desk scale trims molecule count and replications to hours of CPU;
#: full scale matches the reference experiments (documented, not CI)
SCALES = {
    "desk": {"M": 100_000, "reps_primary": 100, "reps_secondary": 20},
    "full": {"M": 1_000_000, "reps_primary": 1000, "reps_secondary": 1000},
}


class UndefinedRSquaredError(ValueError):
    """R^2 is undefined for constant observations."""


def r_squared(observed, predicted) -> float:
    """Coefficient of determination of ``predicted`` against ``observed``.

    1 - SS_res/SS_tot with SS_tot about the observed mean.  ``predicted``
    is a fixed model line (here the dispersion-theory variance), not a
    fitted regression, so values can be arbitrarily negative.
    """
    obs = np.asarray(observed, dtype=np.float64)
    pred = np.asarray(predicted, dtype=np.float64)
    if obs.shape != pred.shape or obs.ndim != 1:
        raise ValueError("observed and predicted must be 1-D arrays of equal length")
    if obs.size < 2:
        raise ValueError("need at least two points")
    ss_tot = float(np.sum((obs - obs.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedRSquaredError("observed values are constant")
    ss_res = float(np.sum((obs - pred) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition over ChannelParams fields.

    ``axes`` maps field names (subset of l, v_avg, r_v, w, D) to value
    lists; the grid is their cartesian product over ``base``.
    """

    base_channel: ChannelParams
    base_sim: SimConfig
    axes: dict
    n_reps: int
    metrics: tuple = ("variance",)

    def __post_init__(self):
        for key in self.axes:
            if key not in AXIS_FIELDS:
                raise ValueError(f"unknown axis {key!r}; expected one of {AXIS_FIELDS}")
            if not self.axes[key]:
                raise ValueError(f"axis {key!r} is empty")
        for m in self.metrics:
            if m not in METRICS:
                raise ValueError(f"unknown metric {m!r}; expected subset of {METRICS}")
        if self.n_reps < 1:
            raise ValueError("n_reps must be >= 1")
        for values in self.grid_points():
            replace(self.base_channel, **values)  # raises on invalid combos

    def grid_points(self) -> list[dict]:
        keys = list(self.axes)
        out = []
        for combo in itertools.product(*(self.axes[k] for k in keys)):
            out.append(dict(zip(keys, combo)))
        return out


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)
    r2: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def _theory_variance(ch: ChannelParams) -> float:
    return 2.0 * effective_diffusion(ch) * ch.l / ch.v_avg**3


def _group_key(ch: ChannelParams):
    # points sharing the medium can share particle paths
    return (ch.D, ch.r_v)


def run_sweep(
    spec: SweepSpec,
    *,
    master_seed: int | None = None,
    backend: str | None = None,
    n_threads: int | None = None,
) -> SweepResult:
    """Run the grid, apply the requested metrics, aggregate over replications.

    Grid points with the same medium share particle paths (common random
    numbers) but every point's record equals its standalone run; see the
    simulator docs.  Per-point failures are recorded and skipped.
    """
    if master_seed is None:
        master_seed = spec.base_sim.seed
    points = spec.grid_points()
    channels = [replace(spec.base_channel, **vals) for vals in points]

    groups: dict = {}
    for idx, ch in enumerate(channels):
        groups.setdefault(_group_key(ch), []).append(idx)

    result = SweepResult(
        meta={
            "master_seed": master_seed,
            "n_reps": spec.n_reps,
            "M": spec.base_sim.M,
            "backend": backend or DEFAULT_BACKEND,
            "metrics": list(spec.metrics),
        }
    )

    acc: dict[int, dict] = {
        idx: {m: [] for m in spec.metrics} for idx in range(len(channels))
    }
    mean_counts: dict[int, np.ndarray] = {}

    for g_index, (gkey, idxs) in enumerate(sorted(groups.items())):
        seed = derive_seed(master_seed, g_index)
        cfg = replace(spec.base_sim, seed=seed)
        g_channels = [channels[i] for i in idxs]
        for rep in range(spec.n_reps):
            try:
                records = run_points(
                    g_channels, cfg, rep, backend=backend, n_threads=n_threads
                )
            except Exception as exc:  # group-level failure hits all its points
                for i in idxs:
                    result.failures.append(
                        {"point": points[i], "rep": rep, "error": str(exc)}
                    )
                continue
            for i, rec in zip(idxs, records):
                ch = channels[i]
                try:
                    if "variance" in spec.metrics:
                        acc[i]["variance"].append(signal_moments(rec).variance)
                    if "l_hat_valor" in spec.metrics:
                        est = estimate_valor(
                            rec, ch.v_avg, effective_diffusion(ch), channel=ch
                        )
                        acc[i]["l_hat_valor"].append(est.l_hat)
                    if "l_hat_peak" in spec.metrics:
                        est = estimate_peak_time(
                            rec, cfg.tau_offset, ch.v_avg, channel=ch
                        )
                        acc[i]["l_hat_peak"].append(est.l_hat)
                    if "model_match" in spec.metrics:
                        if i not in mean_counts:
                            mean_counts[i] = np.zeros(rec.counts.size)
                        mean_counts[i] += rec.counts
                except Exception as exc:
                    result.failures.append(
                        {"point": points[i], "rep": rep, "error": str(exc)}
                    )

        for i in idxs:
            ch = channels[i]
            row = dict(points[i])
            row["seed"] = seed
            row["sigma2_theory"] = _theory_variance(ch)
            row["cond1_ratio"] = check_condition1(ch).ratio
            diags, _ = approximation_diagnostics(ch)
            row["alpha3"] = diags.alpha3
            row["alpha4"] = diags.alpha4
            for m in spec.metrics:
                if m == "model_match":
                    if i in mean_counts:
                        mean = mean_counts[i] / spec.n_reps
                        row["model_match_nrmse"] = model_nrmse(ch, cfg, mean)
                    continue
                vals = np.asarray(acc[i][m], dtype=np.float64)
                row[f"{m}_mean"] = float(vals.mean()) if vals.size else math.nan
                row[f"{m}_std"] = (
                    float(vals.std(ddof=1)) if vals.size > 1 else math.nan
                )
                row[f"{m}_n"] = int(vals.size)
                if m in ("l_hat_valor", "l_hat_peak") and vals.size:
                    row[f"err_pct_{m.removeprefix('l_hat_')}"] = float(
                        np.mean(np.abs(vals - ch.l) / ch.l) * 100.0
                    )
            result.rows.append(row)

    if "variance" in spec.metrics and "l" in spec.axes and len(spec.axes["l"]) >= 3:
        _attach_r2(result, spec)
    return result


def _attach_r2(result: SweepResult, spec: SweepSpec) -> None:
    """R^2 of measured variance against the theory line, per distance curve."""
    other_keys = [k for k in spec.axes if k != "l"]
    curves: dict = {}
    for row in result.rows:
        curve = tuple((k, row[k]) for k in other_keys)
        curves.setdefault(curve, []).append(row)
    for curve, rows in curves.items():
        rows = [r for r in rows if r.get("variance_n", 0) > 0]
        if len(rows) < 3:
            continue
        rows.sort(key=lambda r: r["l"])
        obs = [r["variance_mean"] for r in rows]
        pred = [r["sigma2_theory"] for r in rows]
        try:
            result.r2[curve] = r_squared(obs, pred)
        except (ValueError, UndefinedRSquaredError):
            continue
        for r in rows:
            r["R2"] = result.r2[curve]


def model_nrmse(ch: ChannelParams, cfg: SimConfig, mean_counts: np.ndarray) -> float:
    """RMSE between the per-molecule mean signal and the Gaussian pulse,
    over the full record, normalized by the pulse peak."""
    pulse = gaussian_approximation(ch)
    spacing = cfg.record_every * cfg.dt
    t = np.arange(mean_counts.size) * spacing
    theory = pulse(t)
    sim = mean_counts / cfg.M
    return float(np.sqrt(np.mean((sim - theory) ** 2)) / pulse.amplitude)


# ----------------------------------------------------------------------
# figure reproduction

_CAPILLARY = {"D": 300.0, "r_v": 5.0, "w": 1.0}
_DISTANCES = [500.0, 1000.0, 2000.0, 4000.0]
_VELOCITIES = [1000.0, 2000.0, 4000.0]
FIGURES = ("fig2", "fig3", "fig4a", "fig4b", "fig5")


def _base_channel(**over) -> ChannelParams:
    vals = dict(_CAPILLARY, v_avg=2000.0, l=1000.0)
    vals.update(over)
    return ChannelParams(**vals)


def reproduce_figure(
    which: str,
    scale: str = "desk",
    *,
    master_seed: int = 0,
    out_dir: str | Path = ".",
    backend: str | None = None,
    n_threads: int | None = None,
    M_override: int | None = None,
    reps_override: int | None = None,
    distances: list | None = None,
) -> dict:
    """Run one verification experiment and write its CSV outputs.

    Returns the manifest dictionary (also written as JSON).  Desk scale
    reduces the molecule count to 1e5 and replications to 100 (fig2,
    fig3) or 20 (fig4, fig5); full scale matches the reference setup of
    1e6 molecules and 1000 replications and is a long-running optional
    target.
    """
    if which not in FIGURES:
        raise ValueError(f"unknown figure {which!r}; expected one of {FIGURES}")
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}; expected 'desk' or 'full'")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sc = SCALES[scale]
    M = M_override or sc["M"]
    dists = distances or list(_DISTANCES)
    # each figure draws from its own substream of the master seed
    fig_seed = derive_seed(master_seed, 1000 + FIGURES.index(which))
    t0 = time.perf_counter()

    if which == "fig2":
        reps = reps_override or sc["reps_primary"]
        payload = _fig2(out_dir, M, reps, fig_seed, backend, n_threads)
    elif which == "fig3":
        reps = reps_override or sc["reps_primary"]
        payload = _variance_figure(
            out_dir, "fig3", "v_avg", _VELOCITIES, dists, M, reps,
            fig_seed, backend, n_threads,
        )
    elif which == "fig4a":
        reps = reps_override or sc["reps_secondary"]
        payload = _variance_figure(
            out_dir, "fig4a", "r_v", [2.0, 5.0, 10.0, 25.0], dists, M, reps,
            fig_seed, backend, n_threads,
        )
    elif which == "fig4b":
        reps = reps_override or sc["reps_secondary"]
        payload = _variance_figure(
            out_dir, "fig4b", "w", [0.5, 1.0, 10.0, 50.0], dists, M, reps,
            fig_seed, backend, n_threads,
        )
    else:
        reps = reps_override or sc["reps_secondary"]
        payload = _fig5(out_dir, M, reps, dists, fig_seed, backend, n_threads)

    manifest = {
        "figure": which,
        "scale": scale,
        "master_seed": master_seed,
        "M": M,
        "n_reps": reps,
        "backend": backend or DEFAULT_BACKEND,
        "compiled_available": HAVE_COMPILED,
        "n_threads": resolve_threads(n_threads),
        "version": _pkg_version,
        "wall_time_s": round(time.perf_counter() - t0, 3),
        **payload,
    }
    dataio.write_manifest(out_dir / f"{which}_manifest.json", manifest)
    return manifest


def _sim_config(M: int) -> SimConfig:
    return SimConfig(M=M, dt=1e-4, record_every=1)


def _fig2(out_dir, M, reps, master_seed, backend, n_threads):
    """Mean received signal vs the Gaussian pulse, one panel per velocity."""
    channels = [_base_channel(v_avg=v) for v in _VELOCITIES]
    cfg = replace(_sim_config(M), seed=derive_seed(master_seed, 0))
    sums = [None] * len(channels)
    for rep in range(reps):
        records = run_points(channels, cfg, rep, backend=backend, n_threads=n_threads)
        for j, rec in enumerate(records):
            if sums[j] is None:
                sums[j] = np.zeros(rec.counts.size)
            sums[j] += rec.counts
    outputs = []
    summary_rows = []
    for j, ch in enumerate(channels):
        mean = sums[j] / reps
        pulse = gaussian_approximation(ch)
        t = np.arange(mean.size) * cfg.dt
        theory = pulse(t)
        path = out_dir / f"fig2_v{int(ch.v_avg)}.csv"
        dataio.write_table_csv(
            path,
            ["t", "sim_mean", "theory_gauss"],
            zip(t, mean / M, theory),
        )
        outputs.append(str(path))
        nrmse = float(np.sqrt(np.mean((mean / M - theory) ** 2)) / pulse.amplitude)
        summary_rows.append(
            (ch.v_avg, ch.l, pulse.amplitude, pulse.mean, pulse.variance, nrmse)
        )
    spath = out_dir / "fig2_summary.csv"
    dataio.write_table_csv(
        spath,
        ["v_avg", "l", "peak_theory", "t_peak", "sigma2_theory", "nrmse"],
        summary_rows,
    )
    outputs.append(str(spath))
    return {"outputs": outputs, "velocities": _VELOCITIES, "l": 1000.0}


def _variance_figure(
    out_dir, name, axis, axis_values, dists, M, reps, master_seed, backend, n_threads
):
    """Temporal variance vs distance for a family of curves."""
    spec = SweepSpec(
        base_channel=_base_channel(),
        base_sim=_sim_config(M),
        axes={axis: axis_values, "l": dists},
        n_reps=reps,
        metrics=("variance",),
    )
    res = run_sweep(
        spec, master_seed=master_seed, backend=backend, n_threads=n_threads
    )
    rows = []
    for row in sorted(res.rows, key=lambda r: (r[axis], r["l"])):
        rows.append(
            (
                row[axis],
                row["l"],
                row["variance_mean"],
                row["variance_std"],
                row["sigma2_theory"],
                row.get("R2", math.nan),
            )
        )
    path = out_dir / f"{name}.csv"
    dataio.write_table_csv(
        path,
        [axis, "l", "sigma2_sim_mean", "sigma2_sim_std", "sigma2_theory", "R2"],
        rows,
    )
    r2 = {str(dict(k)): v for k, v in res.r2.items()}
    diagnostics = [
        {
            axis: row[axis],
            "l": row["l"],
            "cond1_ratio": row["cond1_ratio"],
            "alpha3": row["alpha3"],
            "alpha4": row["alpha4"],
        }
        for row in sorted(res.rows, key=lambda r: (r[axis], r["l"]))
    ]
    return {
        "outputs": [str(path)],
        "axis": axis,
        "axis_values": axis_values,
        "distances": dists,
        "r2": r2,
        "point_diagnostics": diagnostics,
        "n_failures": len(res.failures),
    }


def _fig5(out_dir, M, reps, dists, master_seed, backend, n_threads):
    """Percentage error of both estimators vs distance and velocity."""
    spec = SweepSpec(
        base_channel=_base_channel(),
        base_sim=_sim_config(M),
        axes={"v_avg": _VELOCITIES, "l": dists},
        n_reps=reps,
        metrics=("l_hat_valor", "l_hat_peak"),
    )
    res = run_sweep(
        spec, master_seed=master_seed, backend=backend, n_threads=n_threads
    )
    rows = []
    for row in sorted(res.rows, key=lambda r: (r["v_avg"], r["l"])):
        rows.append(
            (
                row["v_avg"],
                row["l"],
                row.get("err_pct_valor", math.nan),
                row.get("err_pct_peak", math.nan),
                row.get("l_hat_valor_mean", math.nan),
                row.get("l_hat_peak_mean", math.nan),
                row["cond1_ratio"],
                row["alpha3"],
                row["alpha4"],
            )
        )
    path = out_dir / "fig5.csv"
    dataio.write_table_csv(
        path,
        [
            "v_avg",
            "l",
            "err_pct_valor",
            "err_pct_peak",
            "l_hat_valor_mean",
            "l_hat_peak_mean",
            "cond1_ratio",
            "alpha3",
            "alpha4",
        ],
        rows,
    )
    return {
        "outputs": [str(path)],
        "velocities": _VELOCITIES,
        "distances": dists,
        "n_failures": len(res.failures),
    }
