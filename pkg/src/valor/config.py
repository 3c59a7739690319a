"""Config files: JSON with explicit unit suffixes on physical values.

Every physical quantity is written as a string "value unit" and the unit
must match what the field expects ("300 um^2/s", "0.0001 s").  Parsing
rejects bare numbers for physical fields -- the suffix requirement is
what protects scenarios from silent scale mistakes.  Counts (M, seeds,
replication numbers) are plain integers.
"""

from __future__ import annotations

import json
from pathlib import Path

from .harness import SweepSpec
from .physics import ChannelParams
from .simulate import SimConfig


class ConfigError(ValueError):
    pass


_UNIT_ALIASES = {
    "um": "um",
    "µm": "um",  # µm
    "um^2/s": "um^2/s",
    "µm^2/s": "um^2/s",
    "um/s": "um/s",
    "µm/s": "um/s",
    "s": "s",
}

CHANNEL_UNITS = {
    "D": "um^2/s",
    "r_v": "um",
    "v_avg": "um/s",
    "l": "um",
    "w": "um",
}

SIM_UNITS = {
    "dt": "s",
    "T_sim": "s",
    "tx_radial_offset": "um",
    "tau_offset": "s",
}


def parse_quantity(raw, expected_unit: str, field: str) -> float:
    """Parse "value unit", validating the suffix against the field's unit."""
    if not isinstance(raw, str):
        raise ConfigError(
            f"{field}: physical values need a unit suffix, e.g. \"300 {expected_unit}\""
        )
    parts = raw.split()
    if len(parts) != 2:
        raise ConfigError(f"{field}: expected \"value unit\", got {raw!r}")
    value_str, unit = parts
    canon = _UNIT_ALIASES.get(unit)
    if canon != expected_unit:
        raise ConfigError(
            f"{field}: expected unit {expected_unit!r}, got {unit!r} in {raw!r}"
        )
    try:
        return float(value_str)
    except ValueError as exc:
        raise ConfigError(f"{field}: bad numeric value in {raw!r}") from exc


def channel_from_dict(data: dict) -> ChannelParams:
    missing = set(CHANNEL_UNITS) - set(data)
    if missing:
        raise ConfigError(f"channel config missing fields: {sorted(missing)}")
    vals = {
        name: parse_quantity(data[name], unit, name)
        for name, unit in CHANNEL_UNITS.items()
    }
    return ChannelParams(**vals)


def sim_from_dict(data: dict) -> SimConfig:
    if "M" not in data or "dt" not in data:
        raise ConfigError("sim config needs at least M and dt")
    kwargs = {
        "M": int(data["M"]),
        "dt": parse_quantity(data["dt"], "s", "dt"),
    }
    t_sim = data.get("T_sim", "auto")
    if t_sim not in (None, "auto"):
        kwargs["T_sim"] = parse_quantity(t_sim, "s", "T_sim")
    if "record_every" in data:
        kwargs["record_every"] = int(data["record_every"])
    if "seed" in data:
        kwargs["seed"] = int(data["seed"])
    if "tx_release" in data:
        kwargs["tx_release"] = str(data["tx_release"])
    if "tx_radial_offset" in data:
        kwargs["tx_radial_offset"] = parse_quantity(
            data["tx_radial_offset"], "um", "tx_radial_offset"
        )
    if "tau_offset" in data:
        kwargs["tau_offset"] = parse_quantity(data["tau_offset"], "s", "tau_offset")
    return SimConfig(**kwargs)


def load_scenario(path) -> tuple[ChannelParams, SimConfig]:
    """Load a {"channel": ..., "sim": ...} scenario file."""
    data = json.loads(Path(path).read_text())
    if "channel" not in data or "sim" not in data:
        raise ConfigError("scenario file needs 'channel' and 'sim' sections")
    return channel_from_dict(data["channel"]), sim_from_dict(data["sim"])


def sweep_from_dict(data: dict) -> SweepSpec:
    base = data.get("base")
    if not base:
        raise ConfigError("sweep config needs a 'base' scenario")
    channel = channel_from_dict(base["channel"])
    sim = sim_from_dict(base["sim"])
    axes_raw = data.get("axes", {})
    axes = {}
    for key, values in axes_raw.items():
        unit = CHANNEL_UNITS.get(key)
        if unit is None:
            raise ConfigError(f"unknown sweep axis {key!r}")
        axes[key] = [parse_quantity(v, unit, f"axes.{key}") for v in values]
    metrics = tuple(data.get("metrics", ["variance"]))
    return SweepSpec(
        base_channel=channel,
        base_sim=sim,
        axes=axes,
        n_reps=int(data.get("n_reps", 1)),
        metrics=metrics,
    )


def load_sweep(path) -> SweepSpec:
    return sweep_from_dict(json.loads(Path(path).read_text()))
