"""CSV / JSON serialization with an explicit units header on every file.

Float fields are rendered with ``repr`` (shortest round-trip form), so a
file's bytes depend only on the numbers in it -- the determinism checks
compare outputs byte-for-byte.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .physics import ChannelParams
from .simulate import SignalRecord, SimConfig

UNITS_HEADER = "# units: um, s"

ESTIMATE_COLUMNS = [
    "method",
    "l_true",
    "l_hat",
    "err_pct",
    "sigma2_hat",
    "t_peak_hat",
    "cond1_ratio",
    "alpha3",
    "alpha4",
    "seed",
    "rep",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return repr(v)


def write_signal_csv(record: SignalRecord, path) -> Path:
    """Write one replication as `t,count` rows plus a JSON metadata sidecar."""
    path = Path(path)
    meta = record.meta or {}
    seed = meta.get("sim", {}).get("seed", 0)
    rep = meta.get("rep", 0)
    lines = [UNITS_HEADER, f"# seed={seed} rep={rep}", "t,count"]
    for t, c in zip(record.timestamps, record.counts):
        lines.append(f"{_fmt(t)},{int(c)}")
    path.write_text("\n".join(lines) + "\n")
    sidecar = path.with_suffix(".meta.json")
    sidecar.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return path


def read_signal_csv(path) -> SignalRecord:
    """Read a signal CSV (and its sidecar, when present) back into a record."""
    path = Path(path)
    timestamps = []
    counts = []
    meta = {}
    for line in path.read_text().splitlines():
        if not line or line.startswith("#") or line.startswith("t,"):
            continue
        t_str, c_str = line.split(",")
        timestamps.append(float(t_str))
        counts.append(int(c_str))
    sidecar = path.with_suffix(".meta.json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
    return SignalRecord(
        timestamps=np.asarray(timestamps),
        counts=np.asarray(counts, dtype=np.uint32),
        meta=meta,
    )


def channel_from_meta(meta: dict) -> ChannelParams:
    ch = meta["channel"]
    return ChannelParams(
        D=ch["D"], r_v=ch["r_v"], v_avg=ch["v_avg"], l=ch["l"], w=ch["w"]
    )


def sim_config_from_meta(meta: dict) -> SimConfig:
    s = meta["sim"]
    return SimConfig(
        M=s["M"],
        dt=s["dt"],
        T_sim=s.get("T_sim"),
        record_every=s.get("record_every", 1),
        seed=s.get("seed", 0),
        tx_release=s.get("tx_release", "uniform"),
        tx_radial_offset=s.get("tx_radial_offset", 0.0),
        tau_offset=s.get("tau_offset", 0.0),
    )


def write_table_csv(path, header, rows) -> Path:
    """Generic CSV with the units header; floats via repr, ints verbatim."""
    path = Path(path)
    lines = [UNITS_HEADER, ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def estimate_row(result, l_true, seed, rep) -> tuple:
    """Flatten an EstimateResult into the standard estimates-CSV row."""
    diags = result.diagnostics
    err_pct = abs(result.l_hat - l_true) / l_true * 100.0 if l_true else None
    return (
        result.method,
        l_true,
        result.l_hat,
        err_pct,
        result.sigma2_hat,
        result.t_peak_hat,
        result.cond1_ratio,
        diags.alpha3 if diags else None,
        diags.alpha4 if diags else None,
        seed,
        rep,
    )


def write_estimates_csv(rows, path) -> Path:
    return write_table_csv(path, ESTIMATE_COLUMNS, rows)


def write_manifest(path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, default=str) + "\n")
    return path
