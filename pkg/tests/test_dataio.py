import json

import numpy as np
import pytest

from valor import ChannelParams, SimConfig, run_replication
from valor import dataio
from valor.estimators import estimate_valor
from valor.physics import effective_diffusion


@pytest.fixture
def record(capillary):
    cfg = SimConfig(M=300, dt=1e-4, seed=12, T_sim=0.6, tau_offset=2.5)
    return run_replication(capillary, cfg, replication_id=3)


class TestSignalCsv:
    def test_header_contract(self, record, tmp_path):
        path = dataio.write_signal_csv(record, tmp_path / "sig.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "# units: um, s"
        assert lines[1] == "# seed=12 rep=3"
        assert lines[2] == "t,count"

    def test_round_trip(self, record, tmp_path):
        path = dataio.write_signal_csv(record, tmp_path / "sig.csv")
        back = dataio.read_signal_csv(path)
        assert np.array_equal(back.counts, record.counts)
        assert np.array_equal(back.timestamps, record.timestamps)
        assert back.meta["rep"] == 3
        assert back.meta["channel"]["l"] == 1000.0

    def test_sidecar_json(self, record, tmp_path):
        dataio.write_signal_csv(record, tmp_path / "sig.csv")
        meta = json.loads((tmp_path / "sig.meta.json").read_text())
        assert meta["sim"]["tau_offset"] == 2.5
        assert meta["units"] == {"length": "um", "time": "s"}

    def test_meta_reconstruction(self, record, tmp_path):
        path = dataio.write_signal_csv(record, tmp_path / "sig.csv")
        back = dataio.read_signal_csv(path)
        ch = dataio.channel_from_meta(back.meta)
        cfg = dataio.sim_config_from_meta(back.meta)
        assert ch == ChannelParams(D=300.0, r_v=5.0, v_avg=2000.0, l=1000.0, w=1.0)
        assert cfg.M == 300 and cfg.tau_offset == 2.5

    def test_deterministic_bytes(self, record, tmp_path):
        a = dataio.write_signal_csv(record, tmp_path / "a.csv").read_bytes()
        b = dataio.write_signal_csv(record, tmp_path / "b.csv").read_bytes()
        assert a == b


class TestEstimatesCsv:
    def test_column_contract(self, record, tmp_path, capillary):
        est = estimate_valor(
            record, capillary.v_avg, effective_diffusion(capillary), channel=capillary
        )
        row = dataio.estimate_row(est, capillary.l, seed=12, rep=3)
        path = dataio.write_estimates_csv([row], tmp_path / "est.csv")
        lines = path.read_text().splitlines()
        assert lines[1] == (
            "method,l_true,l_hat,err_pct,sigma2_hat,t_peak_hat,"
            "cond1_ratio,alpha3,alpha4,seed,rep"
        )
        fields = lines[2].split(",")
        assert fields[0] == "valor"
        assert float(fields[1]) == 1000.0
        assert fields[5] == ""  # peak-time field empty for the variance method

    def test_float_round_trip_precision(self, tmp_path):
        path = dataio.write_table_csv(tmp_path / "t.csv", ["x"], [(1.811e-3,)])
        val = float(path.read_text().splitlines()[2].split(",")[0])
        assert val == 1.811e-3


def test_manifest_round_trip(tmp_path):
    payload = {"figure": "fig3", "seed": 0, "r2": {"v=1000": 0.999}}
    path = dataio.write_manifest(tmp_path / "m.json", payload)
    assert json.loads(path.read_text())["r2"]["v=1000"] == 0.999
