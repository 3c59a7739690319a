import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from valor import (
    ChannelParams,
    DegenerateSignalError,
    NoSignalError,
    SimConfig,
    estimate_peak_time,
    estimate_valor,
    gaussian_approximation,
    run_ensemble,
    signal_moments,
)
from valor.estimators import smooth_counts
from valor.physics import effective_diffusion

from conftest import weighted_moments_bruteforce

CAP_SIGMA2 = 1.8111111111111112e-3  # 2*D_e*l/v^3 at the capillary scenario
CAP_DE = 7244.444444444444


def gaussian_signal(mean=0.5, variance=CAP_SIGMA2, dt=1e-4, amp=1000.0, offset=0.0):
    sigma = math.sqrt(variance)
    t = offset + np.arange(0.0, mean + 14.0 * sigma, dt)
    counts = amp * np.exp(-((t - offset - mean) ** 2) / (2.0 * variance))
    return t, counts


class TestSignalMoments:
    def test_matches_bruteforce_oracle(self):
        t, c = gaussian_signal()
        m = signal_moments((t, c))
        mass_o, mean_o, var_o = weighted_moments_bruteforce(t, c)
        assert m.mass == pytest.approx(mass_o * 1e-4, rel=1e-12)
        assert m.mean_time == pytest.approx(mean_o, rel=1e-12)
        assert m.variance == pytest.approx(var_o, rel=1e-12)

    def test_recovers_gaussian_variance(self):
        t, c = gaussian_signal()
        m = signal_moments((t, c))
        assert m.variance == pytest.approx(CAP_SIGMA2, rel=1e-3)
        assert m.mean_time == pytest.approx(0.5, abs=1e-5)

    def test_mass_is_count_time_integral(self):
        t = np.arange(5) * 0.1
        c = np.array([0.0, 2.0, 5.0, 1.0, 0.0])
        m = signal_moments((t, c))
        assert m.mass == pytest.approx(0.8, rel=1e-12)

    @pytest.mark.parametrize("tau", [1.0, 7.3, 100.0])
    def test_shift_invariance(self, tau):
        t, c = gaussian_signal()
        base = signal_moments((t, c)).variance
        shifted = signal_moments((t + tau, c)).variance
        assert shifted == pytest.approx(base, rel=1e-12)
        mt = signal_moments((t + tau, c)).mean_time
        assert mt == pytest.approx(signal_moments((t, c)).mean_time + tau, rel=1e-9)

    def test_single_spike_has_zero_variance(self):
        t = np.arange(10) * 0.1
        c = np.zeros(10)
        c[4] = 17.0
        m = signal_moments((t, c))
        assert m.variance == 0.0
        assert m.mean_time == pytest.approx(0.4)

    def test_empty_signal_raises(self):
        t = np.arange(10) * 0.1
        with pytest.raises(NoSignalError):
            signal_moments((t, np.zeros(10)))

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            signal_moments((np.arange(3.0), np.array([1.0, -1.0, 1.0])))

    def test_tail_clip_biases_low(self):
        t, c = gaussian_signal()
        full = signal_moments((t, c)).variance
        clipped = signal_moments((t, c), tail_clip=0.2).variance
        assert clipped < full

    @given(
        shift=st.floats(0.0, 50.0),
        scale=st.floats(0.1, 100.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_invariances_hypothesis(self, shift, scale):
        t = np.arange(0.0, 1.0, 1e-3)
        c = np.exp(-((t - 0.4) ** 2) / 2e-3)
        v0 = signal_moments((t, c)).variance
        v1 = signal_moments((t + shift, scale * c)).variance
        assert v1 == pytest.approx(v0, rel=1e-11)


class TestValor:
    def test_round_trip_from_exact_variance(self):
        # three-bin record whose weighted variance is exactly h^2/2
        sigma2 = CAP_SIGMA2
        h = math.sqrt(2.0 * sigma2)
        t = np.array([0.0, h, 2.0 * h])
        c = np.array([1.0, 2.0, 1.0])
        est = estimate_valor((t, c), v_avg=2000.0, D_e=CAP_DE)
        assert est.sigma2_hat == pytest.approx(sigma2, rel=1e-12)
        assert est.l_hat == pytest.approx(1000.0, rel=1e-9)

    def test_spec_example_values(self):
        t, c = gaussian_signal()
        est = estimate_valor((t, c), v_avg=2000.0, D_e=CAP_DE)
        assert est.l_hat == pytest.approx(1000.0, rel=1e-3)
        assert est.method == "valor"

    def test_count_scaling_invariance(self):
        t, c = gaussian_signal()
        a = estimate_valor((t, c), 2000.0, CAP_DE).l_hat
        b = estimate_valor((t, 7.0 * c), 2000.0, CAP_DE).l_hat
        assert b == pytest.approx(a, rel=1e-13)

    @pytest.mark.parametrize("tau", [0.0, 1.0, 7.3, 100.0])
    def test_offset_invariance(self, tau):
        t, c = gaussian_signal()
        base = estimate_valor((t, c), 2000.0, CAP_DE).l_hat
        shifted = estimate_valor((t + tau, c), 2000.0, CAP_DE).l_hat
        assert shifted == pytest.approx(base, rel=1e-12)

    def test_linearity_across_distances(self):
        # synthetic pulses from the channel model across the sweep range
        for l in (500.0, 1000.0, 2000.0, 4000.0):
            ch = ChannelParams(D=300.0, r_v=5.0, v_avg=2000.0, l=l, w=1.0)
            pulse = gaussian_approximation(ch)
            sigma = math.sqrt(pulse.variance)
            t = np.arange(0.0, pulse.mean + 14.0 * sigma, 1e-4)
            c = pulse(t)
            est = estimate_valor((t, c), ch.v_avg, effective_diffusion(ch))
            assert est.l_hat == pytest.approx(l, rel=5e-3)

    def test_monotone_in_variance(self):
        h = 1.0
        l_hats = []
        for scale in (0.5, 1.0, 2.0, 4.0):
            t = np.array([0.0, h * scale, 2.0 * h * scale])
            c = np.array([1.0, 2.0, 1.0])
            l_hats.append(estimate_valor((t, c), 2000.0, CAP_DE).l_hat)
        assert all(a < b for a, b in zip(l_hats, l_hats[1:]))

    def test_diagnostics_populated(self, capillary):
        t, c = gaussian_signal()
        est = estimate_valor((t, c), 2000.0, CAP_DE, channel=capillary)
        assert est.diagnostics is not None
        assert est.diagnostics.alpha3 == pytest.approx(0.2553, rel=5e-3)
        assert est.cond1_ratio == pytest.approx(0.0417, rel=5e-3)

    def test_degenerate_signal(self):
        t = np.arange(10) * 0.1
        c = np.zeros(10)
        c[3] = 5.0
        with pytest.raises(DegenerateSignalError):
            estimate_valor((t, c), 2000.0, CAP_DE)

    def test_parameter_validation(self):
        t, c = gaussian_signal()
        with pytest.raises(ValueError):
            estimate_valor((t, c), 0.0, CAP_DE)
        with pytest.raises(ValueError):
            estimate_valor((t, c), 2000.0, -1.0)

    def test_simulated_ensemble_accuracy(self):
        # desk-scale shrunk: bias ~1%, per-rep noise ~3%; generous bound
        ch = ChannelParams(D=300.0, r_v=5.0, v_avg=2000.0, l=2000.0, w=1.0)
        cfg = SimConfig(M=2000, dt=1e-4, seed=6)
        recs = run_ensemble(ch, cfg, 5)
        d_e = effective_diffusion(ch)
        errs = [
            abs(estimate_valor(r, ch.v_avg, d_e).l_hat - ch.l) / ch.l for r in recs
        ]
        assert np.mean(errs) < 0.06


class TestSmoothing:
    def test_window_one_is_identity(self):
        c = np.random.default_rng(0).random(50)
        assert np.array_equal(smooth_counts(c, 1), c)

    def test_constant_preserved(self):
        c = np.full(100, 3.0)
        assert np.allclose(smooth_counts(c, 11), 3.0)

    def test_even_window_rejected(self):
        with pytest.raises(ValueError):
            smooth_counts(np.ones(10), 4)

    def test_symmetric_peak_not_shifted(self):
        t, c = gaussian_signal()
        sm = smooth_counts(c, 51)
        assert abs(int(np.argmax(sm)) - int(np.argmax(c))) <= 1


class TestPeakTime:
    def test_noiseless_gaussian(self):
        t, c = gaussian_signal()
        est = estimate_peak_time((t, c), emission_time=0.0, v_avg=2000.0)
        assert est.l_hat == pytest.approx(1000.0, abs=2000.0 * 1e-4)
        assert est.t_peak_hat == pytest.approx(0.5, abs=1e-4)
        assert est.method == "peak_time"
        assert not est.truncated

    def test_emission_time_error_propagates_linearly(self):
        t, c = gaussian_signal()
        base = estimate_peak_time((t, c), 0.0, 2000.0).l_hat
        for delta in (0.05, 0.1, 0.2):
            est = estimate_peak_time((t, c), delta, 2000.0)
            assert est.l_hat == pytest.approx(base - 2000.0 * delta, rel=1e-12)

    def test_spec_bias_example(self):
        t, c = gaussian_signal()
        biased = estimate_peak_time((t, c), 0.1, 2000.0).l_hat
        exact = estimate_peak_time((t, c), 0.0, 2000.0).l_hat
        assert exact - biased == pytest.approx(200.0, rel=1e-12)

    def test_offset_plus_known_emission_consistent(self):
        # shifting the record and telling the estimator the true emission
        # time must give the same distance
        t, c = gaussian_signal()
        a = estimate_peak_time((t, c), 0.0, 2000.0).l_hat
        b = estimate_peak_time((t + 7.3, c), 7.3, 2000.0).l_hat
        assert b == pytest.approx(a, rel=1e-12)

    def test_truncation_flag(self):
        t, c = gaussian_signal()
        cut = int(0.45 / 1e-4)  # cut the record before the peak
        est = estimate_peak_time((t[:cut], c[:cut]), 0.0, 2000.0)
        assert est.truncated

    def test_emission_after_peak_degenerate(self):
        t, c = gaussian_signal()
        with pytest.raises(DegenerateSignalError):
            estimate_peak_time((t, c), 0.9, 2000.0)

    def test_no_signal(self):
        with pytest.raises(NoSignalError):
            estimate_peak_time((np.arange(5.0), np.zeros(5)), 0.0, 2000.0)


class TestEstimateEnsemble:
    def test_per_rep_and_mean_signal_modes(self):
        ch = ChannelParams(D=300.0, r_v=5.0, v_avg=2000.0, l=300.0, w=1.0)
        cfg = SimConfig(M=1500, dt=1e-4, seed=44)
        recs = run_ensemble(ch, cfg, 3)
        d_e = effective_diffusion(ch)
        from valor.estimators import estimate_ensemble

        per_rep = estimate_ensemble(recs, ch.v_avg, d_e, mode="per_rep")
        assert len(per_rep) == 3
        pooled = estimate_ensemble(recs, ch.v_avg, d_e, mode="mean_signal")
        mean_per_rep = np.mean([e.l_hat for e in per_rep])
        assert pooled.l_hat == pytest.approx(mean_per_rep, rel=0.25)
        assert pooled.l_hat == pytest.approx(ch.l, rel=0.3)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            from valor.estimators import estimate_ensemble

            estimate_ensemble([], 1.0, 1.0, mode="per_rep")


def test_valor_immune_where_peak_time_degrades():
    # same signal, same emission-time mis-specification
    t, c = gaussian_signal()
    mis = 0.2
    valor_a = estimate_valor((t, c), 2000.0, CAP_DE).l_hat
    valor_b = estimate_valor((t + mis, c), 2000.0, CAP_DE).l_hat
    peak_err = abs(estimate_peak_time((t + mis, c), 0.0, 2000.0).l_hat - 1000.0)
    assert valor_b == pytest.approx(valor_a, rel=1e-12)
    assert peak_err > 100.0 * abs(valor_b - valor_a + 1e-30) / 1.0
    assert peak_err == pytest.approx(2000.0 * mis, rel=2e-3)
