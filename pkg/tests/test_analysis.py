import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bathsim.analysis import (
    CONVERGED,
    DECAY,
    HARMONIC,
    ClassifierSettings,
    classify,
    energy_identity_residual,
    fit_harmonic,
    windowed_peaks,
)
from bathsim.discretize import BathInitialData, DiscreteBath, bath_initial
from bathsim.dynamics import TrajectoryRecord, run
from bathsim.errors import RecurrenceHorizonError
from bathsim.spectrum import OscillatorModel, compute_K

from conftest import LAMBDA0_SYNC

DT = 0.01


def synthetic(x, dt=DT, meta=None):
    n = x.size
    z = np.zeros(n)
    return TrajectoryRecord(dt * np.arange(n), x, z, x, z, z, z, dt=dt, meta=meta or {})


class TestPeaks:
    def test_pure_tone(self):
        t = DT * np.arange(20001)
        peaks = windowed_peaks(np.cos(2 * t), DT, 50.0)
        bin_w = 2 * math.pi / 50
        for w in peaks:
            assert len(w) == 1
            assert abs(w[0].frequency - 2.0) <= 0.5 * bin_w
            assert w[0].amplitude == pytest.approx(1.0, rel=1e-2)
            assert w[0].persistence == 1.0

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.4, 5.0))
    def test_interpolation_within_half_bin(self, freq):
        t = DT * np.arange(10001)
        peaks = windowed_peaks(np.cos(freq * t), DT, 50.0)
        top = max(peaks[-1], key=lambda p: p.amplitude)
        assert abs(top.frequency - freq) <= 0.5 * 2 * math.pi / 50

    def test_decaying_tone(self):
        t = DT * np.arange(20001)
        peaks = windowed_peaks(np.exp(-0.05 * t) * np.cos(2 * t), DT, 50.0)
        amps = [max(w, key=lambda p: p.amplitude).amplitude if w else 0.0 for w in peaks]
        assert all(a >= b for a, b in zip(amps, amps[1:]))
        assert peaks[0][0].persistence < 1.0

    def test_zero_signal(self):
        assert all(w == [] for w in windowed_peaks(np.zeros(10001), DT, 50.0))

    def test_window_too_long(self):
        with pytest.raises(ValueError):
            windowed_peaks(np.zeros(100), DT, 50.0)


class TestFit:
    def test_exact_tone(self):
        t = DT * np.arange(5001)
        fit = fit_harmonic(t, 2 * 0.3 * np.cos(1.2 * t), (0.0, 50.0), 1.21)
        assert abs(fit.alpha) == pytest.approx(0.3, abs=1e-10)
        assert fit.residual_fraction <= 1e-10
        assert fit.frequency == pytest.approx(1.2, abs=1e-9)

    def test_noisy_tone(self, rng):
        t = DT * np.arange(5001)
        y = np.cos(1.2 * t)
        y = y + 0.01 * np.sqrt(np.mean(y**2)) * rng.standard_normal(t.size)
        fit = fit_harmonic(t, y, (0.0, 50.0), 1.2)
        assert fit.residual_fraction == pytest.approx(0.01, rel=0.1)

    def test_decaying_flags(self):
        t = DT * np.arange(5001)
        fit = fit_harmonic(t, np.exp(-0.1 * t) * np.cos(1.2 * t), (0.0, 50.0), 1.2)
        assert fit.residual_fraction > 0.05

    def test_zero_window(self):
        t = DT * np.arange(101)
        fit = fit_harmonic(t, np.zeros(101), (0.0, 1.0), 1.0)
        assert fit.alpha == 0 and fit.residual_fraction == 0


class TestEnergyIdentity:
    def test_zero(self, gapless_bath):
        rec = run(gapless_bath, OscillatorModel.linear(2.0), 0.0, 0.0, None, 1e-2, 4.0)
        r = energy_identity_residual(rec, gapless_bath, bath_initial(gapless_bath))
        assert np.all(r["simulated"] == 0) and np.all(r["identity"] == 0)
        assert np.all(r["residual"] == 0)

    def test_injected_tone_analytic(self):
        # single mode driven by psi = cos(2t): exact Psi and exact mode energy
        bath = DiscreteBath([1.0], [1.0], [0.5])
        dt, T, lam = 1e-3, 10.0, 2.0
        t = dt * np.arange(int(round(T / dt)) + 1)
        psi = np.cos(lam * t)
        nu, a = 1.0, 0.5
        Psi = 0.5 * ((np.exp(1j * (lam - nu) * t) - 1) / (1j * (lam - nu))
                     + (np.exp(-1j * (lam + nu) * t) - 1) / (-1j * (lam + nu)))
        ebath = np.abs(a * Psi) ** 2
        z = np.zeros_like(t)
        rec = TrajectoryRecord(t, z, z, psi, z, z, ebath, dt=dt, psi_dense=psi)
        r = energy_identity_residual(rec, bath, BathInitialData([0.0], [0.0]), (2.5, 5.0, 10.0))
        assert np.max(r["residual"]) <= 1e-6

    def test_order_two(self, gapless_bath):
        osc = OscillatorModel.linear(2.0)
        res = []
        for dt in (1e-2, 5e-3):
            rec = run(gapless_bath, osc, 1.0, 0.0, None, dt, 20.0)
            res.append(energy_identity_residual(rec, gapless_bath, bath_initial(gapless_bath))["residual"][-1])
        assert 3.0 <= res[0] / res[1] <= 5.0

    def test_needs_dense_psi(self, gapless_bath):
        rec = synthetic(np.zeros(11))
        with pytest.raises(ValueError):
            energy_identity_residual(rec, gapless_bath, bath_initial(gapless_bath))


class TestClassify:
    def test_synthetic_decay(self, gap, quad):
        t = DT * np.arange(20001)
        rep = classify(synthetic(np.exp(-0.1 * t) * np.cos(t)), gap, OscillatorModel.linear(2.0), quad=quad)
        assert rep.measured == DECAY and rep.predicted == DECAY and rep.agrees

    def test_synthetic_harmonic(self, gap, quad):
        t = DT * np.arange(20001)
        alpha = 0.4 * np.exp(0.3j)
        x = 2 * np.real(alpha * np.exp(1j * LAMBDA0_SYNC * t)) + 0.5 * np.exp(-0.2 * t) * np.cos(1.7 * t)
        rep = classify(synthetic(x), gap, OscillatorModel.linear(0.5), quad=quad)
        assert rep.measured == HARMONIC and rep.agrees
        assert abs(rep.lambda_measured - rep.lambda0_predicted) <= 2 * math.pi / 50
        assert abs(rep.alpha) == pytest.approx(0.4, rel=1e-2)

    def test_scaling_and_shift(self, gap, quad):
        t = DT * np.arange(20001)
        x = np.cos(LAMBDA0_SYNC * t)
        osc = OscillatorModel.linear(0.5)
        base = classify(synthetic(x), gap, osc, quad=quad)
        scaled = classify(synthetic(3 * x), gap, osc, quad=quad)
        shifted = classify(synthetic(x).shifted(7 * DT), gap, osc, quad=quad)
        assert scaled.measured == base.measured == shifted.measured == HARMONIC
        assert scaled.lambda_measured == pytest.approx(base.lambda_measured, rel=1e-12)
        assert abs(scaled.alpha) == pytest.approx(3 * abs(base.alpha), rel=1e-9)
        assert shifted.lambda_measured == pytest.approx(base.lambda_measured, rel=1e-12)

    def test_synthetic_converged(self, gapless, quad):
        t = DT * np.arange(20001)
        x = 1.0 + 0.6 * np.exp(-0.2 * t) * np.cos(2 * t)
        rep = classify(synthetic(x), gapless, OscillatorModel((0, 0, 0, 0, 0.25)), quad=quad)
        assert rep.predicted == CONVERGED and rep.measured == CONVERGED
        assert rep.matched_critical_point == pytest.approx(1.0)
        assert rep.critical_points == pytest.approx([-1, 0, 1])

    def test_unresolved(self, gapless, quad):
        t = DT * np.arange(20001)
        x = np.cos(t) * (1 + 0.5 * np.sin(0.05 * t))
        rep = classify(synthetic(x), gapless, OscillatorModel((0, 0, 0, 0, 0.25)), quad=quad)
        assert rep.measured == "Unresolved" and not rep.agrees

    def test_horizon(self, gap, quad):
        rec = synthetic(np.zeros(20001), meta={"recurrence_time": 100.0})
        with pytest.raises(RecurrenceHorizonError):
            classify(rec, gap, OscillatorModel.linear(2.0), quad=quad)
        classify(rec, gap, OscillatorModel.linear(2.0), quad=quad,
                 settings=ClassifierSettings(allow_beyond_guard=True))

    def test_report_json(self, gap, quad):
        import json
        t = DT * np.arange(20001)
        rep = classify(synthetic(np.cos(LAMBDA0_SYNC * t)), gap, OscillatorModel.linear(0.5),
                       K=compute_K(gap, quad), quad=quad)
        from bathsim.config import as_jsonable
        doc = json.loads(json.dumps(as_jsonable(rep.to_dict())))
        assert doc["measured"] == HARMONIC
        assert doc["settings"]["decay_ratio"] == 0.05
