import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bathsim.errors import (
    ConditioningWarning,
    PreconditionError,
    QuadratureDivergenceError,
    SpectrumDomainError,
    SupportViolationError,
)
from bathsim.spectrum import (
    AbsGaussDensity,
    Family,
    KleinGordonThermostat,
    OscillatorModel,
    PowerGaussCoupling,
    QuadratureSpec,
    compute_K,
    effective_critical_points,
    find_lambda0,
    gaussian_gap,
    gaussian_gapless,
    kg_spectrum,
    phi,
    read_table,
    validate_hypotheses,
    w_diamond_gap,
    w_time,
    zero_spectrum,
)

from conftest import K_GAP, LAMBDA0_SYNC, W_DIAMOND_EDGE, W_DIAMOND_HALF


class TestCouplingDensity:
    def test_gapless_closed_form(self, gapless):
        nu = np.linspace(0, 5, 11)
        np.testing.assert_allclose(gapless.a_hat_sq(nu), nu**2 * np.exp(-nu**2) / math.sqrt(math.pi))

    def test_even_extension(self, gap):
        nu = np.array([0.3, 1.5, 2.7])
        np.testing.assert_array_equal(gap.a_hat(nu), gap.a_hat(-nu))

    def test_gap_vanishes(self, gap):
        assert np.all(gap.a_hat(np.linspace(-1, 1, 21)) == 0.0)
        assert np.all(gap.a_hat(np.linspace(1.01, 6, 21)) > 0)

    def test_tabulated_out_of_range(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("nu,a_hat\n0,0\n1,0.5\n2,0.25\n")
        spec = read_table(p)
        assert spec.family is Family.TABULATED
        assert spec.a_hat(1.5) == pytest.approx(0.375)
        with pytest.raises(SpectrumDomainError):
            spec.a_hat(2.5)

    def test_tabulated_rejects_unsorted(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("nu,a_hat\n0,0\n2,0.5\n1,0.25\n")
        with pytest.raises(ValueError):
            read_table(p)


class TestK:
    def test_gapless_is_one(self, gapless, quad):
        assert abs(compute_K(gapless, quad) - 1.0) <= 1e-10

    def test_gap_closed_form(self, gap, quad):
        assert compute_K(gap, quad) == pytest.approx(K_GAP, abs=1e-13)

    def test_zero_coupling(self, quad):
        assert compute_K(zero_spectrum(), quad) == 0.0

    def test_refinement_within_error_estimate(self, gap):
        coarse = compute_K(gap, QuadratureSpec(panels=32), full_output=True)
        fine = compute_K(gap, QuadratureSpec(panels=64), full_output=True)
        assert abs(fine.value - coarse.value) <= max(coarse.error, 1e-15)

    def test_adaptive_rule_agrees(self, gap):
        a = compute_K(gap, QuadratureSpec(rule="adaptive"))
        assert a == pytest.approx(K_GAP, rel=1e-9)

    def test_divergent_integral(self, quad):
        # a^2 ~ nu^0 near zero makes a^2 / nu^2 non-integrable
        with pytest.raises(QuadratureDivergenceError):
            compute_K(gaussian_gapless(p=0.0), quad)


class TestKernel:
    def test_gapless_closed_form(self, gapless, quad):
        tau = np.linspace(0, 20, 2001)
        w = w_time(gapless, tau, quad)
        assert np.max(np.abs(w - 0.5 * tau * np.exp(-tau**2 / 4))) <= 1e-8

    def test_zero_at_origin(self, gap, quad):
        assert w_time(gap, 0.0, quad) == 0.0

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.0, 30.0))
    def test_odd(self, tau):
        spec, quad = gaussian_gap(), QuadratureSpec()
        assert abs(w_time(spec, tau, quad) + w_time(spec, -tau, quad)) <= 2 * quad.abs_tol


class TestGapKernel:
    def test_at_zero_equals_K(self, gap, quad):
        assert abs(w_diamond_gap(gap, 0.0, quad) - compute_K(gap, quad)) <= 1e-8

    def test_oracle_values(self, gap, quad):
        assert w_diamond_gap(gap, 0.5, quad) == pytest.approx(W_DIAMOND_HALF, abs=1e-12)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConditioningWarning)
            near = w_diamond_gap(gap, 1.0 - 2e-3, quad)
        assert near == pytest.approx(W_DIAMOND_EDGE, abs=5e-3)

    def test_even_and_nondecreasing(self, gap, quad):
        grid = np.linspace(0, 0.99, 12)
        vals = [w_diamond_gap(gap, x, quad) for x in grid]
        assert np.all(np.diff(vals) >= 0)
        for x, v in zip(grid, vals):
            assert w_diamond_gap(gap, -x, quad) == v

    def test_domain(self, gap, gapless, quad):
        with pytest.raises(SpectrumDomainError):
            w_diamond_gap(gap, 1.5, quad)
        with pytest.raises(SpectrumDomainError):
            w_diamond_gap(gapless, 0.1, quad)

    def test_edge_warning(self, gap, quad):
        with pytest.warns(ConditioningWarning):
            w_diamond_gap(gap, 1.0 - 1e-4, quad)


class TestLambda0:
    def test_fixture(self, gap, quad):
        lam = find_lambda0(gap, 0.5, 1e-12, quad)
        assert lam == pytest.approx(LAMBDA0_SYNC, abs=1e-11)
        assert abs(phi(gap, 0.5, lam, quad)) <= 1e-12 * max(1, 0.5)
        d = 1e-11
        assert np.sign(phi(gap, 0.5, lam - d, quad)) != np.sign(phi(gap, 0.5, lam + d, quad))

    def test_phi_oracles(self, gap, quad):
        assert phi(gap, 0.5, 0.0, quad) == pytest.approx(0.443209876269739311, abs=1e-12)
        assert phi(gap, 0.5, 0.5, quad) == pytest.approx(0.184665133904838704, abs=1e-12)
        assert phi(gap, 2.0, 0.5, quad) == pytest.approx(1.684665134, abs=1e-9)

    def test_absent_when_phi_positive(self, gap, quad):
        assert find_lambda0(gap, 2.0, 1e-12, quad) is None

    def test_absent_without_gap(self, gapless, quad):
        assert find_lambda0(gapless, 2.0, 1e-12, quad) is None

    def test_precondition(self, gapless, quad):
        with pytest.raises(PreconditionError):
            find_lambda0(gapless, 0.5, 1e-12, quad)


class TestKleinGordon:
    C = math.pi ** -0.25

    def thermostat(self, m0):
        return KleinGordonThermostat(AbsGaussDensity(1.0, 1.0), m0, PowerGaussCoupling(m0, self.C))

    @pytest.mark.parametrize("k", range(5))
    def test_moment_identity(self, k):
        th = self.thermostat(1.0)
        g = lambda nu: nu**k  # noqa: E731
        a, b = th.moment_nu(g), th.moment_s(g)
        assert a == pytest.approx(b, rel=1e-8)

    def test_massless_is_gapless(self):
        spec = kg_spectrum(AbsGaussDensity(1.0, 1.0), 0.0, PowerGaussCoupling(0.0, self.C))
        nu = np.linspace(0.01, 6, 50)
        np.testing.assert_allclose(spec.a_hat_sq(nu), gaussian_gapless().a_hat_sq(nu), rtol=1e-14)
        th = self.thermostat(0.0)
        np.testing.assert_array_equal(th.rho(nu), AbsGaussDensity(1.0, 1.0)(nu))

    def test_gap_query(self):
        th = self.thermostat(1.0)
        assert th.rho(0.5)[()] == 0.0
        assert kg_spectrum(th.rho0, 1.0, th.kappa).a_hat(0.5) == 0.0

    def test_support_violation(self):
        with pytest.raises(SupportViolationError):
            kg_spectrum(AbsGaussDensity(), 1.0, lambda nu: np.exp(-np.asarray(nu) ** 2))

    def test_no_nan_far_out(self):
        spec = kg_spectrum(AbsGaussDensity(), 1.0, PowerGaussCoupling(1.0, self.C))
        assert np.all(np.isfinite(spec.a_hat(np.array([30.0, 100.0]))))


class TestOscillator:
    def test_critical_points_double_well(self):
        assert effective_critical_points(OscillatorModel((0, 0, 0, 0, 0.25)), 1.0) == pytest.approx([-1, 0, 1])

    def test_critical_points_linear(self):
        assert effective_critical_points(OscillatorModel.linear(2.0), 1.0) == [0.0]

    def test_critical_points_quartic_plus_quadratic(self):
        pts = effective_critical_points(OscillatorModel((0, 0, 0.5, 0, 0.25)), 1.0)
        assert pts == pytest.approx([0.0], abs=1e-6)

    def test_linear_model(self):
        osc = OscillatorModel.linear(2.0)
        assert osc.is_linear and osc.f_is_identity and osc.v == 2.0


class TestHypotheses:
    def test_gapless_double_well_passes(self, gapless, quad):
        rep = validate_hypotheses(gapless, OscillatorModel((0, 0, 0, 0, 0.25)), quad)
        assert rep.all_passed
        assert rep["positive_stiffness"].passed is None

    def test_h5_fails_for_nonzero_origin(self, quad):
        # a^2 = exp(-nu^2) / sqrt(pi)
        rep = validate_hypotheses(gaussian_gapless(p=0.0), OscillatorModel.linear(2.0), quad)
        assert rep["regular_at_zero"].passed is False
        assert rep["integrability"].passed is False

    def test_case_a_fails(self, gapless, quad):
        rep = validate_hypotheses(gapless, OscillatorModel.linear(0.5), quad)
        assert rep["positive_stiffness"].passed is False
        assert not rep.all_passed
