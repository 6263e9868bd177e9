import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from temam import ConfigurationError
from temam import example3d as ex3
from temam.solver import picard_terms
from temam.spectral import divergence, make_grid

# mpmath at 30 digits, frozen
XI_INTEGRAL_ORACLE = {
    (2.0, 0.0): -0.18456574155143460638,
    (2.0, 1.0): 0.36913148310286921276,
    (2.0, 2.0): 0.92282870775717303189,
    (5.0, 0.0): -0.020917948668843966315,
    (5.0, 1.0): -0.011953113525053695037,
    (5.0, 2.0): -0.0029882783812634237592,
    (10.0, 0.0): -0.0022450964016810591105,
    (10.0, 1.0): -0.001848902919031460444,
    (10.0, 2.0): -0.0014527094363818617774,
}
T3_ORACLE = {1.0: 7.5500835657434078011e-6, 2.0: 1.0111304076630297748e-5}


class TestClosedForms:
    @pytest.mark.parametrize("key", sorted(XI_INTEGRAL_ORACLE))
    def test_closed_form_matches_oracle(self, key):
        assert ex3.xi_integral_closed_form(*key) == pytest.approx(XI_INTEGRAL_ORACLE[key], rel=1e-13)

    @pytest.mark.parametrize("key", sorted(XI_INTEGRAL_ORACLE))
    def test_quadrature_matches_oracle(self, key):
        assert ex3.xi_integral_quadrature(*key).value == pytest.approx(XI_INTEGRAL_ORACLE[key], rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.6, 20.0), st.floats(0.0, 10.0))
    def test_closed_form_agrees_with_quadrature(self, lam, tau):
        closed = ex3.xi_integral_closed_form(lam, tau)
        quad = ex3.xi_integral_quadrature(lam, tau).value
        assert closed == pytest.approx(quad, rel=1e-9, abs=1e-12 * abs(lam) ** -4.5)

    @pytest.mark.parametrize("lam", [0.0, -1.0])
    def test_rejects_nonpositive_lambda(self, lam):
        with pytest.raises(ValueError, match="positive"):
            ex3.xi_integral_closed_form(lam, 0.0)


class TestLeadingTerm:
    @pytest.mark.parametrize("t", sorted(T3_ORACLE))
    def test_adaptive_matches_oracle(self, t):
        assert ex3.t3_first_component(t, 1.0).value == pytest.approx(T3_ORACLE[t], rel=1e-9)

    @pytest.mark.parametrize("t", sorted(T3_ORACLE))
    def test_tensor_matches_oracle(self, t):
        assert ex3.t3_first_component_tensor(t, 1.0).value == pytest.approx(T3_ORACLE[t], rel=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.01, 50.0), st.floats(0.0, 1.0), st.floats(0.05, 5.0))
    def test_integrand_nonnegative(self, s, frac, eps):
        assert ex3.t3_integrand(s, frac * s, eps) >= 0.0

    def test_increasing_in_time(self):
        vals = [ex3.t3_first_component(t, 1.0).value for t in (0.5, 1.0, 2.0, 4.0)]
        assert np.all(np.diff(vals) > 0) and vals[0] > 0

    def test_limit_decreases_with_eps(self):
        limits = [ex3.t3_limit(eps).value for eps in (0.1, 0.5, 1.0)]
        assert limits == sorted(limits)
        assert limits[-1] == pytest.approx(1.1455363390298734e-05, rel=1e-7)

    def test_negative_time(self):
        with pytest.raises(ValueError, match="non-negative"):
            ex3.t3_first_component(-1.0, 1.0)


class TestDatum:
    def test_small_box_rejected(self):
        with pytest.raises(ConfigurationError, match="tail"):
            ex3.build_example_datum(make_grid(3, 12.0, 16), 0.1)

    def test_two_dimensions_rejected(self):
        with pytest.raises(ConfigurationError, match="three dimensions"):
            ex3.build_example_datum(make_grid(2, 40.0, 16), 0.1)

    def test_datum_is_solenoidal_with_zero_mean(self):
        u0 = ex3.build_example_datum(make_grid(3, 24.0, 16), 0.5)
        assert np.max(np.abs(divergence(u0).coeffs)) < 1e-15
        assert np.max(np.abs(u0.zero_mode())) == 0.0

    def test_suggested_box_meets_tail_tolerance(self):
        L = ex3.suggested_box_length()
        assert ex3.tail_bound(L) < ex3.TAIL_TOLERANCE <= ex3.tail_bound(L - 1.0)


class TestCalibration:
    def test_symbol_matches_grid_transform(self):
        cal = ex3.rhs_calibration(make_grid(3, 24.0, 32))
        assert cal.ratio == pytest.approx(1.0, abs=1e-6)
        assert cal.spread < 1e-4
        assert cal.n_modes > 100

    def test_grid_third_order_mean_matches_plancherel_factor(self):
        g = make_grid(3, 24.0, 32)
        u0 = ex3.build_example_datum(g, 1.0)
        expected = ex3.PLANCHEREL_FACTOR * ex3.t3_first_component(0.5, 1.0).value
        errors = []
        for dt in (0.05, 0.025):
            mean = picard_terms(u0, 3, [0.5], 1.0, dt=dt).mean_integrals()[2, 0]
            errors.append(abs(mean[0] - expected) / expected)
            assert np.max(np.abs(mean[1:])) < 1e-12 * abs(mean[0])
        assert errors[1] < 2e-3
        assert errors[1] < errors[0] / 4


class TestPrediction:
    def test_cubic_in_eta(self):
        L3 = 1.1455363390298734e-05
        a = ex3.perturbative_prediction(0.02, 1.0, L3)
        b = ex3.perturbative_prediction(0.04, 1.0, L3)
        assert b[0] / a[0] == pytest.approx(8.0)
        assert a[0] == pytest.approx(0.02**3 * L3 / (16 * math.pi**3))
        np.testing.assert_array_equal(a[1:], 0.0)

    def test_zero_amplitude(self):
        np.testing.assert_array_equal(ex3.perturbative_prediction(0.0, 1.0), np.zeros(3))

    def test_calibration_threshold(self):
        base = ex3.perturbative_prediction(0.1, 1.0, 1.0)
        assert ex3.perturbative_prediction(0.1, 1.0, 1.0, calibration=1.0005)[0] == base[0]
        assert ex3.perturbative_prediction(0.1, 1.0, 1.0, calibration=1.1)[0] == pytest.approx(1.1 * base[0])

    def test_report_keys(self):
        rep = ex3.example_report(1.0, 0.02, 1e-5, 1.0, measured_lambda=[2e-14, 0.0, 0.0])
        assert set(rep) == {"eps", "eta", "L3", "calibration_ratio", "predicted_lambda", "measured_lambda", "relative_error"}
        assert rep["relative_error"] == pytest.approx(abs(2e-14 - rep["predicted_lambda"][0]) / rep["predicted_lambda"][0])
        assert ex3.dumps_report(rep) == ex3.dumps_report(dict(reversed(list(rep.items()))))

    def test_params_validation(self):
        with pytest.raises(ValueError):
            ex3.ExampleParams(eta=-0.1)
