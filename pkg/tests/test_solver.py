import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from temam import ConfigurationError, SolverDivergenceError
from temam.asymptotics import lambda_from_duhamel, lambda_from_mean
from temam.kernels import apply_m_epsilon
from temam.solver import (
    NavierStokesSolver,
    SimConfig,
    TemamSolver,
    Trajectory,
    energy_ledger,
    exponential_trapezoid_solution,
    ns_reference_run,
    phi_functions,
    picard_terms,
    run,
    step,
)
from temam.spectral import divergence, make_grid, to_spectral

pytestmark = pytest.mark.filterwarnings("ignore:initial datum is not divergence-free")


def trig_datum(grid, amplitude=1.0):
    x, y = grid.coordinates()
    values = amplitude * np.stack([np.sin(y) + 0.5 * np.cos(x), np.sin(x) + 0.3 * np.sin(2 * y)])
    return to_spectral(values, grid)


def short_config(**kw):
    base = dict(n_dims=2, box_length=2 * np.pi, resolution=32, epsilon=0.5, dt=0.01, t_end=0.2)
    base.update(kw)
    return SimConfig(**base)


class TestPhiFunctions:
    @settings(max_examples=50, deadline=None)
    @given(st.floats(-30, -1e-3))
    def test_match_closed_forms(self, z):
        e, p1, p2 = phi_functions(np.array([z]))
        assert e[0] == pytest.approx(math.exp(z), rel=1e-14)
        assert p1[0] == pytest.approx(math.expm1(z) / z, rel=1e-10)
        assert p2[0] == pytest.approx((math.expm1(z) - z) / z**2, rel=1e-7)

    def test_zero_limits(self):
        e, p1, p2 = phi_functions(np.array([0.0, -1e-12]))
        np.testing.assert_allclose(p1, [1.0, 1.0], rtol=1e-12)
        np.testing.assert_allclose(p2, [0.5, 0.5], rtol=1e-12)


class TestSimConfig:
    @pytest.mark.parametrize(
        "kw, message",
        [
            ({"epsilon": 0.0}, "epsilon"),
            ({"t_end": -1.0}, "t_end"),
            ({"dt": 0.0}, "dt must"),
            ({"dt": 1.0, "t_end": 0.5}, "at least dt"),
            ({"snapshot_times": [2.0]}, "snapshot"),
            ({"record_every": 0}, "record_every"),
            ({"cfl": -0.1}, "cfl"),
            ({"dt_max": 0.0}, "dt_max"),
        ],
    )
    def test_rejects(self, kw, message):
        with pytest.raises(ConfigurationError, match=message):
            short_config(**kw)

    def test_adaptive_ladder(self):
        cfg = short_config(dt=None, cfl=0.5, dt_max=0.1)
        assert cfg.adaptive_step(0.0) == 0.1
        assert cfg.adaptive_step(1e-6) == 0.1
        h = cfg.adaptive_step(100.0)
        assert h <= 0.5 * cfg.grid.dx / 100.0
        exponent = 4 * math.log2(h / 0.1)
        assert exponent == pytest.approx(round(exponent), abs=1e-9)


class TestLinearFlow:
    def test_matches_kernel(self):
        g = make_grid(2, 2 * np.pi, 32)
        u0 = trig_datum(g)
        traj = run(short_config(nonlinearity_on=False, snapshot_times=[0.2]), u0)
        expected = apply_m_epsilon(u0, 0.2, 0.5)
        np.testing.assert_allclose(traj.snapshot(0.2).coeffs, expected.coeffs, atol=1e-14)

    def test_step_without_nonlinearity(self):
        g = make_grid(2, 2 * np.pi, 16)
        u0 = trig_datum(g)
        np.testing.assert_allclose(step(u0, 0.1, 2.0, nonlinearity_on=False).coeffs, apply_m_epsilon(u0, 0.1, 2.0).coeffs)

    def test_zero_stays_zero(self):
        g = make_grid(2, 2 * np.pi, 16)
        u = step(to_spectral(np.zeros((2, 16, 16)), g), 0.1, 1.0)
        assert np.max(np.abs(u.coeffs)) == 0.0


class TestNonlinearFlow:
    def test_second_order_in_time(self):
        g = make_grid(2, 2 * np.pi, 32)
        u0 = trig_datum(g, 2.0)
        finals = []
        for dt in (0.02, 0.01, 0.005):
            finals.append(run(short_config(dt=dt, snapshot_times=[0.2]), u0).snapshot(0.2).coeffs)
        e1 = np.max(np.abs(finals[0] - finals[1]))
        e2 = np.max(np.abs(finals[1] - finals[2]))
        assert math.log2(e1 / e2) == pytest.approx(2.0, abs=0.2)

    def test_energy_inequality(self):
        g = make_grid(2, 2 * np.pi, 32)
        traj = run(short_config(dt=0.005, t_end=0.5), trig_datum(g, 2.0))
        assert energy_ledger(traj).satisfied
        assert energy_ledger(traj).worst_violation < 1e-10

    def test_mean_routes_agree(self):
        g = make_grid(2, 2 * np.pi, 32)
        traj = run(short_config(dt=0.01, t_end=0.5), trig_datum(g, 2.0))
        scheme = lambda_from_duhamel(traj, rule="scheme").raw_value
        np.testing.assert_allclose(scheme, traj.means[-1], rtol=1e-12, atol=1e-12)
        assert np.max(np.abs(traj.means[-1] - traj.means[0])) > 1e-6

    def test_navier_stokes_stays_solenoidal_with_fixed_mean(self):
        g = make_grid(2, 2 * np.pi, 32)
        traj = ns_reference_run(short_config(dt=0.01, snapshot_times=[0.2]), trig_datum(g, 2.0))
        assert np.max(np.abs(divergence(traj.snapshot(0.2)).coeffs)) < 1e-13
        np.testing.assert_allclose(traj.means[-1], traj.means[0], atol=1e-12)
        assert traj.kind == "ns"

    def test_adaptive_hits_targets(self):
        g = make_grid(2, 2 * np.pi, 32)
        cfg = short_config(dt=None, cfl=0.25, dt_max=0.05, t_end=0.5, snapshot_times=[0.123, 0.3])
        traj = run(cfg, trig_datum(g, 3.0))
        assert traj.times[-1] == pytest.approx(0.5, abs=1e-14)
        np.testing.assert_allclose(traj.snapshot_times, [0.123, 0.3], atol=1e-14)
        assert np.all(np.diff(traj.times) <= 0.05 + 1e-12)
        assert energy_ledger(traj).satisfied

    def test_divergence_detected(self):
        g = make_grid(2, 2 * np.pi, 16)
        with pytest.raises(SolverDivergenceError):
            run(short_config(resolution=16, dt=0.5, t_end=5.0, dealias=False), trig_datum(g, 1e4))

    def test_wrong_grid(self):
        with pytest.raises(ConfigurationError, match="different grid"):
            run(short_config(), trig_datum(make_grid(2, 2 * np.pi, 16)))


class TestTrajectory:
    def test_times_must_increase(self):
        g = make_grid(2, 1.0, 8)
        with pytest.raises(ValueError, match="increasing"):
            Trajectory(g, 1.0, np.array([0.0, 0.0]), {})

    def test_missing_snapshot(self):
        g = make_grid(2, 2 * np.pi, 16)
        traj = run(short_config(resolution=16, snapshot_times=[0.1]), trig_datum(g))
        with pytest.raises(KeyError):
            traj.snapshot(0.15)


class TestPicard:
    def test_first_term_is_linear_flow(self):
        g = make_grid(2, 2 * np.pi, 32)
        u0 = trig_datum(g, 0.5)
        terms = picard_terms(u0, 2, [0.25], 0.5, dt=0.01)
        np.testing.assert_allclose(terms.term(1, 0).coeffs, apply_m_epsilon(u0, 0.25, 0.5).coeffs, atol=1e-14)

    def test_partial_sums_approach_solution(self):
        g = make_grid(2, 2 * np.pi, 32)
        u0 = trig_datum(g, 0.3)
        terms = picard_terms(u0, 4, [0.25], 0.5, dt=0.01)
        full = exponential_trapezoid_solution(u0, [0.25], 0.5, dt=0.01)[0]
        errors = [np.max(np.abs(terms.partial_sum(k, 0).coeffs - full.coeffs)) for k in range(1, 5)]
        assert all(b < 0.5 * a for a, b in zip(errors, errors[1:]))

    def test_bad_partial_sum(self):
        g = make_grid(2, 2 * np.pi, 16)
        terms = picard_terms(trig_datum(g), 2, [0.1], 1.0, dt=0.05)
        with pytest.raises(ValueError, match="K must"):
            terms.partial_sum(3, 0)


class TestEstimators:
    def test_params_round_trip(self):
        est = TemamSolver(epsilon=0.3, cfl=0.25, dt_max=0.1)
        params = est.get_params()
        assert params["cfl"] == 0.25 and params["dt_max"] == 0.1
        assert clone(est).get_params() == params

    def test_fit_predict(self):
        g = make_grid(2, 2 * np.pi, 16)
        u0 = trig_datum(g)
        est = TemamSolver(epsilon=0.5, dt=0.01, t_end=0.1, snapshot_times=[0.05, 0.1]).fit(u0)
        direct = run(short_config(resolution=16, t_end=0.1, snapshot_times=[0.05, 0.1]), u0)
        np.testing.assert_array_equal(est.predict([0.1])[0].coeffs, direct.snapshot(0.1).coeffs)
        np.testing.assert_array_equal(est.mean_, direct.means[-1])

    def test_ns_estimator(self):
        g = make_grid(2, 2 * np.pi, 16)
        est = NavierStokesSolver(dt=0.01, t_end=0.05).fit(trig_datum(g))
        assert est.trajectory_.kind == "ns"

    def test_fit_rejects_arrays(self):
        with pytest.raises(TypeError):
            TemamSolver().fit(np.zeros((2, 8, 8)))


def test_mean_limit_needs_a_decade():
    times = np.array([1.0, 2.0, 5.0])
    with pytest.raises(ConfigurationError, match="decade"):
        lambda_from_mean((times, np.ones(3)))
