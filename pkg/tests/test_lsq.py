import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from junctionlab.exceptions import DegenerateModelError, InsufficientDataError, ParameterError
from junctionlab.fits import EXP_DECAY, LOG_RESISTANCE_AREA, RAMSEY, RESISTANCE_AREA
from junctionlab.lsq import (
    FitReport,
    damped_least_squares,
    finite_difference_jacobian,
    linear_least_squares,
)


def line(x, p):
    return p[0] * x + p[1]


class TestJacobians:
    t = np.linspace(0.0, 80.0, 41)
    d = np.geomspace(500.0, 5000.0, 12)

    @given(st.floats(0.1, 2.0), st.floats(5.0, 80.0), st.floats(-0.5, 0.5))
    def test_exp_decay(self, a, tau, c):
        p = [a, tau, c]
        ref = oracles.central_difference_jacobian(EXP_DECAY.func, self.t, p)
        np.testing.assert_allclose(EXP_DECAY.jac(self.t, p), ref, rtol=1e-6, atol=1e-6)

    @given(st.floats(0.1, 1.0), st.floats(5.0, 50.0), st.floats(0.05, 1.0),
           st.floats(-3.0, 3.0), st.floats(0.0, 1.0))
    def test_ramsey(self, a, tau, f, phi, c):
        p = [a, tau, f, phi, c]
        ref = oracles.central_difference_jacobian(RAMSEY.func, self.t, p, rel=1e-7)
        # oscillating columns pass through zero, so compare against each column's scale
        scale = np.maximum(np.max(np.abs(ref), axis=0), 1.0)
        assert np.all(np.abs(RAMSEY.jac(self.t, p) - ref) <= 1e-6 * scale)

    @given(st.floats(200.0, 5000.0), st.floats(0.0, 200.0))
    def test_resistance_area(self, RA, l):
        p = [RA, l]
        for model in (RESISTANCE_AREA, LOG_RESISTANCE_AREA):
            ref = oracles.central_difference_jacobian(model.func, self.d, p, rel=1e-5)
            np.testing.assert_allclose(model.jac(self.d, p), ref, rtol=1e-6)

    def test_library_difference_jacobian(self):
        p = [0.8, 30.0, 0.1]
        np.testing.assert_allclose(
            finite_difference_jacobian(EXP_DECAY.func, self.t, p),
            EXP_DECAY.jac(self.t, p),
            rtol=1e-6,
            atol=1e-9,
        )


class TestEngine:
    def test_linear_model_one_step(self):
        x = np.linspace(0, 1, 10)
        rep = damped_least_squares(line, (x, 3 * x + 1), [0.0, 0.0], jac=lambda x, p: np.column_stack([x, np.ones_like(x)]))
        assert rep.converged and rep.iterations == 1
        assert rep.params["p0"] == pytest.approx(3.0)
        assert rep.params["p1"] == pytest.approx(1.0)

    @given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 10_000))
    def test_linear_matches_closed_form(self, a, b, seed):
        rng = np.random.default_rng(seed)
        x = np.linspace(-1, 1, 25)
        y = a * x + b + rng.normal(0, 0.1, x.size)
        rep = damped_least_squares(line, (x, y), [0.0, 0.0], names=["a", "b"])
        ref = linear_least_squares(x, y)
        assert rep["a"] == pytest.approx(ref.slope, abs=1e-7)
        assert rep["b"] == pytest.approx(ref.intercept, abs=1e-7)
        assert rep.std_errors["a"] == pytest.approx(ref.slope_stderr, rel=1e-5)

    def test_bounds_respected(self):
        x = np.linspace(0, 1, 10)
        rep = damped_least_squares(line, (x, 3 * x + 1), [0.0, 0.0], bounds=([-1, -1], [2, 2]))
        assert rep["p0"] <= 2.0

    def test_initial_point_outside_bounds(self):
        x = np.linspace(0, 1, 10)
        with pytest.raises(ParameterError):
            damped_least_squares(line, (x, x), [5.0, 0.0], bounds=([-1, -1], [2, 2]))

    def test_rank_deficient(self):
        x = np.linspace(0, 1, 10)
        model = lambda x, p: (p[0] + p[1]) * x
        with pytest.raises(DegenerateModelError):
            damped_least_squares(model, (x, 2 * x), [1.0, 1.0])

    def test_too_few_points(self):
        with pytest.raises(InsufficientDataError):
            damped_least_squares(line, ([0.0, 1.0], [0.0, 1.0]), [0.0, 0.0])

    def test_names_length(self):
        with pytest.raises(ParameterError):
            damped_least_squares(line, (np.arange(5.0), np.arange(5.0)), [0, 0], names=["a"])

    def test_iteration_cap_gives_unconverged_report(self):
        t = np.linspace(0, 100, 50)
        y = EXP_DECAY.func(t, [1.0, 20.0, 0.0])
        rep = damped_least_squares(EXP_DECAY.func, (t, y), [0.2, 90.0, 0.5], max_iter=1)
        assert not rep.converged
        assert rep.std_errors is None and rep.covariance is None

    def test_accepts_trace_objects(self):
        class Trace:
            x = np.linspace(0, 1, 6)
            y = 2 * np.linspace(0, 1, 6)

        rep = damped_least_squares(line, Trace(), [0.0, 0.0])
        assert rep["p0"] == pytest.approx(2.0)

    def test_report_serialization(self):
        rep = FitReport({"a": np.float64(1.0)}, {"a": 0.1}, 0.5, True, 3)
        assert rep.to_dict()["params"] == {"a": 1.0}
        with pytest.raises(ValueError):
            FitReport({}, None, -1.0, True, 0)

    def test_linear_least_squares_degenerate(self):
        with pytest.raises(InsufficientDataError):
            linear_least_squares([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
