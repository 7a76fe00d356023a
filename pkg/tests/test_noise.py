import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulsecontrol.noise import (CorrelationSpec, NoiseError, NoiseProcess, TimeGrid, correlation,
                                empirical_autocorrelation, exponential_kernel_integral, sample_block,
                                sample_trajectory)
from pulsecontrol.streams import substream


def test_correlation_zero_lag_and_symmetry():
    spec = NoiseProcess("ou", 1.0, 1.0, "z").correlation_spec()
    assert correlation(spec, "z", "z", 0.0) == 1.0
    assert correlation(spec, "z", "z", 1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert correlation(spec, "z", "z", -0.7) == correlation(spec, "z", "z", 0.7)


def test_absent_channel_is_zero():
    spec = NoiseProcess("ou", 1.0, 1.0, "z").correlation_spec()
    assert correlation(spec, "x", "z", 0.3) == 0.0


def test_independent_axes_have_no_cross_terms():
    spec = NoiseProcess("ou", 0.5, 1.0, "xyz").correlation_spec()
    assert not spec.cross_terms
    assert correlation(spec, "x", "y", 0.0) == 0.0
    assert correlation(spec, "y", "y", 0.0) == pytest.approx(0.25)


def test_mixing_sets_covariance():
    m = ((1.0, 0.0), (0.5, 1.0))
    spec = NoiseProcess("ou", 2.0, 1.0, "xz", mixing=m).correlation_spec()
    assert spec.cross_terms
    np.testing.assert_allclose(spec.covariance, 4.0 * np.array(m) @ np.array(m).T)


def test_kernel_integral_is_antiderivative():
    from scipy.integrate import quad
    for xi in (-2.0, -0.3, 0.0, 0.4, 3.0):
        val, _ = quad(lambda u: math.exp(-abs(u)), 0.0, xi)
        assert exponential_kernel_integral(xi) == pytest.approx(val, abs=1e-13)


def test_numeric_second_derivative_fallback():
    spec = CorrelationSpec(1.0, ("z",), [[1.0]], kernel=lambda x: np.exp(-x**2), kernel_d2=None)
    xi = 0.7
    assert spec.second_derivative(xi) == pytest.approx((4 * xi**2 - 2) * math.exp(-xi**2), rel=1e-6)


@pytest.mark.parametrize("kwargs", [
    dict(kind="pink"), dict(sigma=-1.0), dict(t_c=0.0), dict(axes="w"), dict(n_qubits=4),
    dict(axes="xz", mixing=((1.0,),)),
])
def test_process_validation(kwargs):
    with pytest.raises(NoiseError):
        NoiseProcess(**kwargs)


def test_grid_resolution_guard():
    p = NoiseProcess("ou", 1.0, 1.0)
    with pytest.raises(NoiseError):
        sample_block(p, TimeGrid(0.1, 10), 0, [0])
    sample_block(p, TimeGrid(0.05, 10), 0, [0])


def test_grid_covering():
    g = TimeGrid.covering(2.0, 0.05)
    assert g.n_steps == 40 and g.t_total == pytest.approx(2.0)
    with pytest.raises(NoiseError):
        TimeGrid.covering(1.0, 0.3)


@pytest.mark.parametrize("kind", ["ou", "rtn"])
def test_same_seed_same_path(kind):
    p = NoiseProcess(kind, 1.0, 1.0)
    g = TimeGrid(0.01, 500)
    a = sample_trajectory(p, g, 42, 7)
    b = sample_trajectory(p, g, 42, 7)
    np.testing.assert_array_equal(a.values, b.values)
    c = sample_trajectory(p, g, 43, 7)
    assert not np.array_equal(a.values, c.values)


def test_trajectory_independent_of_block():
    p = NoiseProcess("ou", 1.0, 1.0, "xz", n_qubits=2)
    g = TimeGrid(0.02, 100)
    block = sample_block(p, g, 5, range(10))
    single = sample_block(p, g, 5, [6])
    np.testing.assert_array_equal(block[6], single[0])


def test_substreams_differ_by_purpose_and_axis():
    draws = {(purpose, axis): substream(1, 0, purpose, 0, axis).random()
             for purpose in ("noise", "pulse") for axis in range(3)}
    assert len(set(draws.values())) == 6


def test_rtn_is_two_level():
    p = NoiseProcess("rtn", 0.3, 1.0)
    v = sample_block(p, TimeGrid(0.01, 1000), 0, range(4))
    assert set(np.unique(v)) <= {-0.3, 0.3}


def test_zero_noise():
    v = sample_block(NoiseProcess("zero"), TimeGrid(0.1, 5), 0, range(3))
    assert not v.any()


@pytest.mark.parametrize("kind", ["ou", "rtn"])
def test_autocorrelation_matches_exponential(kind):
    sigma, t_c, dt = 1.5, 1.0, 0.05
    p = NoiseProcess(kind, sigma, t_c)
    v = sample_block(p, TimeGrid(dt, 2000), 3, range(400))[:, 0]
    lags = np.array([0, 10, 20, 40])
    est = empirical_autocorrelation(v, lags)
    want = sigma**2 * np.exp(-lags * dt / t_c)
    assert np.all(np.abs(est.values - want) <= 4 * est.stderr + 1e-12)


def test_ou_stationary_marginal():
    p = NoiseProcess("ou", 2.0, 1.0)
    v = sample_block(p, TimeGrid(0.05, 3), 11, range(20000))[:, 0]
    for k in range(3):
        assert np.var(v[:, k]) == pytest.approx(4.0, rel=0.04)
        assert abs(np.mean(v[:, k])) < 4 * 2.0 / math.sqrt(20000)


def test_autocorrelation_needs_two_trajectories():
    with pytest.raises(NoiseError):
        empirical_autocorrelation(np.zeros((1, 10)), [0])


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.1, 10.0), st.integers(0, 2**32))
def test_rtn_amplitude_property(sigma, t_c, seed):
    p = NoiseProcess("rtn", sigma, t_c)
    v = sample_block(p, TimeGrid(t_c / 20, 50), seed, [0])
    np.testing.assert_allclose(np.abs(v), sigma)
