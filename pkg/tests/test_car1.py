import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavefanova.car1 import (RHO_CLAMP, Signal, alpha_from_rho, derive_params,
                             estimate_rho_lag1, estimate_rho_residuals, fisher_information,
                             rho_from_alpha, simulate_car1, simulate_model, stream)
from wavefanova.exceptions import DegenerateSeries, OutOfModelRange


def test_alpha_examples():
    assert alpha_from_rho(0.99, 512) == pytest.approx(5.14, abs=0.01)
    assert alpha_from_rho(0.9999, 8192) == pytest.approx(0.819, abs=0.001)
    assert alpha_from_rho(1 - 1e-15, 1024) < 1e-9
    assert rho_from_alpha(alpha_from_rho(0.7, 300), 300) == pytest.approx(0.7, rel=1e-14)


@pytest.mark.parametrize("rho", [0.0, 1.0, -0.5, 1.2])
def test_alpha_out_of_range(rho):
    with pytest.raises(OutOfModelRange):
        alpha_from_rho(rho, 512)


def test_derived_parameters():
    # hand arithmetic: alpha = -512 ln .99, sigma_p2 = 1/(2 alpha), sigma_u2 = sigma_p2 (1 - .99^2)
    a = -512 * np.log(0.99)
    p = derive_params(0.99, 1.0, 512)
    assert p.alpha == pytest.approx(5.1457, abs=1e-4) and p.alpha == pytest.approx(a, rel=1e-15)
    assert p.sigma_p2 == pytest.approx(0.09717, abs=1e-5)
    assert p.sigma_u2 == pytest.approx(0.001934, abs=1e-6)
    q = derive_params(0.9999, 1.0, 8192)
    assert q.alpha == pytest.approx(0.8193, abs=1e-4)
    assert q.sigma_p2 == pytest.approx(0.6103, abs=1e-4)
    assert q.sigma_u2 / q.sigma_p2 == pytest.approx(1 - 0.9999 ** 2, rel=1e-12)
    with pytest.raises(OutOfModelRange):
        derive_params(0.5, 0.0, 64)


def _params_with_sigma_p2(rho, sigma_p2, n=1024):
    alpha = alpha_from_rho(rho, n)
    return derive_params(rho, 2 * alpha * sigma_p2, n)


def test_simulation_is_deterministic():
    p = derive_params(0.9, 1.0, 256)
    a, b = simulate_car1(p, 256, 7), simulate_car1(p, 256, 7)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, simulate_car1(p, 256, 8))
    g1, g2 = stream(3, 1, 2), stream(3, 1, 2)
    assert simulate_car1(p, 64, g1).tobytes() == simulate_car1(p, 64, g2).tobytes()


def test_simulation_recursion_matches_loop():
    p = derive_params(0.8, 1.0, 64)
    draws = stream(5).standard_normal(64)
    x = np.empty(64)
    x[0] = draws[0] * np.sqrt(p.sigma_p2)
    for t in range(1, 64):
        x[t] = p.rho * x[t - 1] + draws[t] * np.sqrt(p.sigma_u2)
    np.testing.assert_allclose(simulate_car1(p, 64, stream(5)), x, rtol=1e-12)


def test_simulation_moments():
    p = _params_with_sigma_p2(0.9, 1.0)
    x = simulate_car1(p, 2 ** 16, 11)
    r1 = np.corrcoef(x[1:], x[:-1])[0, 1]
    assert 0.88 <= r1 <= 0.92
    assert np.var(x) == pytest.approx(1.0, rel=0.05)
    p2 = _params_with_sigma_p2(0.3, 2.5)
    assert np.var(simulate_car1(p2, 2 ** 16, 12)) == pytest.approx(2.5, rel=0.05)


def test_simulate_model():
    f = np.sin(np.linspace(0, 3, 128))
    p = derive_params(0.9, 1e-300, 128)
    np.testing.assert_allclose(simulate_model(f, p, 1), f, atol=1e-100)
    p = derive_params(0.9, 1.0, 128)
    np.testing.assert_array_equal(simulate_model(np.zeros(128), p, 4), simulate_car1(p, 128, 4))
    reps = np.array([simulate_model(f, p, stream(9, r)) for r in range(1000)])
    assert np.all(np.abs(reps.mean(axis=0) - f) < 4 * p.sigma_p / np.sqrt(1000))


def test_signal_container():
    s = Signal([1.0, 2.0, 3.0], origin_time=5.0, dt=0.5)
    assert len(s) == 3 and np.asarray(s).sum() == 6.0
    with pytest.raises(ValueError):
        Signal([1.0, np.nan])
    with pytest.raises(ValueError):
        Signal([1.0], dt=0)


def test_lag1_estimator():
    assert estimate_rho_lag1(np.full(50, 2.0)) == pytest.approx(1.0)
    alt = np.where(np.arange(50) % 2 == 0, 1.5, -1.5)
    assert estimate_rho_lag1(alt) == pytest.approx(-1.0)
    x = simulate_car1(derive_params(0.9, 1.0, 2 ** 15), 2 ** 15, 3)
    assert abs(estimate_rho_lag1(x) - 0.9) < 0.02
    with pytest.raises(DegenerateSeries):
        estimate_rho_lag1(np.zeros(10))


def test_residual_estimator():
    e = stream(1).standard_normal(2 ** 15)
    assert abs(estimate_rho_residuals(e)) < 0.02
    x = simulate_car1(derive_params(0.99, 1.0, 2 ** 15), 2 ** 15, 2)
    assert abs(estimate_rho_residuals(x) - 0.99) < 0.005
    assert estimate_rho_residuals(np.zeros(40)) == 0.0
    # clamp: a constant series gives exactly 1 before clamping
    assert estimate_rho_residuals(np.ones(40)) == RHO_CLAMP


def test_residual_estimator_batched():
    E = stream(2).standard_normal((4, 256))
    E[2] = 0.0
    batch = estimate_rho_residuals(E)
    assert batch.shape == (4,)
    for i in range(4):
        assert batch[i] == pytest.approx(estimate_rho_residuals(E[i]), abs=1e-15)


def test_fisher_examples():
    I = fisher_information(0.0, 1.0, 10)
    assert I[0, 0] == 10 and I[1, 1] == 9 and I[1, 2] == 1 and I[2, 2] == 5
    J = fisher_information(0.37, 2.1, 77)
    assert J[0, 1] == J[0, 2] == J[1, 0] == J[2, 0] == 0.0
    np.testing.assert_array_equal(J, J.T)
    assert np.all(np.linalg.eigvalsh(fisher_information(0.5, 2.0, 100)) > 0)
    with pytest.raises(OutOfModelRange):
        fisher_information(1.0, 1.0, 10)


@settings(max_examples=1000, deadline=None)
@given(st.floats(-0.999, 0.999), st.floats(1e-3, 1e3), st.integers(3, 10 ** 5))
def test_fisher_positive_definite(rho, sigma_u2, n):
    I = fisher_information(rho, sigma_u2, n)
    assert I[0, 0] > 0
    # Sylvester criterion on the (rho, sigma_u2) block
    i22, i23, i33 = I[1, 1], I[1, 2], I[2, 2]
    assert i22 > 0
    assert i22 * i33 - i23 ** 2 > 0
