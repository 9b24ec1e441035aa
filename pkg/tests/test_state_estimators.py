"""Finite-time state estimation with left modulating functions, and the Luenberger baseline."""

import numpy as np
import pytest

from core.errors import SingularWl, UnstableObserver
from core.lti import ContinuousLTISystem, equilibrium_state, io_form, structural_matrices
from core.plant import simulate_input
from core.state_estimators import (LuenbergerObserver, MFStateEstimator, boundary_vector, estimate_state_mf,
                                   factor_left_matrix, left_bank, left_matrix, luenberger_step, observer_gain)
from core.window import SignalWindow

T = 50.0
Ts = 0.5


def _stream(estimator, trajectory):
    return [estimator.update(float(t), float(u), float(y))
            for t, u, y in zip(trajectory.t, trajectory.u, trajectory.y)]


def _errors(estimates, trajectory):
    return np.array([np.max(np.abs(e.x_hat - x)) for e, x in zip(estimates, trajectory.x) if e is not None])


def test_left_matrix_of_rc(truth):
    bank = left_bank(2, 2, T)
    # v = [a1 phi(T) - phi'(T), phi(T)] with phi = (t / T)^(j + 1)
    np.testing.assert_allclose(boundary_vector(truth, bank[0]), [0.064 - 2.0 / T, 1.0])
    np.testing.assert_allclose(left_matrix(truth, bank), [[0.024, 0.004], [1.0, 1.0]], atol=1e-12)
    with pytest.raises(ValueError):
        left_bank(2, 1, T)


def test_singular_left_matrix():
    with pytest.raises(SingularWl):
        factor_left_matrix(np.ones((2, 2)))


def test_left_mode_tracks_true_state(prbs_trajectory, truth, rc):
    estimator = MFStateEstimator('mf', T, Ts, coeffs=truth, system=rc)
    estimates = _stream(estimator, prbs_trajectory)
    assert all(e is None for e in estimates[:100])
    assert estimates[100].time == pytest.approx(T)
    assert np.max(_errors(estimates, prbs_trajectory)) < 0.05
    assert not estimator.warnings


def test_right_reversed_mode_agrees_with_left(prbs_trajectory, truth, rc):
    left = _stream(MFStateEstimator('left', T, Ts, coeffs=truth, system=rc), prbs_trajectory)
    right = _stream(MFStateEstimator('right', T, Ts, mode='right_reversed', coeffs=truth, system=rc),
                    prbs_trajectory)
    pairs = [(a, b) for a, b in zip(left, right) if a is not None and b is not None]
    assert len(pairs) == len(prbs_trajectory) - 100
    for a, b in pairs:
        np.testing.assert_allclose(a.x_hat, b.x_hat, atol=1e-6)


def test_extra_left_kernels(prbs_trajectory, truth, rc):
    estimator = MFStateEstimator('mf', T, Ts, m_l=4, coeffs=truth, system=rc)
    assert len(estimator.bank) == 4
    assert np.max(_errors(_stream(estimator, prbs_trajectory), prbs_trajectory)) < 0.05


def test_one_shot_matches_streaming(prbs_trajectory, truth, rc):
    window = SignalWindow(T, Ts)
    for k in range(201):
        window.push(prbs_trajectory.t[k], prbs_trajectory.u[k], prbs_trajectory.y[k])
    bank = left_bank(2, 2, T)
    estimate = estimate_state_mf(window, truth, structural_matrices(rc), bank)
    streamed = _stream(MFStateEstimator('mf', T, Ts, coeffs=truth, system=rc), prbs_trajectory)[200]
    assert estimate.time == pytest.approx(100.0)
    assert estimate.method == 'state-mf/left'
    np.testing.assert_allclose(estimate.x_hat, streamed.x_hat, atol=1e-10)
    reversed_estimate = estimate_state_mf(window, truth, None, bank, mode='right_reversed')
    np.testing.assert_allclose(reversed_estimate.x_hat, estimate.x_hat, atol=1e-6)


def test_zero_signals_give_zero_state():
    system = ContinuousLTISystem(A=[[-0.5, 1.0], [-0.2, 0.0]], B=[1.0, 0.3], C=[1.0, 0.0])
    estimator = MFStateEstimator('mf', 5.0, 0.1, coeffs=io_form(system), system=system)
    estimates = [estimator.update(0.1 * k, 0.0, 0.0) for k in range(80)]
    np.testing.assert_allclose(estimates[-1].x_hat, 0.0, atol=1e-12)


def test_no_estimate_without_coefficients(truth):
    estimator = MFStateEstimator('mf', 5.0, 0.5)
    assert all(estimator.update(0.5 * k, 1.0, 20.0) is None for k in range(20))
    with pytest.raises(ValueError):
        estimator.set_coefficients(io_form(ContinuousLTISystem(A=[[-1.0]], B=[1.0], C=[1.0])))
    estimator.set_coefficients(truth)
    assert estimator.coeffs is truth
    with pytest.raises(ValueError):
        MFStateEstimator('mf', 5.0, 0.5, mode='right')


def test_observer_gain_places_poles(rc):
    L = observer_gain(rc, poles=[-0.05, -0.07])
    poles = np.sort(np.linalg.eigvals(rc.A - L @ rc.C).real)
    np.testing.assert_allclose(poles, [-0.07, -0.05], rtol=1e-6)
    np.testing.assert_allclose(L[:, 0], [0.056, 0.05032], rtol=1e-6)
    default = np.sort(np.linalg.eigvals(rc.A - observer_gain(rc) @ rc.C).real)
    np.testing.assert_allclose(default, np.sort(2.5 * np.linalg.eigvals(rc.A).real), rtol=1e-6)


def test_unstable_observer_poles(rc):
    with pytest.raises(UnstableObserver):
        observer_gain(rc, poles=[0.1, -0.2])
    with pytest.raises(ValueError):
        observer_gain(rc, poles=[-0.1])


def test_luenberger_without_injection_follows_plant(prbs_trajectory, rc):
    observer = LuenbergerObserver('obs', Ts, system=rc, L=np.zeros(2), x0=prbs_trajectory.x[0])
    estimates = _stream(observer, prbs_trajectory)
    assert np.max(_errors(estimates, prbs_trajectory)) < 1e-4


def test_luenberger_converges(prbs_trajectory, rc):
    observer = LuenbergerObserver('obs', Ts, system=rc, poles=[-0.05, -0.07])
    estimates = _stream(observer, prbs_trajectory)
    np.testing.assert_array_equal(estimates[0].x_hat, [0.0, 0.0])
    errors = _errors(estimates, prbs_trajectory)
    assert errors[0] > 20.0
    assert errors[-1] < 0.5


def test_luenberger_step_matches_observer(rc):
    L = observer_gain(rc, poles=[-0.05, -0.07])
    observer = LuenbergerObserver('obs', Ts, system=rc, L=L, x0=[21.0, 20.0])
    observer.update(0.0, 1.5, 22.0)
    expected = luenberger_step(rc, L, 1.5, 22.0, np.array([21.0, 20.0]), Ts)
    np.testing.assert_allclose(observer.x_hat, expected, rtol=1e-12)


def test_luenberger_without_system():
    observer = LuenbergerObserver('obs', Ts)
    assert observer.update(0.0, 0.0, 20.0) is None


def test_luenberger_coefficient_update(truth):
    observer = LuenbergerObserver('obs', Ts, poles=[-0.05, -0.07])
    observer.set_coefficients(truth)
    assert observer.system is not None
    observer.reset([1.0, 2.0])
    np.testing.assert_array_equal(observer.update(0.0, 0.0, 20.0).x_hat, [1.0, 2.0])


def _random_stable_system(rng, n):
    while True:
        M = rng.standard_normal((n, n))
        A = M - (np.max(np.linalg.eigvals(M).real) + 0.3) * np.eye(n)
        system = ContinuousLTISystem(A=A, B=rng.standard_normal(n), C=rng.standard_normal(n))
        if np.linalg.cond(structural_matrices(system).O) < 1e3:
            return system


@pytest.mark.parametrize('n', [1, 2, 3, 4])
def test_left_mode_is_exact_on_random_systems(n):
    rng = np.random.default_rng(30 + n)
    system = _random_stable_system(rng, n)
    t = 0.01 * np.arange(601)
    trajectory = simulate_input(system, t, np.sin(1.3 * t), x0=rng.standard_normal(n))
    estimator = MFStateEstimator('mf', 2.0, 0.01, n=n, coeffs=io_form(system), system=system)
    estimates = _stream(estimator, trajectory)
    assert estimates[200].time == pytest.approx(2.0)
    assert np.max(_errors(estimates, trajectory)) < 1e-2 * np.max(np.abs(trajectory.x))


def test_luenberger_error_decays_at_slowest_pole(rc):
    """At equilibrium the held output is exact, so the error follows exp((A - L C) t) alone."""
    x_eq = equilibrium_state(rc, 1.5)
    y_eq = rc.output(x_eq)
    observer = LuenbergerObserver('obs', Ts, system=rc, poles=[-0.05, -0.07])
    estimates = [observer.update(Ts * k, 1.5, y_eq) for k in range(801)]
    errors = np.array([np.linalg.norm(e.x_hat - x_eq) for e in estimates])
    rate = np.log(errors[800] / errors[600]) / (Ts * 200)
    assert rate == pytest.approx(-0.05, rel=0.02)
    assert np.all(np.diff(errors[600:]) < 0)
