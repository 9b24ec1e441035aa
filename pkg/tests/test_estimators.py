"""Parameter estimators: batch, Gramian, normalized, direct and offline."""

import numpy as np
import pytest

from core.errors import RankDeficient, SingularGramian, WindowNotReady
from core.estimators import (BatchEstimator, DirectEstimator, GramianEstimator, ModelStructure,
                             NormalizedEstimator, estimate_batch, estimate_gramian, estimate_normalized,
                             estimate_offline, fixed_bank, regression_samples, solve_information)
from core.models import RegressionSample
from core.modfunc import TOTAL, make_mf_generator, make_poly_total_mf

RC = ModelStructure(2, True, True)
OUTPUT_ONLY = ModelStructure(2, include_d=False, include_u=False)


def _stream(estimator, trajectory):
    return [estimator.update(float(t), float(u), float(y))
            for t, u, y in zip(trajectory.t, trajectory.u, trajectory.y)]


def _first_valid(estimates):
    return next(e for e in estimates if e is not None)


def _assert_close(estimate, truth, rtol):
    theta = RC.theta(truth)
    np.testing.assert_allclose(estimate.theta, theta, rtol=rtol)


def test_structure_labels_and_theta(truth):
    assert RC.labels == ('d', '-a0', '-a1', 'b0', 'b1')
    assert OUTPUT_ONLY.labels == ('-a0', '-a1')
    np.testing.assert_allclose(RC.theta(truth), [4e-3, -2e-4, -0.064, 1.4e-3, 0.1])
    assert RC.mask(['-a0', 'b1']).tolist() == [False, True, False, False, True]
    with pytest.raises(ValueError):
        RC.mask(['a0'])


def test_batch_recovers_rc_coefficients(pulse_trajectory, truth):
    estimator = BatchEstimator('batch', RC, 2000.0, 2.0)
    assert len(estimator.bank) == 6
    estimates = _stream(estimator, pulse_trajectory)
    first = _first_valid(estimates)
    assert first.time == pytest.approx(2000.0)
    assert first.valid_from == pytest.approx(2000.0)
    assert all(e is None for e in estimates[:1000])
    _assert_close(estimates[-1], truth, 0.01)
    assert estimates[-1].to_coefficients().a[1] == pytest.approx(0.064, rel=0.01)
    assert not estimator.warnings


def test_offset_and_input_scaling(pulse_trajectory):
    """y + c shifts d by a0 c; u scaled by g scales b by 1/g."""
    y = pulse_trajectory.y[2000:3001]
    u = pulse_trajectory.u[2000:3001]
    bank = fixed_bank(range(2, 8), 2000.0)

    def solve(y_in, u_in):
        sample = regression_samples(bank, y_in, u_in, RC, 2.0)
        return estimate_batch(sample.W, sample.z, labels=RC.labels).theta

    base = solve(y, u)
    shifted = solve(y + 5.0, u)
    scaled = solve(y, 2.0 * u)
    a0 = -base[1]
    assert shifted[0] == pytest.approx(base[0] + a0 * 5.0, rel=1e-5)
    np.testing.assert_allclose(shifted[1:], base[1:], rtol=1e-5)
    np.testing.assert_allclose(scaled[3:], base[3:] / 2.0, rtol=1e-5)
    np.testing.assert_allclose(scaled[:3], base[:3], rtol=1e-5)


def test_estimate_batch_free_parameters():
    rng = np.random.default_rng(0)
    W = rng.standard_normal((3, 12))
    theta = np.array([0.0, 1.5, 0.0])
    estimate = estimate_batch(W, W.T @ theta, free=['b'], labels=('a', 'b', 'c'))
    np.testing.assert_allclose(estimate.theta, theta, atol=1e-12)
    assert estimate.condition >= 1.0


def test_estimate_batch_failures():
    with pytest.raises(RankDeficient):
        estimate_batch(np.ones((3, 2)), np.ones(2))
    with pytest.raises(SingularGramian):
        estimate_batch(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]), np.ones(3))
    with pytest.raises(SingularGramian):
        estimate_batch(np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]]), np.ones(3))


def test_solve_information():
    G = np.array([[4.0, 1.0], [1.0, 3.0]])
    theta, condition = solve_information(G, G @ np.array([1.0, -2.0]))
    np.testing.assert_allclose(theta, [1.0, -2.0])
    assert condition >= 1.0
    with pytest.raises(SingularGramian):
        solve_information(np.outer([1.0, 2.0], [1.0, 2.0]), np.ones(2))


def test_gramian_recovers_rc_coefficients(pulse_trajectory, truth):
    estimator = GramianEstimator('gramian', RC, 2000.0, 2000.0, 2.0, bank=fixed_bank(range(2, 8), 2000.0))
    estimates = _stream(estimator, pulse_trajectory)
    first = _first_valid(estimates)
    assert first.time == pytest.approx(4000.0)
    _assert_close(estimates[-1], truth, 5e-3)


def test_gramian_single_kernel_with_filter_weighting(pulse_trajectory, truth):
    kernel = make_mf_generator({'family': 'exponential', 'rates': [1e-3, 5e-3]}, 2000.0)
    estimator = GramianEstimator('gramian', RC, 2000.0, 2000.0, 2.0, kernel=kernel)
    assert len(estimator.bank) == 1
    estimates = _stream(estimator, pulse_trajectory)
    assert _first_valid(estimates).time == pytest.approx(4000.0)
    _assert_close(estimates[-1], truth, 0.02)


def test_direct_recovers_rc_coefficients(pulse_trajectory, truth):
    estimator = DirectEstimator('direct', RC, 2000.0, 2000.0, 2.0)
    estimates = _stream(estimator, pulse_trajectory)
    first = _first_valid(estimates)
    assert first.time == pytest.approx(4000.0)
    assert first.valid_from == pytest.approx(4000.0)
    _assert_close(estimates[-1], truth, 5e-3)


def test_direct_matches_gramian_regression(pulse_trajectory):
    """With matching kernels both estimators see the same regressors."""
    direct = DirectEstimator('direct', RC, 2000.0, 2000.0, 2.0)
    gramian = GramianEstimator('gramian', RC, 2000.0, 2000.0, 2.0)
    last_direct = _stream(direct, pulse_trajectory)[-1]
    last_gramian = _stream(gramian, pulse_trajectory)[-1]
    np.testing.assert_allclose(last_direct.theta, last_gramian.theta, rtol=0.02)


def test_normalized_sinusoid():
    Ts = 1e-3
    t = Ts * np.arange(4001)
    y = 15.0 * np.sin(2.0 * t)
    estimator = NormalizedEstimator('normalized', OUTPUT_ONLY, 2.0, 1.0, Ts, stride=10)
    estimates = [estimator.update(float(tk), 0.0, float(yk)) for tk, yk in zip(t, y)]
    first = _first_valid(estimates)
    assert first.time == pytest.approx(3.0)
    assert first.valid_from == pytest.approx(3.0)
    final = estimates[-1]
    assert -final.theta[0] == pytest.approx(4.0, rel=0.01)
    assert abs(final.theta[1]) < 0.05
    assert estimator.bank.W_residual < 1e-6


def test_normalized_recovers_rc_coefficients(pulse_trajectory, truth):
    estimator = NormalizedEstimator('normalized', RC, 2000.0, 2000.0, 2.0, stride=5)
    estimates = _stream(estimator, pulse_trajectory)
    first = _first_valid(estimates)
    assert first.time == pytest.approx(4000.0)
    _assert_close(first, truth, 0.01)
    _assert_close(estimates[-1], truth, 0.01)


def test_normalized_riemann_rows_are_biased(pulse_trajectory, truth):
    """Raw samples in every row shift each antiderivative level by half a cell."""
    averaged = NormalizedEstimator('normalized', RC, 2000.0, 2000.0, 2.0, stride=50)
    literal = NormalizedEstimator('normalized', RC, 2000.0, 2000.0, 2.0, stride=50,
                                  hold_y='riemann', hold_u='riemann')
    theta = RC.theta(truth)
    error_averaged = np.abs(_stream(averaged, pulse_trajectory)[-1].theta / theta - 1.0)
    error_literal = np.abs(_stream(literal, pulse_trajectory)[-1].theta / theta - 1.0)
    assert np.max(error_literal) > 0.02
    assert np.max(error_literal) > 5.0 * np.max(error_averaged)


def test_normalized_holds_on_lost_excitation():
    Ts = 0.01
    t = Ts * np.arange(401)
    y = np.where(t <= 1.5, np.sin(3.0 * t), 0.0)
    estimator = NormalizedEstimator('normalized', OUTPUT_ONLY, 1.0, 0.5, Ts)
    estimates = [estimator.update(float(tk), 0.0, float(yk)) for tk, yk in zip(t, y)]
    assert estimator.warnings['RankDeficient'] > 0
    assert estimates[-1] is not None
    assert estimates[-1].stale
    assert estimator.instantaneous is not None


def test_stale_estimate_after_failure():
    Ts = 0.01
    t = Ts * np.arange(401)
    y = np.where(t <= 1.5, np.sin(3.0 * t), 0.0)
    estimator = BatchEstimator('batch', OUTPUT_ONLY, 1.0, Ts, bank=fixed_bank([2, 3, 4], 1.0))
    estimates = [estimator.update(float(tk), 0.0, float(yk)) for tk, yk in zip(t, y)]
    valid = [e for e in estimates if e is not None and not e.stale]
    assert valid
    assert estimates[-1].stale
    np.testing.assert_array_equal(estimates[-1].theta, valid[-1].theta)
    assert estimates[-1].time == pytest.approx(4.0)
    assert estimator.warnings['SingularGramian'] > 0


def test_window_not_ready_is_silent():
    estimator = BatchEstimator('batch', RC, 10.0, 1.0)
    assert estimator.update(0.0, 0.0, 20.0) is None
    assert not estimator.warnings


def test_offline_recovers_rc_coefficients(pulse_trajectory, truth):
    estimate = estimate_offline(pulse_trajectory, fixed_bank(range(2, 8), 2000.0), RC, 2000.0)
    assert estimate.method == 'offline'
    assert estimate.valid_from == pytest.approx(2000.0)
    _assert_close(estimate, truth, 0.01)


def test_offline_needs_a_full_window(pulse_trajectory):
    with pytest.raises(WindowNotReady):
        estimate_offline(pulse_trajectory, fixed_bank([2], 8000.0), RC, 8000.0)


def test_estimate_normalized_constant_samples():
    samples = [RegressionSample(z=[1.0, -2.0], W=np.eye(2), time=0.1 * k) for k in range(11)]
    estimate = estimate_normalized(samples, 1.0, 0.1, labels=('-a0', '-a1'))
    np.testing.assert_allclose(estimate.theta, [1.0, -2.0])
    with pytest.raises(WindowNotReady):
        estimate_normalized(samples[:5], 1.0, 0.1)


@pytest.mark.parametrize('kernel', [None, {'family': 'exponential', 'rates': [0.5, 2.0]}])
def test_estimate_gramian_consistent_samples(kernel):
    rng = np.random.default_rng(4)
    theta = np.array([0.3, -1.2, 2.0])
    samples = []
    for k in range(21):
        W = rng.standard_normal((3, 2))
        samples.append(RegressionSample(z=W.T @ theta, W=W, time=0.1 * k))
    generator = make_mf_generator(kernel, 2.0) if kernel else None
    estimate = estimate_gramian(samples, 2.0, 0.1, kernel=generator)
    np.testing.assert_allclose(estimate.theta, theta, rtol=1e-9)
    assert estimate.time == pytest.approx(2.0)


def test_fixed_bank_mirrors_exponents():
    bank = fixed_bank(range(2, 8), 10.0)
    assert [mf.order for mf in bank] == [2, 3, 4, 4, 3, 2]
    assert all(mf.kind == TOTAL for mf in bank)
    s = np.linspace(0.0, 10.0, 21)
    np.testing.assert_allclose(np.abs(bank[0](s)), np.abs(bank[-1](10.0 - s)), atol=1e-12)


def test_fixed_bank_identifies_a_symmetric_window():
    """y = cos(w (t - T/2)) is even about the window centre, so L^1[y] vanishes for even kernels."""
    T, Ts = 10.0, 0.01
    w = 3.0 * np.pi / T
    t = Ts * np.arange(1001)
    y = np.cos(w * (t - T / 2))
    even = [make_poly_total_mf(k, T).normalized() for k in range(2, 8)]
    W_even = regression_samples(even, y, None, OUTPUT_ONLY, Ts).W
    assert np.max(np.abs(W_even[1])) < 1e-9 * np.max(np.abs(W_even[0]))

    sample = regression_samples(fixed_bank(range(2, 8), T), y, None, OUTPUT_ONLY, Ts)
    assert np.max(np.abs(sample.W[1])) > 1e-2 * np.max(np.abs(sample.W[0]))
    estimate = estimate_batch(sample.W, sample.z, labels=OUTPUT_ONLY.labels)
    assert -estimate.theta[0] == pytest.approx(w ** 2, rel=1e-4)
    assert abs(estimate.theta[1]) < 1e-4 * w


def test_batch_first_window_is_not_singular(pulse_trajectory):
    estimator = BatchEstimator('batch', RC, 2000.0, 2.0)
    estimates = _stream(estimator, pulse_trajectory)
    assert estimates[1000] is not None
    assert not estimates[1000].stale
    assert estimates[1000].condition < 1e12
