"""Kernels solved so that the regression matrix of the current window is the identity."""

import numpy as np
import pytest

from core.alpha_solver import boundary_rows, regression_rows, solve_alpha_bank, solve_alpha_bank_samples
from core.errors import RankDeficient
from core.estimators import ModelStructure, regression_samples
from core.modfunc import TOTAL
from core.window import SignalWindow

Ts = 2.0
N = 1000


@pytest.fixture(scope='module')
def window_signals(pulse_trajectory):
    return pulse_trajectory.y[:N + 1], pulse_trajectory.u[:N + 1]


def test_identity_regressor(window_signals):
    y, u = window_signals
    bank = solve_alpha_bank_samples(y, u, 2, True, Ts)
    assert bank.rank == 7
    assert len(bank.kernels) == 5
    assert bank.W_residual < 1e-6
    assert bank.gamma_residual < 1e-8


def test_regression_through_kernels_is_identity(window_signals):
    y, u = window_signals
    bank = solve_alpha_bank_samples(y, u, 2, True, Ts)
    structure = ModelStructure(2, True, True)
    sample = regression_samples(bank, y, u, structure, Ts)
    np.testing.assert_allclose(sample.W, np.eye(5), atol=1e-6)
    np.testing.assert_allclose(sample.z, bank.z(y), rtol=1e-10, atol=1e-14)


def test_kernels_are_total(window_signals):
    y, u = window_signals
    bank = solve_alpha_bank_samples(y, u, 2, True, Ts)
    for kernel in bank.kernels:
        assert kernel.kind == TOTAL
        assert np.all(np.abs(kernel.boundary()) < 1e-8)


def test_window_entry_point(window_signals):
    y, u = window_signals
    window = SignalWindow(N * Ts, Ts)
    for k in range(N + 1):
        window.push(k * Ts, u[k], y[k])
    bank = solve_alpha_bank(window, 2, True, Ts)
    np.testing.assert_allclose(bank.alpha, solve_alpha_bank_samples(y, u, 2, True, Ts).alpha)


def test_output_only_structure():
    t = 1e-3 * np.arange(2001)
    y = 15.0 * np.sin(2.0 * t)
    bank = solve_alpha_bank_samples(y, None, 2, False, 1e-3)
    assert bank.alpha.shape == (2001, 2)
    assert bank.W_residual < 1e-6
    # L^2[y] = -4 L^0[y] for y = A sin(2 t)
    z = bank.z(y)
    assert z[0] == pytest.approx(-4.0, rel=1e-2)
    assert abs(z[1]) < 0.05


def test_zero_window_is_rank_deficient():
    with pytest.raises(RankDeficient) as excinfo:
        solve_alpha_bank_samples(np.zeros(N + 1), np.zeros(N + 1), 2, True, Ts)
    assert excinfo.value.rank < 7


def test_too_few_samples():
    with pytest.raises(ValueError):
        solve_alpha_bank_samples(np.ones(5), np.ones(5), 2, True, Ts)


def test_row_shapes():
    y = np.linspace(1.0, 2.0, 11)
    K = regression_rows(y, y ** 2, 2, True, 0.1)
    B = boundary_rows(11, 2, 0.1)
    assert K.shape == (5, 11)
    assert B.shape == (2, 11)
    # alpha^(-1)(T) is the plain Riemann sum of alpha
    np.testing.assert_allclose(B[1], 0.1 * np.ones(11))


def test_spline_averaged_rows_remove_the_half_cell_shift():
    """y = exp(-t/2) obeys y' = -0.5 y; Riemann rows are off by about lambda Ts / 2."""
    Ts = 0.05
    y = np.exp(-0.5 * Ts * np.arange(41))
    averaged = solve_alpha_bank_samples(y, None, 1, False, Ts).z(y)[0]
    literal = solve_alpha_bank_samples(y, None, 1, False, Ts, hold_y='riemann').z(y)[0]
    assert averaged == pytest.approx(-0.5, rel=1e-3)
    assert abs(literal / -0.5 - 1.0) > 5e-3


def test_rc_window_is_exact_to_second_order(window_signals, truth):
    y, u = window_signals
    structure = ModelStructure(2, True, True)
    theta = solve_alpha_bank_samples(y, u, 2, True, Ts).z(y)
    np.testing.assert_allclose(theta, structure.theta(truth), rtol=1e-2)
