"""
Finite-time state estimation with left modulating functions, and the
Luenberger observer used as a baseline.

Modulating the input-output equation with a left kernel phi leaves the
boundary terms at the end of the window,

    sum_m v[m] y^(m)(t) = -L^n[y] - a . L[y] + b . L[u] + d L^0[1] = z_l,

so m_l >= n kernels give W_l^T xbar = z_l for the canonical state
xbar = O x.
"""

import logging
from collections import Counter
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, signal

from .errors import EstimationError, SingularWl, UnstableObserver, WindowNotReady
from .lti import ContinuousLTISystem, IOCoefficients, StructuralMatrices, original_state, structural_matrices
from .mfilter import MFilterState, discretize
from .models import StateEstimate
from .modfunc import PolynomialMF, make_mf_generator, make_poly_left_mf
from .plant import realize
from .window import SignalWindow

logger = logging.getLogger(__name__)

WL_CONDITION_LIMIT = 1e12
STATE_MODES = ('left', 'right_reversed')


def left_bank(n: int, m_l: int, T: float) -> List[PolynomialMF]:
    """(t / T)^(n + j - 1), j = 1..m_l."""
    if m_l < n:
        raise ValueError(f"at least n={n} left kernels are needed, got {m_l}")
    return [make_poly_left_mf(j, n, T) for j in range(1, m_l + 1)]


def boundary_vector(coeffs: IOCoefficients, mf: PolynomialMF) -> np.ndarray:
    """v[m] = sum_{i>m} a_i (-1)^(i-1-m) phi^(i-1-m)(T) with a_n = 1."""
    n = coeffs.order
    a = np.append(coeffs.a, 1.0)
    v = np.zeros(n)
    for m in range(n):
        for i in range(m + 1, n + 1):
            k = i - 1 - m
            v[m] += a[i] * (-1.0) ** k * float(mf.derivative(k, mf.T))
    return v


def left_matrix(coeffs: IOCoefficients, bank: Sequence[PolynomialMF]) -> np.ndarray:
    """W_l with one column per kernel."""
    return np.column_stack([boundary_vector(coeffs, mf) for mf in bank])


def factor_left_matrix(W_l: np.ndarray) -> np.ndarray:
    """Pseudo-inverse of W_l^T; raises SingularWl above the condition limit."""
    s = linalg.svdvals(W_l)
    condition = float(s[0] / s[-1]) if s[-1] > 0 else float('inf')
    if condition > WL_CONDITION_LIMIT:
        raise SingularWl(condition)
    return linalg.pinv(W_l.T)


def _z_left(coeffs: IOCoefficients, Ly: np.ndarray, Lu: np.ndarray, L1: float) -> float:
    """Ly = L^0..L^n of y, Lu = L^0..L^(n-1) of u."""
    n = coeffs.order
    return float(-Ly[n] - coeffs.a @ Ly[:n] + coeffs.b @ Lu[:n] + coeffs.d * L1)


def _window_integrals(mf: PolynomialMF, y: np.ndarray, u: np.ndarray, n: int, Ts: float,
                      hold_y: str, hold_u: str) -> Tuple[np.ndarray, np.ndarray, float]:
    N = y.size - 1
    Ly = np.array([mf.weights(i, N, Ts, hold_y) @ y for i in range(n + 1)])
    Lu = np.array([mf.weights(i, N, Ts, hold_u) @ u for i in range(n)])
    return Ly, Lu, float(np.sum(mf.weights(0, N, Ts, 'zero')))


class _ReversedFilters:
    """Continuous-time filters driven by one reversed left kernel."""

    def __init__(self, mf: PolynomialMF, n: int, Ts: float, hold_y: str, hold_u: str):
        generator = make_mf_generator(mf, mf.T)
        self.n = n
        self.y = MFilterState.from_generator(generator, Ts, hold_y)
        self.u = MFilterState.from_generator(generator, Ts, hold_u)
        self.constant = generator.integral()

    @property
    def ready(self) -> bool:
        return self.y.ready

    def step(self, u: float, y: float) -> None:
        self.y.step(y)
        self.u.step(u)

    def integrals(self) -> Tuple[np.ndarray, np.ndarray, float]:
        return self.y.read_all(self.n + 1), self.u.read_all(self.n), self.constant


def _check_order(coeffs: IOCoefficients, sm: StructuralMatrices, bank: Sequence[PolynomialMF]) -> None:
    if coeffs.order != sm.order:
        raise ValueError(f"coefficients of order {coeffs.order} do not match a state of order {sm.order}")
    if len(bank) < coeffs.order:
        raise ValueError(f"at least {coeffs.order} left kernels are needed, got {len(bank)}")


def estimate_state_mf(window: SignalWindow, coeffs: IOCoefficients, sm: Optional[StructuralMatrices],
                      bank: Sequence[PolynomialMF], mode: str = 'left', hold_y: str = 'linear',
                      hold_u: str = 'zero') -> StateEstimate:
    """State at the end of a full window from the modulated input-output equation."""
    if mode not in STATE_MODES:
        raise ValueError(f"unknown mode '{mode}', expected one of {', '.join(STATE_MODES)}")
    sm = sm or structural_matrices(realize(coeffs))
    _check_order(coeffs, sm, bank)
    y = window.channel('y')
    u = window.channel('u')
    n = coeffs.order
    if mode == 'left':
        integrals = [_window_integrals(mf, y, u, n, window.Ts, hold_y, hold_u) for mf in bank]
    else:
        integrals = []
        for mf in bank:
            filters = _ReversedFilters(mf, n, window.Ts, hold_y, hold_u)
            for uk, yk in zip(u, y):
                filters.step(uk, yk)
            integrals.append(filters.integrals())
    z_l = np.array([_z_left(coeffs, *item) for item in integrals])
    x_bar = factor_left_matrix(left_matrix(coeffs, bank)) @ z_l
    return StateEstimate(x_hat=original_state(sm, x_bar), time=window.latest, method=f'state-mf/{mode}')


class MFStateEstimator:
    """Streaming finite-time observer; W_l is factored once per coefficient update."""

    method = 'state-mf'

    def __init__(self, name: str, T: float, Ts: float, n: int = 2, m_l: Optional[int] = None,
                 mode: str = 'left', hold_y: str = 'linear', hold_u: str = 'zero',
                 coeffs: Optional[IOCoefficients] = None, system: Optional[ContinuousLTISystem] = None):
        if mode not in STATE_MODES:
            raise ValueError(f"unknown mode '{mode}', expected one of {', '.join(STATE_MODES)}")
        self.name = name
        self.T = float(T)
        self.Ts = float(Ts)
        self.n = n
        self.mode = mode
        self.hold_y = hold_y
        self.hold_u = hold_u
        self.bank = left_bank(n, m_l or n, T)
        self.warnings: Counter = Counter()
        self.window = SignalWindow(T, Ts)
        self._filters = [_ReversedFilters(mf, n, Ts, hold_y, hold_u) for mf in self.bank] \
            if mode == 'right_reversed' else []
        self.coeffs: Optional[IOCoefficients] = None
        self._sm: Optional[StructuralMatrices] = None
        self._solve: Optional[np.ndarray] = None
        self._last: Optional[StateEstimate] = None
        if coeffs is not None:
            self.set_coefficients(coeffs, system)

    def set_coefficients(self, coeffs: IOCoefficients, system: Optional[ContinuousLTISystem] = None) -> None:
        """Refactor W_l and O for new coefficients; the previous ones are kept on failure."""
        if coeffs.order != self.n:
            raise ValueError(f"expected coefficients of order {self.n}, got {coeffs.order}")
        try:
            sm = structural_matrices(system if system is not None else realize(coeffs))
            solve = factor_left_matrix(left_matrix(coeffs, self.bank))
        except EstimationError as exc:
            self.warnings[type(exc).__name__] += 1
            logger.debug("%s: coefficient update rejected: %s", self.name, exc)
            return
        self.coeffs, self._sm, self._solve = coeffs, sm, solve

    def _integrals(self):
        if self.mode == 'left':
            y = self.window.channel('y')
            u = self.window.channel('u')
            return [_window_integrals(mf, y, u, self.n, self.Ts, self.hold_y, self.hold_u) for mf in self.bank]
        if not self._filters[0].ready:
            raise WindowNotReady("modulating filters not filled")
        return [f.integrals() for f in self._filters]

    def update(self, t: float, u: float, y: float) -> Optional[StateEstimate]:
        self.window.push(t, u, y)
        for filters in self._filters:
            filters.step(u, y)
        if self._solve is None:
            return None
        try:
            z_l = np.array([_z_left(self.coeffs, *item) for item in self._integrals()])
        except WindowNotReady:
            return None
        x_hat = original_state(self._sm, self._solve @ z_l)
        if not np.all(np.isfinite(x_hat)):
            self.warnings['NonFinite'] += 1
            return None if self._last is None else replace(self._last, time=t, stale=True)
        self._last = StateEstimate(x_hat=x_hat, time=t, method=self.method)
        return self._last


def observer_gain(sys: ContinuousLTISystem, poles: Optional[Sequence[float]] = None,
                  pole_factor: float = 2.5) -> np.ndarray:
    """Output injection gain placing the eigenvalues of A - L C; by default at pole_factor times those of A."""
    if poles is None:
        poles = pole_factor * np.linalg.eigvals(sys.A)
    poles = np.asarray(poles)
    if poles.size != sys.order:
        raise ValueError(f"expected {sys.order} observer poles, got {poles.size}")
    if np.any(np.real(poles) >= 0):
        raise UnstableObserver(poles)
    return signal.place_poles(sys.A.T, sys.C.T, poles).gain_matrix.T


def _observer_matrices(sys: ContinuousLTISystem, L: np.ndarray, Ts: float) -> Tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization of x' = (A - L C) x + [B L f] [u y 1]."""
    A_obs = sys.A - L @ sys.C
    poles = np.linalg.eigvals(A_obs)
    if np.any(np.real(poles) >= 0):
        raise UnstableObserver(poles)
    inputs = np.column_stack((sys.B[:, 0], L[:, 0], sys.forcing))
    Phi, G, _ = discretize(A_obs, inputs, Ts)
    return Phi, G


def luenberger_step(sys: ContinuousLTISystem, L: np.ndarray, u: float, y: float, x_hat: np.ndarray,
                    Ts: float) -> np.ndarray:
    """One sampling interval of x_hat' = A x_hat + B u + E d + L (y - C x_hat) with u and y held."""
    Phi, G = _observer_matrices(sys, np.asarray(L, dtype=float).reshape(-1, 1), Ts)
    return Phi @ np.asarray(x_hat, dtype=float) + G @ np.array([u, y, 1.0])


class LuenbergerObserver:
    """Asymptotic observer baseline with pole-placement gains."""

    method = 'luenberger'

    def __init__(self, name: str, Ts: float, system: Optional[ContinuousLTISystem] = None,
                 poles: Optional[Sequence[float]] = None, pole_factor: float = 2.5,
                 L: Optional[np.ndarray] = None, x0: Optional[Sequence[float]] = None):
        self.name = name
        self.Ts = float(Ts)
        self.poles = poles
        self.pole_factor = pole_factor
        self.warnings: Counter = Counter()
        self.x_hat = None if x0 is None else np.asarray(x0, dtype=float).copy()
        self._fixed_gain = None if L is None else np.asarray(L, dtype=float).reshape(-1, 1)
        self.system: Optional[ContinuousLTISystem] = None
        self.L: Optional[np.ndarray] = None
        if system is not None:
            self.set_system(system)

    def set_system(self, system: ContinuousLTISystem) -> None:
        L = self._fixed_gain if self._fixed_gain is not None else observer_gain(system, self.poles, self.pole_factor)
        self._Phi, self._G = _observer_matrices(system, L, self.Ts)
        self.system, self.L = system, L
        if self.x_hat is None:
            self.x_hat = np.zeros(system.order)

    def set_coefficients(self, coeffs: IOCoefficients, system: Optional[ContinuousLTISystem] = None) -> None:
        try:
            self.set_system(system if system is not None else realize(coeffs))
        except EstimationError as exc:
            self.warnings[type(exc).__name__] += 1
            logger.debug("%s: coefficient update rejected: %s", self.name, exc)

    def reset(self, x0: Optional[Sequence[float]] = None) -> None:
        self.x_hat = np.zeros(self.system.order) if x0 is None else np.asarray(x0, dtype=float).copy()

    def update(self, t: float, u: float, y: float) -> Optional[StateEstimate]:
        """Estimate at t, then advance to the next sample."""
        if self.system is None:
            return None
        estimate = StateEstimate(x_hat=self.x_hat.copy(), time=t, method=self.method)
        self.x_hat = self._Phi @ self.x_hat + self._G @ np.array([u, y, 1.0])
        return estimate
