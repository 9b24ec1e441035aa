"""
Modulating functions: construction, classification and the windowed
integral operators

    L^i[f](t) = int_{t-T}^{t} (-1)^i phi^(i)(tau - t + T) f(tau) dtau

evaluated on the N+1 samples of a receding horizon.
"""

import logging
from dataclasses import dataclass, field
from math import factorial
from typing import Dict, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss
from scipy import linalg
from scipy.interpolate import BSpline

from .errors import NotAModulatingFunction

logger = logging.getLogger(__name__)

TOTAL, LEFT, RIGHT = 'total', 'left', 'right'
HOLDS = ('riemann', 'zero', 'linear')
BOUNDARY_TOLERANCE = 1e-9
CLASSIFY_GRID = 401
GAUSS_NODES = 12

_nodes, _node_weights = leggauss(GAUSS_NODES)
# Gauss-Legendre rule on [0, 1]
CELL_NODES = 0.5 * (_nodes + 1.0)
CELL_WEIGHTS = 0.5 * _node_weights


def _check_hold(hold: str) -> None:
    if hold not in HOLDS:
        raise ValueError(f"unknown hold '{hold}', expected one of {', '.join(HOLDS)}")


def spline_weights(m: int, hold: str) -> np.ndarray:
    """Sample weights of the cardinal B-spline average of order m of a held signal.

    The average of f over [s_k, s_k + m Ts] is sum_j w_j f_(k+j); order 0 is
    the sample itself, as is every order under the 'riemann' hold.
    """
    _check_hold(hold)
    if m < 0:
        raise ValueError(f"average order must be >= 0, got {m}")
    if m == 0 or hold == 'riemann':
        return np.ones(1)
    # zero hold: cell integrals of B_m; linear hold: B_m against the hat functions
    p = m + 1 if hold == 'zero' else m + 2
    spline = BSpline.basis_element(np.arange(p + 1, dtype=float), extrapolate=False)
    return np.asarray(spline(np.arange(1, p, dtype=float)), dtype=float)


def spline_average(signal, m: int, hold: str) -> np.ndarray:
    """c_k = sum_j w_j f_(k+j); samples past the end repeat the last one."""
    signal = np.asarray(signal, dtype=float)
    weights = spline_weights(m, hold)
    padded = np.concatenate((signal, np.full(weights.size - 1, signal[-1])))
    return np.correlate(padded, weights, mode='valid')


def spline_average_adjoint(coefficients, m: int, hold: str) -> np.ndarray:
    """Weights v with v . f = coefficients . spline_average(f, m, hold)."""
    coefficients = np.asarray(coefficients, dtype=float)
    full = np.convolve(coefficients, spline_weights(m, hold))
    weights = full[:coefficients.size].copy()
    weights[-1] += full[coefficients.size:].sum()
    return weights


class ModulatingFunction:
    """A kernel on [0, T] with derivatives available up to its order."""

    def __init__(self, T: float, order: int):
        if T <= 0:
            raise ValueError(f"horizon must be positive, got {T}")
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        self.T = float(T)
        self.order = int(order)
        self._weights: Dict[Tuple[int, int, float, str], np.ndarray] = {}

    def derivative(self, i: int, s) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, s) -> np.ndarray:
        return self.derivative(0, s)

    @property
    def kind(self) -> str:
        return classify(self, self.order)

    def weights(self, i: int, N: int, Ts: float, hold: str = 'riemann') -> np.ndarray:
        """Sample weights w with L^i[f] = w . f for the given reconstruction of f."""
        key = (i, N, Ts, hold)
        if key not in self._weights:
            self._weights[key] = self._cell_weights(i, N, Ts, hold)
        return self._weights[key]

    def _cell_weights(self, i: int, N: int, Ts: float, hold: str) -> np.ndarray:
        _check_hold(hold)
        sign = -1.0 if i % 2 else 1.0
        weights = np.zeros(N + 1)
        if hold == 'riemann':
            weights[:N] = Ts * self.derivative(i, Ts * np.arange(N))
            return sign * weights
        s = Ts * (np.arange(N)[:, None] + CELL_NODES[None, :])
        g = self.derivative(i, s) * CELL_WEIGHTS[None, :] * Ts
        if hold == 'zero':
            weights[:N] = g.sum(axis=1)
        else:
            weights[:N] = (g * (1.0 - CELL_NODES)[None, :]).sum(axis=1)
            weights[1:] += (g * CELL_NODES[None, :]).sum(axis=1)
        return sign * weights


class PolynomialMF(ModulatingFunction):
    """phi(s) = scale * p(s / T) with p a polynomial on [0, 1]."""

    def __init__(self, poly: Polynomial, T: float, order: int, scale: float = 1.0):
        super().__init__(T, order)
        self.poly = Polynomial(poly.coef)
        self.scale = float(scale)
        self._derivatives = [self.poly]

    def _poly_derivative(self, i: int) -> Polynomial:
        while len(self._derivatives) <= i:
            self._derivatives.append(self._derivatives[-1].deriv())
        return self._derivatives[i]

    def derivative(self, i: int, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return self.scale * self._poly_derivative(i)(s / self.T) / self.T ** i

    def normalized(self) -> 'PolynomialMF':
        """Same shape with unit peak magnitude."""
        grid = np.linspace(0.0, 1.0, CLASSIFY_GRID)
        peak = float(np.max(np.abs(self.poly(grid))))
        if peak == 0:
            raise ValueError("cannot normalize a zero kernel")
        return PolynomialMF(self.poly / peak, self.T, self.order)

    def reversed(self) -> 'PolynomialMF':
        """s -> phi(T - s)."""
        return PolynomialMF(self.poly(Polynomial([1.0, -1.0])), self.T, self.order, self.scale)

    def __repr__(self) -> str:
        return f"PolynomialMF(T={self.T}, order={self.order}, degree={self.poly.degree()})"


def make_poly_total_mf(k: int, T: float, m: Optional[int] = None) -> PolynomialMF:
    """phi(t) = t^k (t - T)^m, m = k when omitted; total of order min(k, m)."""
    m = k if m is None else m
    if k < 1 or m < 1:
        raise ValueError(f"exponents must be >= 1, got {k} and {m}")
    sigma = Polynomial([0.0, 1.0])
    return PolynomialMF(sigma ** k * (sigma - 1.0) ** m, T, order=min(k, m), scale=float(T) ** (k + m))


def make_poly_left_mf(j: int, n: int, T: float) -> PolynomialMF:
    """phi(t) = (t / T)^(n + j - 1)."""
    if j < 1 or n < 1:
        raise ValueError(f"j and n must be >= 1, got j={j}, n={n}")
    return PolynomialMF(Polynomial([0.0, 1.0]) ** (n + j - 1), T, order=n)


def classify(mf: ModulatingFunction, k: int) -> str:
    """Total, left or right according to which boundary derivatives 0..k-1 vanish."""
    grid = np.linspace(0.0, mf.T, CLASSIFY_GRID)
    left_zero = right_zero = True
    for i in range(k):
        values = mf.derivative(i, grid)
        peak = float(np.max(np.abs(values)))
        if peak == 0:
            continue
        left_zero &= abs(values[0]) <= BOUNDARY_TOLERANCE * peak
        right_zero &= abs(values[-1]) <= BOUNDARY_TOLERANCE * peak
    if left_zero and right_zero:
        return TOTAL
    if left_zero:
        return LEFT
    if right_zero:
        return RIGHT
    raise NotAModulatingFunction(f"no boundary of {mf!r} vanishes up to derivative {k - 1}")


def apply_L(mf: ModulatingFunction, i: int, samples, Ts: float, hold: str = 'riemann') -> float:
    """L^i of a full window of samples (oldest first)."""
    samples = np.asarray(samples, dtype=float)
    N = samples.shape[0] - 1
    if abs(N * Ts - mf.T) > 1e-9 * max(1.0, mf.T):
        raise ValueError(f"{N + 1} samples at Ts={Ts} do not span the horizon T={mf.T}")
    if not 0 <= i <= mf.order:
        raise ValueError(f"derivative order {i} outside 0..{mf.order}")
    return float(mf.weights(i, N, Ts, hold) @ samples)


class AlphaKernel(ModulatingFunction):
    """Total modulating function given by samples of its n-th derivative.

    The antiderivatives alpha^(-m) are the running sums Ts^m Q^m alpha, so
    the kernel only exists on the sampling grid it was solved for. Level m
    acts on the order-m spline average of the held signal, which keeps every
    level aligned with z; the 'riemann' hold uses the raw samples.
    """

    def __init__(self, samples, n: int, Ts: float):
        samples = np.asarray(samples, dtype=float).ravel()
        super().__init__((samples.size - 1) * Ts, n)
        self.samples = samples
        self.n = n
        self.Ts = float(Ts)
        self._sums = [samples]
        for _ in range(n):
            self._sums.append(self.Ts * np.cumsum(self._sums[-1]))

    def antiderivative(self, m: int) -> np.ndarray:
        return self._sums[m]

    def boundary(self) -> np.ndarray:
        """[alpha^(-n)(T), ..., alpha^(-1)(T)]."""
        return np.array([self._sums[m][-1] for m in range(self.n, 0, -1)])

    def derivative(self, i: int, s) -> np.ndarray:
        if not 0 <= i <= self.n:
            raise ValueError(f"derivative order {i} outside 0..{self.n}")
        index = np.clip(np.rint(np.asarray(s, dtype=float) / self.Ts).astype(int), 0, self.samples.size - 1)
        return self._sums[self.n - i][index]

    def weights(self, i: int, N: int, Ts: float, hold: str = 'riemann') -> np.ndarray:
        if N + 1 != self.samples.size or abs(Ts - self.Ts) > 1e-12 * self.Ts:
            raise ValueError("alpha kernel applied to a window it was not solved for")
        if not 0 <= i <= self.n:
            raise ValueError(f"derivative order {i} outside 0..{self.n}")
        sign = -1.0 if i % 2 else 1.0
        m = self.n - i
        return sign * self.Ts * spline_average_adjoint(self._sums[m], m, hold)

    @property
    def kind(self) -> str:
        return TOTAL


@dataclass(frozen=True)
class ExponentialSpec:
    """psi(s) = sum_j w_j exp(-lambda_j s); equal weights when none are given."""
    rates: Tuple[float, ...]
    weights: Optional[Tuple[float, ...]] = None


@dataclass
class MFGenerator:
    """psi(s) = Sigma exp(Lambda s) l on [0, T]."""
    Lam: np.ndarray
    l: np.ndarray
    Sigma: np.ndarray
    T: float
    kind: Optional[str] = None
    _exp_T: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.Lam.shape[0]

    @property
    def exp_T(self) -> np.ndarray:
        if self._exp_T is None:
            self._exp_T = linalg.expm(self.Lam * self.T)
        return self._exp_T

    def evaluate(self, s, i: int = 0) -> np.ndarray:
        """psi^(i) at the given times."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        row = self.Sigma @ np.linalg.matrix_power(self.Lam, i)
        values = [float(row @ linalg.expm(self.Lam * si) @ self.l) for si in s.ravel()]
        return np.asarray(values).reshape(s.shape)

    def output_matrix(self, n: int) -> np.ndarray:
        """Rows Sigma Lambda^i, i = 0..n-1."""
        rows = [self.Sigma.ravel()]
        for _ in range(n - 1):
            rows.append(rows[-1] @ self.Lam)
        return np.vstack(rows)

    def integral(self) -> float:
        """int_0^T psi(s) ds."""
        n_psi = self.dimension
        block = np.zeros((n_psi + 1, n_psi + 1))
        block[:n_psi, :n_psi] = self.Lam * self.T
        block[:n_psi, n_psi:] = self.l.reshape(-1, 1) * self.T
        return float(self.Sigma.ravel() @ linalg.expm(block)[:n_psi, n_psi])


GeneratorSpec = Union[PolynomialMF, ExponentialSpec, Dict]


def _polynomial_generator(mf: PolynomialMF) -> MFGenerator:
    reversed_mf = mf.reversed()
    coefficients = reversed_mf.poly.coef
    dim = coefficients.size
    # chain of integrators in the normalized time s / T
    Lam = np.diag(np.full(dim - 1, 1.0 / mf.T), k=-1)
    l = np.zeros(dim)
    l[0] = 1.0
    Sigma = np.array([c * factorial(m) for m, c in enumerate(coefficients)]) * mf.scale
    try:
        kind = classify(reversed_mf, mf.order)
    except NotAModulatingFunction:
        kind = None
    return MFGenerator(Lam=Lam, l=l, Sigma=Sigma, T=mf.T, kind=kind)


def make_mf_generator(spec: GeneratorSpec, T: float) -> MFGenerator:
    """State-space generator of the reversed kernel psi(s) = phi(T - s)."""
    if isinstance(spec, dict):
        family = spec.get('family')
        if family == 'poly-total':
            spec = make_poly_total_mf(int(spec.get('order', 2)), T).normalized()
        elif family == 'uniform':
            spec = PolynomialMF(Polynomial([1.0]), T, order=1)
        elif family == 'exponential':
            weights = spec.get('weights')
            spec = ExponentialSpec(tuple(spec.get('rates', ())), tuple(weights) if weights else None)
        else:
            raise ValueError(f"unsupported generator family {family!r}")
    if isinstance(spec, PolynomialMF):
        if abs(spec.T - T) > 1e-9 * T:
            raise ValueError(f"kernel horizon {spec.T} differs from T={T}")
        return _polynomial_generator(spec)
    if isinstance(spec, ExponentialSpec):
        rates = np.asarray(spec.rates, dtype=float)
        if rates.size == 0 or np.any(rates <= 0):
            raise ValueError("exponential generators need strictly positive rates")
        weights = np.full(rates.size, 1.0 / rates.size) if spec.weights is None else np.asarray(spec.weights, float)
        if weights.size != rates.size:
            raise ValueError("one weight per rate is required")
        return MFGenerator(Lam=np.diag(-rates), l=np.ones(rates.size), Sigma=weights, T=float(T))
    raise ValueError(f"unsupported generator spec {spec!r}")
