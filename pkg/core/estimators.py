"""
On-line parameter estimators of the input-output form

    y^(n) = -a . ybar + b . ubar + d

from modulating-function regressions z = W^T theta over a receding horizon.
"""

import logging
from collections import Counter
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .alpha_solver import AlphaBank, solve_alpha_bank
from .errors import EstimationError, RankDeficient, SingularGramian, WindowNotReady
from .mfilter import GramianFilters, MFilterState
from .models import ParameterEstimate, RegressionSample, Trajectory
from .modfunc import MFGenerator, ModulatingFunction, make_mf_generator, make_poly_total_mf
from .window import SignalWindow, horizon_samples

logger = logging.getLogger(__name__)

GRAMIAN_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class ModelStructure:
    """Parametrization theta = [d, -a0..-a(n-1), b0..b(n-1)]; d and b are optional."""
    n: int = 2
    include_d: bool = True
    include_u: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"order must be >= 1, got {self.n}")

    @property
    def labels(self) -> Tuple[str, ...]:
        labels = ['d'] if self.include_d else []
        labels += [f'-a{i}' for i in range(self.n)]
        if self.include_u:
            labels += [f'b{i}' for i in range(self.n)]
        return tuple(labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    def mask(self, free: Optional[Sequence[str]]) -> np.ndarray:
        if free is None:
            return np.ones(self.size, dtype=bool)
        unknown = set(free) - set(self.labels)
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)}; expected a subset of {self.labels}")
        return np.array([label in free for label in self.labels])

    def theta(self, coeffs) -> np.ndarray:
        """Parameter vector of a set of IOCoefficients."""
        values = {'d': coeffs.d}
        values.update({f'-a{i}': -coeffs.a[i] for i in range(self.n)})
        values.update({f'b{i}': coeffs.b[i] for i in range(self.n)})
        return np.array([values[label] for label in self.labels])


Bank = Union[Sequence[ModulatingFunction], AlphaBank]


def _kernels(bank: Bank) -> Sequence[ModulatingFunction]:
    return bank.kernels if isinstance(bank, AlphaBank) else bank


def regression_samples(bank: Bank, y: np.ndarray, u: Optional[np.ndarray], structure: ModelStructure,
                       Ts: float, t: float = 0.0, hold_y: str = 'linear',
                       hold_u: str = 'zero') -> RegressionSample:
    """z_j = L^n_j[y] and w_j = [L^0_j[1], L^0..L^(n-1)_j[y], L^0..L^(n-1)_j[u]] for every kernel."""
    N = y.size - 1
    n = structure.n
    z = []
    columns = []
    for mf in _kernels(bank):
        w = []
        if structure.include_d:
            w.append(float(np.sum(mf.weights(0, N, Ts, 'zero'))))
        w.extend(float(mf.weights(i, N, Ts, hold_y) @ y) for i in range(n))
        if structure.include_u:
            w.extend(float(mf.weights(i, N, Ts, hold_u) @ u) for i in range(n))
        z.append(float(mf.weights(n, N, Ts, hold_y) @ y))
        columns.append(w)
    return RegressionSample(z=np.array(z), W=np.array(columns).T, time=t)


def regression_row(bank: Bank, window: SignalWindow, structure: ModelStructure,
                   hold_y: str = 'linear', hold_u: str = 'zero') -> RegressionSample:
    y = window.channel('y')
    u = window.channel('u') if structure.include_u else None
    return regression_samples(bank, y, u, structure, window.Ts, window.latest, hold_y, hold_u)


def _condition(singular_values: np.ndarray) -> float:
    if singular_values.size == 0 or singular_values[-1] == 0:
        return float('inf')
    return float((singular_values[0] / singular_values[-1]) ** 2)


def estimate_batch(W: np.ndarray, z: np.ndarray, free=None, labels: Optional[Sequence[str]] = None,
                   time: float = 0.0, valid_from: float = 0.0, method: str = 'batch') -> ParameterEstimate:
    """theta = (W W^T)^-1 W z over the free parameters; the others stay at zero."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    p = W.shape[0]
    labels = tuple(labels) if labels is not None else tuple(f'theta{i}' for i in range(p))
    if free is None:
        mask = np.ones(p, dtype=bool)
    elif isinstance(free, np.ndarray) and free.dtype == bool:
        mask = free
    else:
        mask = np.array([label in free for label in labels])
    M = W[mask].T
    if M.shape[0] < M.shape[1]:
        raise RankDeficient(M.shape[0], M.shape[1], "fewer equations than free parameters")

    # equilibrate equations and parameters before solving
    row_norms = np.linalg.norm(M, axis=1)
    row_norms[row_norms == 0] = 1.0
    col_norms = np.linalg.norm(M / row_norms[:, None], axis=0)
    if np.any(col_norms == 0):
        raise SingularGramian(float('inf'))
    M_scaled = M / row_norms[:, None] / col_norms[None, :]
    singular_values = linalg.svdvals(M_scaled)
    condition = _condition(singular_values)
    if not np.isfinite(condition) or condition > GRAMIAN_CONDITION_LIMIT:
        raise SingularGramian(condition)
    solution = linalg.lstsq(M_scaled, z / row_norms)[0] / col_norms

    theta = np.zeros(p)
    theta[mask] = solution
    return ParameterEstimate(theta=theta, labels=labels, time=time, valid_from=valid_from,
                             method=method, condition=condition)


def solve_information(G: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, float]:
    """theta = G^-1 h with diagonal equilibration of the information matrix."""
    scale = np.sqrt(np.diag(G))
    if np.any(~np.isfinite(scale)) or np.any(scale == 0):
        raise SingularGramian(float('inf'))
    G_scaled = G / np.outer(scale, scale)
    condition = float(np.linalg.cond(G_scaled))
    if not np.isfinite(condition) or condition > GRAMIAN_CONDITION_LIMIT:
        raise SingularGramian(condition)
    return linalg.solve(G_scaled, h / scale, assume_a='sym') / scale, condition


def fixed_bank(orders: Sequence[int], T: float) -> List[ModulatingFunction]:
    """Total kernels t^k (T - t)^m with unit peak, exponents paired as (orders, reversed orders).

    Mirrored pairs keep both the even and odd halves of the window in view;
    symmetric kernels alone annihilate odd derivatives of signals that are
    symmetric about the window centre.
    """
    orders = list(orders)
    return [make_poly_total_mf(k, T, m).normalized() for k, m in zip(orders, reversed(orders))]


class StreamingEstimator:
    """Single-writer estimator advanced one sample at a time.

    Numerical failures after the first valid estimate repeat that estimate
    with the stale flag set; every failure is counted by exception name.
    """

    method = 'estimator'

    def __init__(self, name: str, T: float, Ts: float):
        self.name = name
        self.T = float(T)
        self.Ts = float(Ts)
        self.window = SignalWindow(T, Ts)
        self.warnings: Counter = Counter()
        self.start: Optional[float] = None
        self._last = None

    def update(self, t: float, u: float, y: float):
        if self.start is None:
            self.start = t
        try:
            estimate = self._step(t, u, y)
        except WindowNotReady:
            return None
        except EstimationError as exc:
            self.warnings[type(exc).__name__] += 1
            logger.debug("%s at t=%g: %s", self.name, t, exc)
            return self._stale(t)
        if estimate is not None:
            self._last = estimate
        return estimate

    def _stale(self, t: float):
        if self._last is None:
            return None
        return replace(self._last, time=t, stale=True)

    def _step(self, t: float, u: float, y: float):
        raise NotImplementedError


class BatchEstimator(StreamingEstimator):
    """Least squares over a bank of fixed total modulating functions at every sample."""

    method = 'batch'

    def __init__(self, name: str, structure: ModelStructure, T: float, Ts: float,
                 bank: Optional[Sequence[ModulatingFunction]] = None, free: Optional[Sequence[str]] = None,
                 hold_y: str = 'linear', hold_u: str = 'zero'):
        super().__init__(name, T, Ts)
        self.structure = structure
        self.bank = list(bank) if bank is not None else fixed_bank(range(structure.n, structure.n + structure.size + 1), T)
        self.mask = structure.mask(free)
        self.hold_y = hold_y
        self.hold_u = hold_u

    def _step(self, t, u, y):
        self.window.push(t, u, y)
        sample = regression_row(self.bank, self.window, self.structure, self.hold_y, self.hold_u)
        return estimate_batch(sample.W, sample.z, self.mask, self.structure.labels, time=t,
                              valid_from=self.start + self.T, method=self.method)


class GramianEstimator(StreamingEstimator):
    """Second receding-horizon stage: theta = (int w w^T)^-1 int w z over [t - T', t]."""

    method = 'gramian'

    def __init__(self, name: str, structure: ModelStructure, T: float, T_prime: float, Ts: float,
                 bank: Optional[Sequence[ModulatingFunction]] = None, kernel: Optional[MFGenerator] = None,
                 hold_y: str = 'linear', hold_u: str = 'zero'):
        super().__init__(name, T, Ts)
        self.structure = structure
        self.T_prime = float(T_prime)
        self.bank = list(bank) if bank is not None else fixed_bank([max(2, structure.n)], T)
        self.kernel = kernel
        self.hold_y = hold_y
        self.hold_u = hold_u
        p = structure.size
        if kernel is None:
            self._count = horizon_samples(T_prime, Ts) + 1
            self._h = np.zeros((self._count, p))
            self._G = np.zeros((self._count, p, p))
            self._head = 0
            self._filled = 0
            self._filters = None
        else:
            self._filters = GramianFilters(kernel, p, Ts)

    def _information(self) -> Tuple[np.ndarray, np.ndarray]:
        if self._filters is not None:
            h, G = self._filters.read()
            return G, h
        if self._filled < self._count:
            raise WindowNotReady("information window not full")
        # oldest entry sits at the head once the ring is full
        G = _trapezoid(np.roll(self._G, -self._head, axis=0), self.Ts)
        h = _trapezoid(np.roll(self._h, -self._head, axis=0), self.Ts)
        return G, h

    def _step(self, t, u, y):
        self.window.push(t, u, y)
        sample = regression_row(self.bank, self.window, self.structure, self.hold_y, self.hold_u)
        h = sample.W @ sample.z
        G = sample.W @ sample.W.T
        if self._filters is not None:
            self._filters.step(h, G)
        else:
            self._h[self._head] = h
            self._G[self._head] = G
            self._head = (self._head + 1) % self._count
            self._filled = min(self._filled + 1, self._count)
        G_int, h_int = self._information()
        theta, condition = solve_information(G_int, h_int)
        return ParameterEstimate(theta=theta, labels=self.structure.labels, time=t,
                                 valid_from=self.start + self.T + self.T_prime,
                                 method=self.method, condition=condition)


class NormalizedEstimator(StreamingEstimator):
    """Kernels re-solved so that W = I; theta is the sliding mean of z over T'."""

    method = 'normalized'

    def __init__(self, name: str, structure: ModelStructure, T: float, T_prime: float, Ts: float,
                 stride: int = 1, hold_y: str = 'linear', hold_u: str = 'zero'):
        super().__init__(name, T, Ts)
        if stride < 1:
            raise ValueError(f"stride must be >= 1, got {stride}")
        self.structure = structure
        self.T_prime = float(T_prime)
        self.stride = int(stride)
        self.hold_y = hold_y
        self.hold_u = hold_u
        self._count = horizon_samples(T_prime, Ts) + 1
        self._z = np.zeros((self._count, structure.size))
        self._head = 0
        self._filled = 0
        self._ticks = 0
        self.instantaneous: Optional[np.ndarray] = None
        self.bank: Optional[AlphaBank] = None

    def _instantaneous(self) -> Tuple[np.ndarray, bool]:
        if self.instantaneous is not None and self._ticks % self.stride:
            return self.instantaneous, False
        try:
            self.bank = solve_alpha_bank(self.window, self.structure.n, self.structure.include_d, self.Ts,
                                         include_u=self.structure.include_u, hold_y=self.hold_y,
                                         hold_u=self.hold_u)
        except RankDeficient as exc:
            if self.instantaneous is None:
                raise
            self.warnings[type(exc).__name__] += 1
            logger.debug("%s: %s; holding the previous z", self.name, exc)
            return self.instantaneous, True
        self.instantaneous = self.bank.z(self.window.channel('y'))
        return self.instantaneous, False

    def _step(self, t, u, y):
        self.window.push(t, u, y)
        z, held = self._instantaneous()
        self._ticks += 1
        self._z[self._head] = z
        self._head = (self._head + 1) % self._count
        self._filled = min(self._filled + 1, self._count)
        if self._filled < self._count:
            raise WindowNotReady("averaging window not full")
        theta = _trapezoid(np.roll(self._z, -self._head, axis=0), self.Ts) / self.T_prime
        return ParameterEstimate(theta=theta, labels=self.structure.labels, time=t,
                                 valid_from=self.start + self.T + self.T_prime,
                                 method=self.method, stale=held)


class DirectEstimator(StreamingEstimator):
    """Continuous-time filters for M^i[y], M^i[u] and a psi-weighted Gramian."""

    method = 'direct'

    def __init__(self, name: str, structure: ModelStructure, T: float, T_prime: float, Ts: float,
                 generator: Optional[MFGenerator] = None, kernel: Optional[MFGenerator] = None,
                 hold_y: str = 'linear', hold_u: str = 'zero'):
        super().__init__(name, T, Ts)
        self.structure = structure
        self.T_prime = float(T_prime)
        n = structure.n
        self.generator = generator or make_mf_generator(make_poly_total_mf(max(2, n), T).normalized(), T)
        self.kernel = kernel or make_mf_generator({'family': 'uniform'}, T_prime)
        self._y = MFilterState.from_generator(self.generator, Ts, hold_y)
        self._u = MFilterState.from_generator(self.generator, Ts, hold_u) if structure.include_u else None
        self._constant = self.generator.integral()
        self._gramian = GramianFilters(self.kernel, structure.size, Ts)

    def regression(self) -> Tuple[np.ndarray, float]:
        n = self.structure.n
        My = self._y.read_all(n + 1)
        w = [self._constant] if self.structure.include_d else []
        w.extend(My[:n])
        if self._u is not None:
            w.extend(self._u.read_all(n))
        return np.array(w), float(My[n])

    def _step(self, t, u, y):
        self._y.step(y)
        if self._u is not None:
            self._u.step(u)
        if not self._y.ready:
            raise WindowNotReady("modulating filters not filled")
        w, z = self.regression()
        self._gramian.step(w * z, np.outer(w, w))
        if not self._gramian.ready:
            raise WindowNotReady("Gramian filters not filled")
        h, G = self._gramian.read()
        theta, condition = solve_information(G, h)
        return ParameterEstimate(theta=theta, labels=self.structure.labels, time=t,
                                 valid_from=self.start + self.T + self.T_prime,
                                 method=self.method, condition=condition)


def estimate_offline(trajectory: Trajectory, bank: Sequence[ModulatingFunction], structure: ModelStructure,
                     T: float, stride: Optional[int] = None, hold_y: str = 'linear',
                     hold_u: str = 'zero') -> ParameterEstimate:
    """Windowed least squares over every window of a recorded trajectory."""
    Ts = trajectory.Ts
    N = horizon_samples(T, Ts)
    if len(trajectory) < N + 1:
        raise WindowNotReady(f"trajectory of {len(trajectory)} samples is shorter than one window")
    stride = stride or max(1, N // 4)
    Ws, zs = [], []
    for start in range(0, len(trajectory) - N, stride):
        stop = start + N + 1
        u = trajectory.u[start:stop] if structure.include_u else None
        sample = regression_samples(bank, trajectory.y[start:stop], u, structure, Ts,
                                    trajectory.t[stop - 1], hold_y, hold_u)
        Ws.append(sample.W)
        zs.append(sample.z)
    return estimate_batch(np.hstack(Ws), np.concatenate(zs), None, structure.labels,
                          time=float(trajectory.t[-1]), valid_from=float(trajectory.t[0] + T),
                          method='offline')


def _trapezoid(stack: np.ndarray, Ts: float) -> np.ndarray:
    return Ts * (stack.sum(axis=0) - 0.5 * (stack[0] + stack[-1]))


def _horizon(samples: Sequence[RegressionSample], T_prime: float, Ts: float) -> List[RegressionSample]:
    count = horizon_samples(T_prime, Ts) + 1
    samples = list(samples)
    if len(samples) < count:
        raise WindowNotReady(f"{len(samples)} of {count} regression samples over T'={T_prime}")
    return samples[-count:]


def estimate_gramian(samples: Sequence[RegressionSample], T_prime: float, Ts: float,
                     kernel: Optional[MFGenerator] = None, labels: Optional[Sequence[str]] = None,
                     valid_from: float = 0.0) -> ParameterEstimate:
    """Gramian estimate from the regression samples of the last T' seconds."""
    window = _horizon(samples, T_prime, Ts)
    h = np.array([s.W @ s.z for s in window])
    G = np.array([s.W @ s.W.T for s in window])
    if kernel is None:
        h_int, G_int = _trapezoid(h, Ts), _trapezoid(G, Ts)
    else:
        filters = GramianFilters(kernel, h.shape[1], Ts)
        for h_k, G_k in zip(h, G):
            filters.step(h_k, G_k)
        h_int, G_int = filters.read()
    theta, condition = solve_information(G_int, h_int)
    labels = tuple(labels) if labels is not None else tuple(f'theta{i}' for i in range(theta.size))
    return ParameterEstimate(theta=theta, labels=labels, time=window[-1].time, valid_from=valid_from,
                             method='gramian', condition=condition)


def estimate_normalized(samples: Sequence[RegressionSample], T_prime: float, Ts: float,
                        labels: Optional[Sequence[str]] = None, valid_from: float = 0.0) -> ParameterEstimate:
    """(1/T') int z over the last T' seconds of identity-regressor samples."""
    window = _horizon(samples, T_prime, Ts)
    theta = _trapezoid(np.array([s.z for s in window]), Ts) / T_prime
    labels = tuple(labels) if labels is not None else tuple(f'theta{i}' for i in range(theta.size))
    return ParameterEstimate(theta=theta, labels=labels, time=window[-1].time, valid_from=valid_from,
                             method='normalized')
