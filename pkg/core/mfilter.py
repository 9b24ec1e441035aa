"""
Continuous-time realization of the reversed modulating integrals

    M^i[f](t) = int_{t-T}^{t} psi^(i)(t - tau) f(tau) dtau
              = Sigma Lambda^i [xi(t) - exp(Lambda T) xi(t - T)],
    xi' = Lambda xi + l f,

stepped with the exact transition of the generator dynamics for a held
input, plus the Kronecker-lifted filters used by the psi-weighted Gramian.
"""

import logging
from collections import deque
from typing import Deque, Optional, Tuple

import numpy as np
from scipy import linalg

from .errors import WindowNotReady
from .modfunc import MFGenerator
from .window import horizon_samples

logger = logging.getLogger(__name__)

REBASE_HORIZONS = 10
FILTER_HOLDS = ('zero', 'linear')


def discretize(Lam: np.ndarray, L_in: np.ndarray, Ts: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Phi, G, H with xi(k+1) = Phi xi(k) + G f(k) + H (f(k+1) - f(k)) for a piecewise-linear input.

    G alone is the zero-order-hold input matrix.
    """
    ns = Lam.shape[0]
    m = L_in.shape[1]
    block = np.zeros((ns + 2 * m, ns + 2 * m))
    block[:ns, :ns] = Lam * Ts
    block[:ns, ns:ns + m] = L_in * Ts
    block[ns:ns + m, ns + m:] = np.eye(m)
    E = linalg.expm(block)
    return E[:ns, :ns], E[:ns, ns:ns + m], E[:ns, ns + m:]


class MFilterState:
    """FIR filter xi(t) - exp(Lambda T) xi(t - T) with a delay line spanning T."""

    def __init__(self, Lam, L_in, Sigma, T: float, Ts: float, hold: str = 'zero'):
        if hold not in FILTER_HOLDS:
            raise ValueError(f"unknown hold '{hold}', expected one of {', '.join(FILTER_HOLDS)}")
        self.Lam = np.atleast_2d(np.asarray(Lam, dtype=float))
        ns = self.Lam.shape[0]
        self.L_in = np.asarray(L_in, dtype=float).reshape(ns, -1)
        self.Sigma = np.asarray(Sigma, dtype=float).reshape(-1, ns)
        self.T = float(T)
        self.Ts = float(Ts)
        self.hold = hold
        self.N = horizon_samples(T, Ts)
        self.Phi, G, H = discretize(self.Lam, self.L_in, self.Ts)
        if hold == 'zero':
            self._G_prev, self._G_next = G, np.zeros_like(G)
        else:
            self._G_prev, self._G_next = G - H, H
        self.exp_T = linalg.expm(self.Lam * self.T)
        self._states: Deque[np.ndarray] = deque(maxlen=self.N + 1)
        self._last_input: Optional[np.ndarray] = None
        self._since_rebase = 0

    @classmethod
    def from_generator(cls, generator: MFGenerator, Ts: float, hold: str = 'zero') -> 'MFilterState':
        return cls(generator.Lam, generator.l, generator.Sigma, generator.T, Ts, hold)

    @property
    def ready(self) -> bool:
        return len(self._states) == self.N + 1

    @property
    def state(self) -> np.ndarray:
        if not self._states:
            raise WindowNotReady("filter has not received a sample")
        return self._states[-1]

    def step(self, sample) -> 'MFilterState':
        """Advance by one sampling interval to the new sample."""
        sample = np.asarray(sample, dtype=float)
        sample = sample.reshape((self.L_in.shape[1],) + sample.shape[1:]) if sample.ndim else sample.reshape(1)
        if self._last_input is None:
            xi = np.zeros((self.Lam.shape[0],) + sample.shape[1:])
        else:
            xi = self.Phi @ self._states[-1] + self._G_prev @ self._last_input + self._G_next @ sample
        self._states.append(xi)
        self._last_input = sample
        self._since_rebase += 1
        if self.ready and self._since_rebase >= REBASE_HORIZONS * self.N:
            self._rebase()
        return self

    def _rebase(self) -> None:
        # remove the free response of xi(t - T); the windowed difference is invariant
        reference = self._states[0].copy()
        power = np.eye(self.Phi.shape[0])
        rebased = deque(maxlen=self.N + 1)
        for xi in self._states:
            rebased.append(xi - power @ reference)
            power = self.Phi @ power
        self._states = rebased
        self._since_rebase = 0
        logger.debug("rebased filter delay line (order %d)", self.Phi.shape[0])

    def window_state(self) -> np.ndarray:
        if not self.ready:
            raise WindowNotReady(f"{len(self._states)} of {self.N + 1} filter states collected")
        return self._states[-1] - self.exp_T @ self._states[0]

    def read(self, i: int = 0) -> np.ndarray:
        """M^i of the filtered signal; a scalar for scalar input."""
        value = self.Sigma @ np.linalg.matrix_power(self.Lam, i) @ self.window_state()
        return value.item() if value.size == 1 else value

    def read_all(self, count: int) -> np.ndarray:
        """[M^0, ..., M^(count-1)] for a scalar input."""
        diff = self.window_state()
        rows = []
        row = self.Sigma
        for _ in range(count):
            rows.append(float((row @ diff).ravel()[0]))
            row = row @ self.Lam
        return np.array(rows)


def m_filter_step(state: MFilterState, sample: float) -> MFilterState:
    return state.step(sample)


def m_filter_read(state: MFilterState, i: int) -> float:
    return state.read(i)


class GramianFilters:
    """psi-weighted windowed integrals of h = w z and G = w w^T via lifted filters."""

    def __init__(self, generator: MFGenerator, size: int, Ts: float, hold: str = 'zero'):
        identity = np.eye(size)
        Lam = np.kron(generator.Lam, identity)
        L_in = np.kron(generator.l.reshape(-1, 1), identity)
        Sigma = np.kron(generator.Sigma.reshape(1, -1), identity)
        self.size = size
        self.vector = MFilterState(Lam, L_in, Sigma, generator.T, Ts, hold)
        self.matrix = MFilterState(Lam, L_in, Sigma, generator.T, Ts, hold)

    @property
    def ready(self) -> bool:
        return self.vector.ready

    def step(self, h, G) -> None:
        self.vector.step(np.asarray(h, dtype=float).reshape(self.size))
        self.matrix.step(np.asarray(G, dtype=float).reshape(self.size, self.size))

    def read(self) -> Tuple[np.ndarray, np.ndarray]:
        return (self.vector.Sigma @ self.vector.window_state(),
                self.matrix.Sigma @ self.matrix.window_state())


def gramian_filters_step(filters: GramianFilters, h, G) -> Tuple[np.ndarray, np.ndarray]:
    filters.step(h, G)
    return filters.read()
