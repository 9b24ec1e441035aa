"""
Receding-horizon sample store.
"""

import numpy as np

from .errors import WindowNotReady

SPACING_TOLERANCE = 1e-3


def horizon_samples(T: float, Ts: float) -> int:
    """Number of sampling intervals N spanned by a horizon T."""
    N = int(round(T / Ts))
    if N < 1 or abs(N * Ts - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"horizon {T} is not a positive multiple of Ts={Ts}")
    return N


class SignalWindow:
    """The last N+1 samples of (t, u, y), N = T/Ts, in a circular buffer."""

    def __init__(self, T: float, Ts: float):
        self.T = float(T)
        self.Ts = float(Ts)
        self.N = horizon_samples(T, Ts)
        self.capacity = self.N + 1
        self._t = np.zeros(self.capacity)
        self._u = np.zeros(self.capacity)
        self._y = np.zeros(self.capacity)
        self._head = 0
        self.count = 0

    @property
    def ready(self) -> bool:
        return self.count >= self.capacity

    @property
    def latest(self) -> float:
        if self.count == 0:
            raise WindowNotReady("window is empty")
        return float(self._t[(self._head - 1) % self.capacity])

    def push(self, t: float, u: float, y: float) -> None:
        if self.count:
            step = t - self.latest
            if abs(step - self.Ts) > SPACING_TOLERANCE * self.Ts:
                raise ValueError(f"non-uniform sample at t={t}: spacing {step} != Ts={self.Ts}")
        self._t[self._head] = t
        self._u[self._head] = u
        self._y[self._head] = y
        self._head = (self._head + 1) % self.capacity
        self.count += 1

    def _ordered(self, buffer: np.ndarray) -> np.ndarray:
        if not self.ready:
            raise WindowNotReady(f"{self.count} of {self.capacity} samples collected")
        return np.concatenate((buffer[self._head:], buffer[:self._head]))

    def channel(self, name: str) -> np.ndarray:
        """Oldest-first samples of 't', 'u' or 'y'."""
        buffers = {'t': self._t, 'u': self._u, 'y': self._y}
        if name not in buffers:
            raise ValueError(f"unknown channel '{name}'")
        return self._ordered(buffers[name])

    def reset(self) -> None:
        self._head = 0
        self.count = 0
