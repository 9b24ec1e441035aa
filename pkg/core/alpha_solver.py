"""
Time-varying total modulating functions normalized so that the regression
matrix W built from the current window is the identity.

Each kernel is represented by the samples of alpha = phi^(n); the
antiderivatives are Riemann running sums (the lower-triangular matrix of
ones Q), and the stacked system

    [K; B] alpha = [I; 0]

is solved by pseudo-inversion, K holding the regression rows and B the
right-boundary conditions alpha^(-i)(T) = 0.

The row for alpha^(-m) acts on the order-m cardinal B-spline average of the
held signal. Summation by parts then carries every row to the same
alignment as z = L^n[y], and the regression holds up to the reconstruction
error of the hold instead of a half-cell shift per level.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import linalg

from .errors import RankDeficient
from .modfunc import AlphaKernel, spline_average
from .window import SignalWindow

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-10


def _reverse_cumsum(v: np.ndarray) -> np.ndarray:
    return np.cumsum(v[::-1])[::-1]


def _row_family(signal: np.ndarray, n: int) -> List[np.ndarray]:
    """signal^T Q^m as row vectors, m = 0..n."""
    rows = [signal]
    for _ in range(n):
        rows.append(_reverse_cumsum(rows[-1]))
    return rows


def regression_rows(y: np.ndarray, u: Optional[np.ndarray], n: int, include_d: bool, Ts: float,
                    hold_y: str = 'linear', hold_u: str = 'zero') -> np.ndarray:
    """K: rows L^i of [1], y and u, i = 0..n-1, acting on alpha."""
    ones = np.ones_like(y)
    rows = []
    if include_d:
        rows.append(Ts ** (n + 1) * _row_family(ones, n)[n])
    signals = [(y, hold_y)] if u is None else [(y, hold_y), (u, hold_u)]
    for signal, hold in signals:
        for i in range(n):
            m = n - i
            rows.append((-1.0) ** i * Ts ** (m + 1) * _row_family(spline_average(signal, m, hold), m)[m])
    return np.vstack(rows)


def boundary_rows(size: int, n: int, Ts: float) -> np.ndarray:
    """B: alpha^(-i)(T), i = n..1."""
    family = _row_family(np.ones(size), n)
    return np.vstack([Ts ** i * family[i - 1] for i in range(n, 0, -1)])


@dataclass
class AlphaBank:
    kernels: List[AlphaKernel]
    rank: int
    W_residual: float
    gamma_residual: float
    n: int
    Ts: float

    @property
    def alpha(self) -> np.ndarray:
        """(N+1) x m_t matrix of kernel samples."""
        return np.column_stack([k.samples for k in self.kernels])

    def z(self, y: np.ndarray) -> np.ndarray:
        """L^n[y] for every kernel; equals theta when W = I."""
        return (-1.0) ** self.n * self.Ts * (np.asarray(y, dtype=float) @ self.alpha)


def solve_alpha_bank(window: SignalWindow, n: int, include_d: bool, Ts: float,
                     include_u: bool = True, hold_y: str = 'linear', hold_u: str = 'zero') -> AlphaBank:
    y = window.channel('y')
    u = window.channel('u') if include_u else None
    return solve_alpha_bank_samples(y, u, n, include_d, Ts, hold_y, hold_u)


def solve_alpha_bank_samples(y: np.ndarray, u: Optional[np.ndarray], n: int, include_d: bool,
                             Ts: float, hold_y: str = 'linear', hold_u: str = 'zero') -> AlphaBank:
    y = np.asarray(y, dtype=float)
    m_t = n * (1 if u is None else 2) + (1 if include_d else 0)
    if y.size < m_t + n:
        raise ValueError(f"{y.size} samples cannot carry {m_t} kernels with {n} boundary conditions")

    K = regression_rows(y, None if u is None else np.asarray(u, dtype=float), n, include_d, Ts, hold_y, hold_u)
    B = boundary_rows(y.size, n, Ts)
    S = np.vstack((K, B))
    rhs = np.vstack((np.eye(m_t), np.zeros((n, m_t))))

    # equilibrate rows; the minimum-norm solution of a consistent system is unchanged
    norms = np.linalg.norm(S, axis=1)
    norms[norms == 0] = 1.0
    S_scaled = S / norms[:, None]
    rhs_scaled = rhs / norms[:, None]

    U, s, Vt = linalg.svd(S_scaled, full_matrices=False)
    rank = int(np.sum(s > RANK_TOLERANCE * s[0])) if s.size and s[0] > 0 else 0
    if rank < S.shape[0]:
        raise RankDeficient(rank, S.shape[0], "signals are not exciting enough over the window")
    alpha = Vt.T @ ((U.T @ rhs_scaled) / s[:, None])

    W_residual = float(np.max(np.abs(K @ alpha - np.eye(m_t))))
    gamma_residual = float(np.max(np.abs(B @ alpha)))
    logger.debug("alpha bank: rank %d, |W - I| %.2e, |Gamma| %.2e", rank, W_residual, gamma_residual)
    kernels = [AlphaKernel(alpha[:, j], n, Ts) for j in range(m_t)]
    return AlphaBank(kernels=kernels, rank=rank, W_residual=W_residual, gamma_residual=gamma_residual, n=n, Ts=Ts)
