"""
State-space <-> input-output transformations for observable SISO systems
with an optional constant disturbance channel.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import NotObservable

logger = logging.getLogger(__name__)

MAX_ORDER = 6
OBSERVABILITY_CONDITION_LIMIT = 1e12
CHARACTERISTIC_TOLERANCE = 1e-10


def _frozen(array, shape) -> np.ndarray:
    result = np.array(array, dtype=float).reshape(shape)
    result.setflags(write=False)
    return result


@dataclass(frozen=True)
class ContinuousLTISystem:
    """x' = A x + B u + E d,  y = C x  (single control input)."""
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    disturbance_gain: Optional[np.ndarray] = None
    disturbance: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        if not 1 <= n <= MAX_ORDER:
            raise ValueError(f"order must be in 1..{MAX_ORDER}, got {n}")
        if np.asarray(self.B).size != n or np.asarray(self.C).size != n:
            raise ValueError(f"B and C must have {n} entries")
        object.__setattr__(self, 'A', _frozen(A, (n, n)))
        object.__setattr__(self, 'B', _frozen(self.B, (n, 1)))
        object.__setattr__(self, 'C', _frozen(self.C, (1, n)))
        if self.disturbance_gain is not None:
            if np.asarray(self.disturbance_gain).size != n:
                raise ValueError(f"disturbance_gain must have {n} entries")
            object.__setattr__(self, 'disturbance_gain', _frozen(self.disturbance_gain, (n, 1)))
        object.__setattr__(self, 'disturbance', float(self.disturbance))

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def forcing(self) -> np.ndarray:
        """Constant state forcing E*d (zeros without a disturbance channel)."""
        if self.disturbance_gain is None:
            return np.zeros(self.order)
        return self.disturbance_gain[:, 0] * self.disturbance

    def derivative(self, x: np.ndarray, u: float) -> np.ndarray:
        return self.A @ x + self.B[:, 0] * u + self.forcing

    def output(self, x: np.ndarray) -> float:
        return float(self.C[0] @ x)


@dataclass(frozen=True)
class StructuralMatrices:
    O: np.ndarray
    toeplitz: np.ndarray
    crev: np.ndarray
    O_inv: np.ndarray
    condition: float = 1.0

    @property
    def order(self) -> int:
        return self.O.shape[0]


@dataclass(frozen=True)
class IOCoefficients:
    """y^(n) = -a.ybar + b.ubar + d."""
    a: np.ndarray
    b: np.ndarray
    d: float = 0.0

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        b = np.array(self.b, dtype=float).ravel()
        if a.size != b.size or a.size == 0:
            raise ValueError(f"a and b must have the same positive length, got {a.size} and {b.size}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'd', float(self.d))

    @property
    def order(self) -> int:
        return self.a.size

    def to_dict(self) -> dict:
        result = {f'a{i}': float(v) for i, v in enumerate(self.a)}
        result.update({f'b{i}': float(v) for i, v in enumerate(self.b)})
        result['d'] = self.d
        return result

    @classmethod
    def from_dict(cls, data: dict) -> 'IOCoefficients':
        n = sum(1 for key in data if key.startswith('a') and key[1:].isdigit())
        return cls(
            a=[data[f'a{i}'] for i in range(n)],
            b=[data[f'b{i}'] for i in range(n)],
            d=data.get('d', 0.0)
        )


def _observability(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    rows = [C[0]]
    for _ in range(n - 1):
        rows.append(rows[-1] @ A)
    return np.vstack(rows)


def _toeplitz(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    markov = [float(C[0] @ np.linalg.matrix_power(A, k) @ B[:, 0]) for k in range(n)]
    T = np.zeros((n, n))
    for i in range(n):
        for j in range(i):
            T[i, j] = markov[i - j - 1]
    return T


def _reversed_controllability(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    columns = [B[:, 0]]
    for _ in range(n - 1):
        columns.append(A @ columns[-1])
    return np.column_stack(columns[::-1])


def structural_matrices(sys: ContinuousLTISystem) -> StructuralMatrices:
    """Observability, Toeplitz feedthrough and reversed controllability matrices."""
    O = _observability(sys.A, sys.C)
    condition = float(np.linalg.cond(O))
    if not np.isfinite(condition) or condition > OBSERVABILITY_CONDITION_LIMIT:
        raise NotObservable(condition)
    return StructuralMatrices(
        O=_frozen(O, O.shape),
        toeplitz=_frozen(_toeplitz(sys.A, sys.B, sys.C), O.shape),
        crev=_frozen(_reversed_controllability(sys.A, sys.B), O.shape),
        O_inv=_frozen(linalg.inv(O), O.shape),
        condition=condition
    )


def _input_coefficients(sys: ContinuousLTISystem, sm: StructuralMatrices, a: np.ndarray,
                        column: np.ndarray) -> np.ndarray:
    crev = _reversed_controllability(sys.A, column)
    toeplitz = _toeplitz(sys.A, column, sys.C)
    return sys.C[0] @ crev + a @ toeplitz


def io_form(sys: ContinuousLTISystem) -> IOCoefficients:
    """Input-output coefficients (a, b, d) of an observable system."""
    sm = structural_matrices(sys)
    n = sys.order
    a = -(sys.C[0] @ np.linalg.matrix_power(sys.A, n) @ sm.O_inv)
    b = sys.C[0] @ sm.crev + a @ sm.toeplitz
    d = 0.0
    if sys.disturbance_gain is not None and sys.disturbance != 0.0:
        # derivatives of the constant pseudo-input vanish; only the zeroth-order term survives
        d = float(_input_coefficients(sys, sm, a, sys.disturbance_gain)[0] * sys.disturbance)
    _check_characteristic(sys.A, a)
    return IOCoefficients(a=a, b=b, d=d)


def characteristic_deviation(A: np.ndarray, a) -> float:
    """Largest deviation of a from the characteristic polynomial of A, relative to its largest coefficient."""
    # a holds the coefficients below the leading one, lowest degree first
    expected = np.poly(A)[::-1][:-1]
    scale = float(np.max(np.abs(expected))) or 1.0
    return float(np.max(np.abs(expected - np.asarray(a, dtype=float)))) / scale


def _check_characteristic(A: np.ndarray, a: np.ndarray) -> None:
    deviation = characteristic_deviation(A, a)
    if deviation > CHARACTERISTIC_TOLERANCE:
        logger.warning("input-output coefficients deviate from the characteristic polynomial of A by %.1e", deviation)


def canonical_state(y_bar, u_bar, sm: StructuralMatrices) -> np.ndarray:
    """Observability-canonical state ybar - Toep*ubar."""
    y_bar = np.asarray(y_bar, dtype=float).ravel()
    u_bar = np.asarray(u_bar, dtype=float).ravel()
    if y_bar.size != sm.order or u_bar.size != sm.order:
        raise ValueError(f"expected vectors of length {sm.order}, got {y_bar.size} and {u_bar.size}")
    return y_bar - sm.toeplitz @ u_bar


def original_state(sm: StructuralMatrices, x_bar) -> np.ndarray:
    x_bar = np.asarray(x_bar, dtype=float).ravel()
    if x_bar.size != sm.order:
        raise ValueError(f"expected a vector of length {sm.order}, got {x_bar.size}")
    return sm.O_inv @ x_bar


def canonical_system(coeffs: IOCoefficients) -> ContinuousLTISystem:
    """Observer-canonical realization of the input-output form."""
    n = coeffs.order
    A = np.zeros((n, n))
    A[:, 0] = -coeffs.a[::-1]
    A[:-1, 1:] = np.eye(n - 1)
    B = coeffs.b[::-1]
    C = np.zeros(n)
    C[0] = 1.0
    E = np.zeros(n)
    E[-1] = 1.0
    return ContinuousLTISystem(A=A, B=B, C=C, disturbance_gain=E, disturbance=coeffs.d)


def equilibrium_state(sys: ContinuousLTISystem, u: float = 0.0) -> np.ndarray:
    """Steady state for a constant input."""
    return linalg.solve(sys.A, -(sys.B[:, 0] * u + sys.forcing))
