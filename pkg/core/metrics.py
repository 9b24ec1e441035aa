"""
Goodness-of-fit and error summaries of estimation runs.
"""

import logging
from typing import Dict, Sequence

import numpy as np

from .errors import DegenerateSignal
from .lti import IOCoefficients, equilibrium_state
from .models import Trajectory
from .plant import realize, simulate_input

logger = logging.getLogger(__name__)


def fit_percent(y_measured: Sequence[float], y_model: Sequence[float]) -> float:
    """100 (1 - |y - y_model| / |y - mean(y)|)."""
    y = np.asarray(y_measured, dtype=float)
    y_hat = np.asarray(y_model, dtype=float)
    if y.shape != y_hat.shape or y.size < 2:
        raise ValueError("signals must have equal length of at least two samples")
    spread = np.linalg.norm(y - y.mean())
    if spread == 0:
        raise DegenerateSignal("measured output is constant")
    return float(100.0 * (1.0 - np.linalg.norm(y - y_hat) / spread))


def resimulate(coeffs: IOCoefficients, trajectory: Trajectory, substeps: int = 4) -> np.ndarray:
    """Model output for the recorded input, starting at the equilibrium of the first input sample."""
    system = realize(coeffs)
    x0 = equilibrium_state(system, trajectory.u[0])
    return simulate_input(system, trajectory.t, trajectory.u, x0, substeps).y


def relative_errors(estimate: IOCoefficients, truth: IOCoefficients) -> Dict[str, float]:
    """|estimate - truth| / |truth| per coefficient; absolute error where the truth is zero."""
    result = {}
    truth_values = truth.to_dict()
    for key, value in estimate.to_dict().items():
        reference = truth_values.get(key, 0.0)
        error = abs(value - reference)
        result[key] = float(error / abs(reference)) if reference != 0 else float(error)
    return result


def state_errors(x_hat: np.ndarray, x_true: np.ndarray) -> np.ndarray:
    """Sup-norm error per sample; NaN where no estimate exists."""
    x_hat = np.asarray(x_hat, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    if x_hat.shape != x_true.shape:
        raise ValueError(f"state histories differ in shape: {x_hat.shape} vs {x_true.shape}")
    with np.errstate(invalid='ignore'):
        return np.max(np.abs(x_hat - x_true), axis=1)
