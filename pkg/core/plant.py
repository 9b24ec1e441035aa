"""
Simulated air-handling-unit heat-flow plant: a two-node RC network
(air/sensor node T_m, envelope node T_e) heated by Q_h and coupled to a
constant room temperature T_r.
"""

import logging
from dataclasses import replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import Unphysical
from .lti import ContinuousLTISystem, IOCoefficients, canonical_system, equilibrium_state
from .models import InputProfile, RCParams, Trajectory
from .profiles import evaluate

logger = logging.getLogger(__name__)


def rc_system(p: RCParams) -> ContinuousLTISystem:
    """State-space model with x = (T_m, T_e), u = Q_h, y = T_m."""
    k1 = 1.0 / (p.C_m * p.R_ms)
    A = np.array([
        [-k1, k1],
        [1.0 / (p.C_s * p.R_ms), -1.0 / (p.C_s * p.R_ms) - 1.0 / (p.C_s * p.R_sr)],
    ])
    return ContinuousLTISystem(
        A=A,
        B=[1.0 / p.C_m, 0.0],
        C=[1.0, 0.0],
        disturbance_gain=[0.0, 1.0 / (p.C_s * p.R_sr)],
        disturbance=p.T_r
    )


def rc_params_truth(p: RCParams) -> IOCoefficients:
    """Input-output coefficients in closed form."""
    k1 = 1.0 / (p.C_m * p.R_ms)
    k2 = 1.0 / (p.C_s * p.R_ms)
    k3 = 1.0 / (p.C_s * p.R_sr)
    a0 = k1 * k3
    b1 = 1.0 / p.C_m
    return IOCoefficients(a=[a0, k1 + k2 + k3], b=[b1 * (k2 + k3), b1], d=a0 * p.T_r)


def io_to_physical(coeffs: IOCoefficients) -> RCParams:
    """Invert the closed-form map; raises Unphysical naming the first violated inequality."""
    if coeffs.order != 2:
        raise ValueError(f"the RC network is second order, got order {coeffs.order}")
    a0, a1 = coeffs.a
    b0, b1 = coeffs.b
    if not b1 > 0:
        raise Unphysical("b1 > 0")
    k1 = a1 - b0 / b1
    if not k1 > 0:
        raise Unphysical("a1 - b0/b1 > 0")
    if not a0 > 0:
        raise Unphysical("a0 > 0")
    k3 = a0 / k1
    k2 = b0 / b1 - k3
    if not k2 > 0:
        raise Unphysical("b0/b1 - a0/(a1 - b0/b1) > 0")
    C_m = 1.0 / b1
    R_ms = 1.0 / (C_m * k1)
    C_s = 1.0 / (R_ms * k2)
    R_sr = 1.0 / (C_s * k3)
    return RCParams(C_m=C_m, C_s=C_s, R_ms=R_ms, R_sr=R_sr, T_r=coeffs.d / a0)


def realize(coeffs: IOCoefficients) -> ContinuousLTISystem:
    """Physical RC realization when possible, observer-canonical otherwise."""
    if coeffs.order == 2:
        try:
            return rc_system(io_to_physical(coeffs))
        except Unphysical as exc:
            logger.warning("coefficients %s are not an RC network (%s); using the canonical realization",
                           coeffs.to_dict(), exc.inequality)
    return canonical_system(coeffs)


def rk4_step(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + h * (k1 + 2.0 * (k2 + k3) + k4) / 6.0


def simulate(sys: ContinuousLTISystem, profile: InputProfile, x0: Optional[Sequence[float]] = None,
             Ts: float = 2.0, duration: float = 6000.0, substeps: int = 4) -> Trajectory:
    """Fixed-step RK4 with the input held constant between samples."""
    if Ts <= 0:
        raise ValueError(f"Ts must be positive, got {Ts}")
    if duration < Ts:
        raise ValueError(f"duration {duration} is shorter than Ts={Ts}")
    steps = int(round(duration / Ts))
    t = Ts * np.arange(steps + 1)
    return simulate_input(sys, t, evaluate(profile, t), x0, substeps)


def simulate_input(sys: ContinuousLTISystem, t: np.ndarray, u: np.ndarray,
                   x0: Optional[Sequence[float]] = None, substeps: int = 4) -> Trajectory:
    """Response to a sampled input held constant between uniform samples t."""
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    if t.size != u.size or t.size < 2:
        raise ValueError("t and u must be equally long with at least two samples")
    Ts = float(t[1] - t[0])
    x = equilibrium_state(sys, u[0]) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x.size != sys.order:
        raise ValueError(f"x0 must have {sys.order} entries, got {x.size}")

    h = Ts / substeps
    states = np.empty((t.size, sys.order))
    states[0] = x
    for k in range(t.size - 1):
        uk = u[k]
        f = lambda state: sys.derivative(state, uk)
        for _ in range(substeps):
            x = rk4_step(f, x, h)
        states[k + 1] = x

    y = states @ sys.C[0]
    return Trajectory(t=t, u=u, y=y, x=states, y_clean=y.copy())


def simulate_sinusoid(amplitude: float, omega: float, Ts: float, duration: float) -> Trajectory:
    """Autonomous oscillator y = A sin(omega t); the state is (y, y')."""
    steps = int(round(duration / Ts))
    t = Ts * np.arange(steps + 1)
    y = amplitude * np.sin(omega * t)
    x = np.column_stack((y, amplitude * omega * np.cos(omega * t)))
    return Trajectory(t=t, u=np.zeros_like(t), y=y, x=x, y_clean=y.copy())


def sinusoid_truth(omega: float) -> IOCoefficients:
    return IOCoefficients(a=[omega ** 2, 0.0], b=[0.0, 0.0], d=0.0)


def add_noise(traj: Trajectory, amplitude: float, seed: Optional[int] = None) -> Trajectory:
    """Uniform measurement noise on y; the true state and clean output are kept."""
    if amplitude < 0:
        raise ValueError(f"noise amplitude must be >= 0, got {amplitude}")
    clean = traj.reference_output.copy()
    if amplitude == 0:
        return replace(traj, y=traj.y.copy(), y_clean=clean, noise_amplitude=0.0, noise_seed=seed)
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-amplitude, amplitude, size=traj.y.size)
    return replace(traj, y=traj.y + noise, y_clean=clean, noise_amplitude=amplitude, noise_seed=seed)
