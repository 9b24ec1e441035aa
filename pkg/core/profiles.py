"""
Input profiles driving the simulated plant.
"""

from typing import List

import numpy as np

from .models import InputProfile

# feedback taps of maximal-length Fibonacci registers
PRBS_TAPS = {
    2: [2, 1],
    3: [3, 2],
    4: [4, 3],
    5: [5, 3],
    6: [6, 5],
    7: [7, 6],
    9: [9, 5],
    10: [10, 7],
    11: [11, 9],
}


def prbs_bits(seed: int, register: int = 7) -> List[int]:
    """One period (2^register - 1 bits) of a maximal-length sequence."""
    if register not in PRBS_TAPS:
        raise ValueError(f"unsupported PRBS register length {register}")
    taps = PRBS_TAPS[register]
    mask = 2 ** register - 1
    state = seed & mask or 1  # the all-zero state is a fixed point
    bits = []
    for _ in range(mask):
        bits.append(state & 1)
        feedback = 0
        for tap in taps:
            feedback ^= state >> (tap - 1)
        state = ((state << 1) | (feedback & 1)) & mask
    return bits


def evaluate(profile: InputProfile, t: np.ndarray) -> np.ndarray:
    """Input samples on a time grid; the plant holds each sample until the next one."""
    t = np.asarray(t, dtype=float)
    kind = profile.kind
    if kind == 'constant':
        u = np.full_like(t, profile.amplitude)
    elif kind == 'pulse':
        phase = np.mod(t - profile.start, profile.period)
        u = np.where((t >= profile.start) & (phase < profile.duty * profile.period), profile.amplitude, 0.0)
    elif kind == 'sine':
        u = profile.amplitude * np.sin(2.0 * np.pi * t / profile.period)
    elif kind == 'prbs':
        bits = np.asarray(prbs_bits(profile.seed, profile.register), dtype=float)
        chip = np.floor(t / profile.chip).astype(int) % bits.size
        u = profile.amplitude * bits[chip]
    elif kind == 'csv':
        from .trace_io import load_csv
        recorded = load_csv(profile.path)
        index = np.searchsorted(recorded.t, t, side='right') - 1
        u = recorded.u[np.clip(index, 0, recorded.t.size - 1)]
    else:
        raise ValueError(f"unknown input profile kind '{kind}'")
    return profile.gain * (u + profile.offset)
