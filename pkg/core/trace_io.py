"""
CSV and JSON files of trajectories, estimate traces and run reports.

Trajectory files have the header t,u,y[,x1,x2,...] with one row per
sampling tick.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd

from .errors import SchemaError
from .models import EstimateTrace, RunReport, Trajectory

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ('t', 'u', 'y')
JITTER_TOLERANCE = 1e-3
FLOAT_FORMAT = '%.17g'

PathLike = Union[str, Path]


def _line(row: int) -> int:
    # header is line 1
    return row + 2


def load_csv(path: PathLike) -> Trajectory:
    """Trajectory from a CSV file; states are read from x1, x2, ... when present."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision='round_trip', encoding='utf-8')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    for column in REQUIRED_COLUMNS:
        if column not in frame.columns:
            raise SchemaError(f"{path}: missing column '{column}'", line=1)
    state_columns = sorted((c for c in frame.columns if c.startswith('x') and c[1:].isdigit()),
                           key=lambda c: int(c[1:]))
    columns = list(REQUIRED_COLUMNS) + state_columns
    for column in columns:
        values = pd.to_numeric(frame[column], errors='coerce')
        bad = np.flatnonzero(values.isna().to_numpy())
        if bad.size:
            raise SchemaError(f"{path}: non-numeric value in column '{column}'", line=_line(int(bad[0])))
        frame[column] = values
    if len(frame) < 2:
        raise SchemaError(f"{path}: at least two samples are required")

    t = frame['t'].to_numpy(dtype=float)
    steps = np.diff(t)
    Ts = float(np.median(steps))
    if Ts <= 0:
        raise SchemaError(f"{path}: time column is not increasing", line=_line(1))
    deviation = np.abs(t - (t[0] + Ts * np.arange(t.size))) / Ts
    jittered = np.flatnonzero(deviation > JITTER_TOLERANCE)
    if jittered.size:
        row = int(jittered[0])
        raise SchemaError(f"{path}: sample at t={t[row]} is off the uniform grid Ts={Ts}", line=_line(row))

    x = frame[state_columns].to_numpy(dtype=float) if state_columns else None
    logger.debug("loaded %d samples from %s (Ts=%g)", t.size, path, Ts)
    return Trajectory(t=t, u=frame['u'].to_numpy(dtype=float), y=frame['y'].to_numpy(dtype=float), x=x)


def write_trajectory(path: PathLike, trajectory: Trajectory) -> Path:
    path = Path(path)
    data = {'t': trajectory.t, 'u': trajectory.u, 'y': trajectory.y}
    if trajectory.x is not None:
        for i in range(trajectory.x.shape[1]):
            data[f'x{i + 1}'] = trajectory.x[:, i]
    pd.DataFrame(data).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def trace_frame(trace: EstimateTrace) -> pd.DataFrame:
    frame = pd.DataFrame(trace.as_array(), columns=list(trace.labels))
    frame.insert(0, 't', trace.times)
    frame['valid'] = np.asarray(trace.valid, dtype=int)
    frame['stale'] = np.asarray(trace.stale, dtype=int)
    return frame


def write_trace(path: PathLike, trace: EstimateTrace, extra: Dict[str, np.ndarray] = None) -> Path:
    """One row per tick; invalid ticks carry empty values."""
    path = Path(path)
    frame = trace_frame(trace)
    for name, values in (extra or {}).items():
        frame[name] = values
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def write_plot_data(path: PathLike, t: np.ndarray, series: Dict[str, np.ndarray]) -> Path:
    """Tidy (t, series, value) rows for external plotting."""
    path = Path(path)
    frames: List[pd.DataFrame] = []
    for name, values in series.items():
        frames.append(pd.DataFrame({'t': t, 'series': name, 'value': values}))
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=['t', 'series', 'value'])
    frame.dropna(subset=['value']).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def write_report(path: PathLike, report: RunReport, format: str = 'json') -> Path:
    """JSON document, or one CSV row per (estimator, quantity)."""
    path = Path(path)
    data = report.to_dict()
    if format == 'json':
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, sort_keys=True)
            f.write('\n')
        return path
    if format != 'csv':
        raise ValueError(f"unknown report format '{format}'")
    rows = []
    for name, summary in sorted(data['estimators'].items()):
        for key, value in sorted(_flatten(summary).items()):
            rows.append({'estimator': name, 'quantity': key, 'value': value})
    for name, counts in sorted(data['warnings'].items()):
        for key, value in sorted(counts.items()):
            rows.append({'estimator': name, 'quantity': f'warnings.{key}', 'value': value})
    pd.DataFrame(rows, columns=['estimator', 'quantity', 'value']).to_csv(
        path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def _flatten(data: Dict, prefix: str = '') -> Dict[str, object]:
    result = {}
    for key, value in data.items():
        name = f'{prefix}{key}'
        if isinstance(value, dict):
            result.update(_flatten(value, f'{name}.'))
        else:
            result[name] = value
    return result
