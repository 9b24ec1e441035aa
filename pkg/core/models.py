"""
Data models for the estimation harness.
"""

from dataclasses import dataclass, field
from typing import Optional, List, Dict, Any, Tuple

import numpy as np

from .errors import ConfigError
from .lti import MAX_ORDER, IOCoefficients


PARAMETER_KINDS = ('batch', 'gramian', 'normalized', 'direct', 'offline')
STATE_KINDS = ('state-mf', 'luenberger')
PLANT_KINDS = ('rc', 'sinusoid', 'external-csv')
PROFILE_KINDS = ('pulse', 'prbs', 'sine', 'constant', 'csv')
HOLDS = ('riemann', 'zero', 'linear')


def _number(data: Dict[str, Any], key: str, path: str, default=None, positive: bool = False,
            minimum: Optional[float] = None) -> float:
    value = data.get(key, default)
    if value is None:
        raise ConfigError(f"{path}.{key}", "is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(f"{path}.{key}", f"must be positive, got {value}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}.{key}", f"must be >= {minimum}, got {value}")
    return float(value)


def _integer(data: Dict[str, Any], key: str, path: str, default=None, minimum: Optional[int] = None,
             maximum: Optional[int] = None) -> Optional[int]:
    value = data.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}.{key}", f"must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ConfigError(f"{path}.{key}", f"must be <= {maximum}, got {value}")
    return value


def _number_list(data: Dict[str, Any], key: str, path: str, size: int) -> Optional[List[float]]:
    value = data.get(key)
    if value is None:
        return None
    if (not isinstance(value, list) or len(value) != size
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)):
        raise ConfigError(f"{path}.{key}", f"expected a list of {size} numbers, got {value!r}")
    return [float(v) for v in value]


def _choice(data: Dict[str, Any], key: str, path: str, choices, default=None) -> str:
    value = data.get(key, default)
    if value not in choices:
        raise ConfigError(f"{path}.{key}", f"expected one of {', '.join(choices)}, got {value!r}")
    return value


def _multiple_of(value: float, step: float) -> bool:
    ratio = value / step
    return abs(ratio - round(ratio)) < 1e-9 * max(1.0, ratio)


@dataclass
class RCParams:
    """Physical parameters of the two-node AHU heat-flow network."""
    C_m: float = 10.0
    C_s: float = 50.0
    R_ms: float = 2.0
    R_sr: float = 5.0
    T_r: float = 20.0

    def __post_init__(self):
        for name in ('C_m', 'C_s', 'R_ms', 'R_sr'):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)}")

    def to_dict(self) -> Dict[str, Any]:
        return {'C_m': self.C_m, 'C_s': self.C_s, 'R_ms': self.R_ms, 'R_sr': self.R_sr, 'T_r': self.T_r}

    @classmethod
    def from_dict(cls, data: Dict[str, Any], path: str = 'plant') -> 'RCParams':
        values = {key: _number(data, key, path, default=getattr(cls, key), positive=key != 'T_r')
                  for key in ('C_m', 'C_s', 'R_ms', 'R_sr', 'T_r')}
        return cls(**values)


@dataclass
class InputProfile:
    kind: str = 'pulse'
    amplitude: float = 1.5
    period: float = 1200.0
    duty: float = 0.5
    start: float = 0.0
    offset: float = 0.0
    gain: float = 1.0
    chip: float = 60.0
    register: int = 7
    seed: int = 1
    path: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        result = {
            'kind': self.kind,
            'amplitude': self.amplitude,
            'period': self.period,
            'duty': self.duty,
            'start': self.start,
            'offset': self.offset,
            'gain': self.gain,
            'chip': self.chip,
            'register': self.register,
            'seed': self.seed
        }
        if self.path:
            result['path'] = self.path
        return result

    @classmethod
    def from_dict(cls, data: Dict[str, Any], path: str = 'input', seed: int = 1) -> 'InputProfile':
        kind = _choice(data, 'kind', path, PROFILE_KINDS, default='pulse')
        periodic = kind in ('pulse', 'sine')
        duty = _number(data, 'duty', path, default=0.5)
        if not 0.0 < duty <= 1.0:
            raise ConfigError(f"{path}.duty", f"must be in (0, 1], got {duty}")
        if kind == 'csv' and not data.get('path'):
            raise ConfigError(f"{path}.path", "is required for csv profiles")
        return cls(
            kind=kind,
            amplitude=_number(data, 'amplitude', path, default=1.5),
            period=_number(data, 'period', path, default=1200.0, positive=periodic),
            duty=duty,
            start=_number(data, 'start', path, default=0.0),
            offset=_number(data, 'offset', path, default=0.0),
            gain=_number(data, 'gain', path, default=1.0),
            chip=_number(data, 'chip', path, default=60.0, positive=True),
            register=int(_number(data, 'register', path, default=7, positive=True)),
            seed=int(data.get('seed', seed)),
            path=data.get('path')
        )


@dataclass
class PlantSpec:
    kind: str = 'rc'
    params: RCParams = field(default_factory=RCParams)
    x0: Optional[List[float]] = None
    amplitude: float = 15.0
    omega: float = 2.0
    path: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == 'external-csv':
            return {'kind': self.kind, 'path': self.path}
        if self.kind == 'sinusoid':
            return {'kind': self.kind, 'amplitude': self.amplitude, 'omega': self.omega}
        result = {'kind': self.kind, **self.params.to_dict()}
        if self.x0 is not None:
            result['x0'] = list(self.x0)
        return result

    @classmethod
    def from_dict(cls, data: Dict[str, Any], path: str = 'plant') -> 'PlantSpec':
        kind = _choice(data, 'kind', path, PLANT_KINDS, default='rc')
        if kind == 'external-csv':
            if not data.get('path'):
                raise ConfigError(f"{path}.path", "is required for external-csv plants")
            return cls(kind=kind, path=data['path'])
        if kind == 'sinusoid':
            return cls(
                kind=kind,
                amplitude=_number(data, 'amplitude', path, default=15.0),
                omega=_number(data, 'omega', path, default=2.0, positive=True)
            )
        x0 = data.get('x0')
        if x0 is not None and (not isinstance(x0, list) or len(x0) != 2):
            raise ConfigError(f"{path}.x0", "expected a list of two temperatures")
        return cls(kind=kind, params=RCParams.from_dict(data, path), x0=x0)


@dataclass
class NoiseSpec:
    amplitude: float = 0.0
    seed: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {'amplitude': self.amplitude, 'seed': self.seed}

    @classmethod
    def from_dict(cls, data: Dict[str, Any], path: str = 'noise') -> 'NoiseSpec':
        seed = data.get('seed')
        return cls(
            amplitude=_number(data, 'amplitude', path, default=0.0, minimum=0.0),
            seed=int(seed) if seed is not None else None
        )


@dataclass
class SamplingSpec:
    Ts: float = 2.0
    duration: float = 6000.0

    def to_dict(self) -> Dict[str, Any]:
        return {'Ts': self.Ts, 'duration': self.duration}

    @classmethod
    def from_dict(cls, data: Dict[str, Any], path: str = 'sampling') -> 'SamplingSpec':
        Ts = _number(data, 'Ts', path, default=2.0, positive=True)
        duration = _number(data, 'duration', path, default=6000.0, positive=True)
        if duration < Ts:
            raise ConfigError(f"{path}.duration", f"must be at least Ts={Ts}")
        return cls(Ts=Ts, duration=duration)


@dataclass
class EstimatorSpec:
    """One estimator of a scenario; unused fields keep their defaults."""
    name: str
    kind: str
    T: float = 2000.0
    T_prime: float = 2000.0
    n: int = 2
    include_d: bool = True
    include_u: bool = True
    orders: List[int] = field(default_factory=lambda: [2, 3, 4, 5, 6, 7])
    free: Optional[List[str]] = None
    stride: int = 1
    kernel: Optional[Dict[str, Any]] = None
    mf_order: int = 2
    mode: str = 'left'
    m_l: Optional[int] = None
    coefficients: Any = 'truth'
    update_stride: Optional[float] = None
    poles: Optional[List[float]] = None
    pole_factor: float = 2.5
    hold_y: str = 'linear'
    hold_u: str = 'zero'
    x0: Optional[List[float]] = None

    @property
    def is_parameter_estimator(self) -> bool:
        return self.kind in PARAMETER_KINDS

    def to_dict(self) -> Dict[str, Any]:
        result = {
            'name': self.name,
            'kind': self.kind,
            'T': self.T,
            'n': self.n,
            'hold_y': self.hold_y,
            'hold_u': self.hold_u
        }
        if self.is_parameter_estimator:
            result.update({'T_prime': self.T_prime, 'include_d': self.include_d, 'include_u': self.include_u})
        if self.kind in ('batch', 'gramian', 'offline'):
            result['orders'] = list(self.orders)
        if self.free is not None:
            result['free'] = list(self.free)
        if self.kind == 'normalized':
            result['stride'] = self.stride
        if self.kind in ('gramian', 'direct') and self.kernel is not None:
            result['kernel'] = dict(self.kernel)
        if self.kind == 'direct':
            result['mf_order'] = self.mf_order
        if self.kind == 'state-mf':
            result.update({'mode': self.mode, 'm_l': self.m_l})
        if self.kind in STATE_KINDS:
            result['coefficients'] = self.coefficients
            if self.update_stride is not None:
                result['update_stride'] = self.update_stride
        if self.kind == 'luenberger':
            result.update({'poles': self.poles, 'pole_factor': self.pole_factor, 'x0': self.x0})
        return result

    @classmethod
    def from_dict(cls, data: Dict[str, Any], path: str, Ts: float) -> 'EstimatorSpec':
        kind = _choice(data, 'kind', path, PARAMETER_KINDS + STATE_KINDS)
        state = kind in STATE_KINDS
        T = _number(data, 'T', path, default=50.0 if state else 2000.0, positive=True)
        T_prime = _number(data, 'T_prime', path, default=2000.0, positive=True)
        for key, value in (('T', T), ('T_prime', T_prime)):
            if not _multiple_of(value, Ts):
                raise ConfigError(f"{path}.{key}", f"{value} is not a multiple of Ts={Ts}")
        n = _integer(data, 'n', path, default=2, minimum=1, maximum=MAX_ORDER)
        orders = data.get('orders', [2, 3, 4, 5, 6, 7])
        if (not isinstance(orders, list) or not orders
                or any(isinstance(k, bool) or not isinstance(k, int) or k < n for k in orders)):
            raise ConfigError(f"{path}.orders", f"expected a non-empty list of integers >= n={n}")
        mf_order = _integer(data, 'mf_order', path, default=max(2, n), minimum=n)
        m_l = _integer(data, 'm_l', path, minimum=n)
        coefficients = data.get('coefficients', 'truth')
        if not (isinstance(coefficients, dict) or coefficients == 'truth'
                or (isinstance(coefficients, str) and coefficients.startswith('estimator:'))):
            raise ConfigError(f"{path}.coefficients", "expected 'truth', 'estimator:<name>' or a coefficient table")
        kernel = data.get('kernel')
        if kernel is not None and not isinstance(kernel, dict):
            raise ConfigError(f"{path}.kernel", f"expected a table, got {kernel!r}")
        if kernel is not None and kernel.get('family') not in ('poly-total', 'uniform', 'exponential'):
            raise ConfigError(f"{path}.kernel.family", "expected 'poly-total', 'uniform' or 'exponential'")
        update_stride = data.get('update_stride')
        if update_stride is not None:
            update_stride = _number(data, 'update_stride', path, positive=True)
        free = data.get('free')
        if free is not None and (not isinstance(free, list) or any(not isinstance(f, str) for f in free)):
            raise ConfigError(f"{path}.free", f"expected a list of parameter labels, got {free!r}")
        return cls(
            name=str(data.get('name', kind)),
            kind=kind,
            T=T,
            T_prime=T_prime,
            n=n,
            include_d=bool(data.get('include_d', True)),
            include_u=bool(data.get('include_u', True)),
            orders=orders,
            free=free,
            stride=_integer(data, 'stride', path, default=1, minimum=1),
            kernel=kernel,
            mf_order=mf_order,
            mode=_choice(data, 'mode', path, ('left', 'right'), default='left'),
            m_l=m_l,
            coefficients=coefficients,
            update_stride=update_stride,
            poles=_number_list(data, 'poles', path, n),
            pole_factor=_number(data, 'pole_factor', path, default=2.5, positive=True),
            hold_y=_choice(data, 'hold_y', path, HOLDS, default='linear'),
            hold_u=_choice(data, 'hold_u', path, HOLDS, default='zero'),
            x0=_number_list(data, 'x0', path, n)
        )


@dataclass
class OutputSpec:
    dir: str = 'out'
    format: str = 'json'

    def to_dict(self) -> Dict[str, Any]:
        return {'dir': self.dir, 'format': self.format}

    @classmethod
    def from_dict(cls, data: Dict[str, Any], path: str = 'output') -> 'OutputSpec':
        return cls(
            dir=str(data.get('dir', 'out')),
            format=_choice(data, 'format', path, ('csv', 'json'), default='json')
        )


@dataclass
class ScenarioConfig:
    name: str
    plant: PlantSpec
    input: InputProfile
    noise: NoiseSpec
    sampling: SamplingSpec
    estimators: List[EstimatorSpec]
    output: OutputSpec = field(default_factory=OutputSpec)
    seed: int = 0

    @property
    def noise_seed(self) -> int:
        return self.noise.seed if self.noise.seed is not None else self.seed

    def estimator(self, name: str) -> Optional[EstimatorSpec]:
        for spec in self.estimators:
            if spec.name == name:
                return spec
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'seed': self.seed,
            'plant': self.plant.to_dict(),
            'input': self.input.to_dict(),
            'noise': self.noise.to_dict(),
            'sampling': self.sampling.to_dict(),
            'estimators': [e.to_dict() for e in self.estimators],
            'output': self.output.to_dict()
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ScenarioConfig':
        if not isinstance(data, dict):
            raise ConfigError('', "scenario must be a JSON object")
        seed = data.get('seed', 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError('seed', f"expected an integer, got {seed!r}")
        sampling = SamplingSpec.from_dict(data.get('sampling', {}))
        raw_estimators = data.get('estimators', [])
        if not isinstance(raw_estimators, list) or not raw_estimators:
            raise ConfigError('estimators', "at least one estimator must be enabled")
        estimators = [
            EstimatorSpec.from_dict(entry, f"estimators[{i}]", sampling.Ts)
            for i, entry in enumerate(raw_estimators)
        ]
        names = [e.name for e in estimators]
        for i, name in enumerate(names):
            if names.index(name) != i:
                raise ConfigError(f"estimators[{i}].name", f"duplicate estimator name '{name}'")
        for i, spec in enumerate(estimators):
            source = spec.coefficients
            if spec.kind in STATE_KINDS and isinstance(source, str) and source.startswith('estimator:'):
                target = source.split(':', 1)[1]
                if target not in names or not estimators[names.index(target)].is_parameter_estimator:
                    raise ConfigError(f"estimators[{i}].coefficients", f"no parameter estimator named '{target}'")
        plant = PlantSpec.from_dict(data.get('plant', {}))
        for i, spec in enumerate(estimators):
            if plant.kind != 'rc' and spec.kind in STATE_KINDS and spec.coefficients == 'truth':
                raise ConfigError(f"estimators[{i}].coefficients", "'truth' needs a simulated rc plant")
        return cls(
            name=str(data.get('name', 'scenario')),
            plant=plant,
            input=InputProfile.from_dict(data.get('input', {}), seed=seed + 1),
            noise=NoiseSpec.from_dict(data.get('noise', {})),
            sampling=sampling,
            estimators=estimators,
            output=OutputSpec.from_dict(data.get('output', {})),
            seed=seed
        )


@dataclass
class Trajectory:
    """Uniformly sampled record of input, measured output and (optionally) true state."""
    t: np.ndarray
    u: np.ndarray
    y: np.ndarray
    x: Optional[np.ndarray] = None
    y_clean: Optional[np.ndarray] = None
    noise_amplitude: float = 0.0
    noise_seed: Optional[int] = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if not (self.t.shape == self.u.shape == self.y.shape) or self.t.ndim != 1:
            raise ValueError("t, u and y must be one-dimensional and of equal length")
        if self.x is not None:
            self.x = np.asarray(self.x, dtype=float)
            if self.x.shape[0] != self.t.size:
                raise ValueError("state history must have one row per sample")

    def __len__(self) -> int:
        return self.t.size

    @property
    def Ts(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    @property
    def reference_output(self) -> np.ndarray:
        """Noise-free output when known, the measurement otherwise."""
        return self.y_clean if self.y_clean is not None else self.y


@dataclass
class ParameterEstimate:
    theta: np.ndarray
    labels: Tuple[str, ...]
    time: float
    valid_from: float
    method: str
    condition: float = 1.0
    stale: bool = False

    def to_coefficients(self) -> IOCoefficients:
        values = dict(zip(self.labels, self.theta))
        n = sum(1 for label in self.labels if label.startswith('-a'))
        return IOCoefficients(
            a=[-values.get(f'-a{i}', 0.0) for i in range(n)],
            b=[values.get(f'b{i}', 0.0) for i in range(n)],
            d=values.get('d', 0.0)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'time': self.time,
            'valid_from': self.valid_from,
            'method': self.method,
            'condition': self.condition,
            'stale': self.stale,
            'theta': {label: float(value) for label, value in zip(self.labels, self.theta)}
        }


@dataclass
class StateEstimate:
    x_hat: np.ndarray
    time: float
    method: str
    stale: bool = False

    def __post_init__(self):
        self.x_hat = np.asarray(self.x_hat, dtype=float)
        if not np.all(np.isfinite(self.x_hat)):
            raise ValueError("state estimate has non-finite entries")


@dataclass
class RegressionSample:
    """z = W^T theta over one window; one column of W per modulating function."""
    z: np.ndarray
    W: np.ndarray
    time: float

    def __post_init__(self):
        self.z = np.atleast_1d(np.asarray(self.z, dtype=float))
        self.W = np.asarray(self.W, dtype=float).reshape(-1, self.z.size)


@dataclass
class EstimateTrace:
    """Time-indexed estimates of one estimator, with validity flags."""
    method: str
    labels: Tuple[str, ...]
    times: List[float] = field(default_factory=list)
    values: List[np.ndarray] = field(default_factory=list)
    valid: List[bool] = field(default_factory=list)
    stale: List[bool] = field(default_factory=list)

    def append(self, time: float, value: Optional[np.ndarray], stale: bool = False) -> None:
        self.times.append(float(time))
        if value is None:
            self.values.append(np.full(len(self.labels), np.nan))
            self.valid.append(False)
        else:
            self.values.append(np.asarray(value, dtype=float))
            self.valid.append(True)
        self.stale.append(bool(stale))

    @property
    def first_valid_time(self) -> Optional[float]:
        for time, ok in zip(self.times, self.valid):
            if ok:
                return time
        return None

    def last_valid(self) -> Optional[np.ndarray]:
        for value, ok in zip(reversed(self.values), reversed(self.valid)):
            if ok:
                return value
        return None

    def as_array(self) -> np.ndarray:
        if not self.values:
            return np.empty((0, len(self.labels)))
        return np.vstack(self.values)


@dataclass
class RunReport:
    scenario: str
    seed: int
    estimators: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)
    warnings: Dict[str, Dict[str, int]] = field(default_factory=dict)
    seconds_per_tick: Dict[str, float] = field(default_factory=dict)

    @property
    def failed(self) -> List[str]:
        return [name for name, summary in self.estimators.items() if summary.get('first_valid') is None]

    def to_dict(self) -> Dict[str, Any]:
        """Serializable form; timings are left out so reports are reproducible."""
        return {
            'scenario': self.scenario,
            'seed': self.seed,
            'estimators': self.estimators,
            'warnings': self.warnings,
            'files': list(self.files)
        }
