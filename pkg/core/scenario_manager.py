"""
Scenario management for mfestimate: builds the plant and the estimators of a
scenario, streams the samples through them and writes traces and reports.
"""

import json
import logging
import time
from collections import defaultdict
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from .config import Config
from .errors import ConfigError, EstimationError
from .estimators import (BatchEstimator, DirectEstimator, GramianEstimator, ModelStructure,
                         NormalizedEstimator, estimate_offline, fixed_bank)
from .lti import ContinuousLTISystem, IOCoefficients
from .metrics import fit_percent, relative_errors, resimulate, state_errors
from .models import EstimateTrace, EstimatorSpec, ParameterEstimate, RunReport, ScenarioConfig, Trajectory
from .modfunc import make_mf_generator
from .plant import add_noise, rc_params_truth, rc_system, realize, simulate, simulate_sinusoid, sinusoid_truth
from .state_estimators import LuenbergerObserver, MFStateEstimator
from .trace_io import load_csv, write_plot_data, write_report, write_trace, write_trajectory

logger = logging.getLogger(__name__)

STATE_MODE_NAMES = {'left': 'left', 'right': 'right_reversed'}


class ScenarioManager:
    """Runs scenarios described by ScenarioConfig."""

    def __init__(self, config: Config):
        self.config = config

    def list_scenarios(self) -> Dict[str, str]:
        return self.config.scenario_descriptions()

    def validate(self, name_or_path: Union[str, Path]) -> ScenarioConfig:
        """Load and check a scenario, including the estimator constructors."""
        scenario = self.config.load_scenario(name_or_path)
        self.build_estimators(scenario, None, None)
        return scenario

    def build_trajectory(self, scenario: ScenarioConfig
                         ) -> Tuple[Trajectory, Optional[IOCoefficients], Optional[ContinuousLTISystem]]:
        """Measured trajectory with the true coefficients and system when they are known."""
        plant = scenario.plant
        sampling = scenario.sampling
        truth, system = None, None
        if plant.kind == 'rc':
            system = rc_system(plant.params)
            truth = rc_params_truth(plant.params)
            trajectory = simulate(system, scenario.input, plant.x0, sampling.Ts, sampling.duration)
        elif plant.kind == 'sinusoid':
            truth = sinusoid_truth(plant.omega)
            trajectory = simulate_sinusoid(plant.amplitude, plant.omega, sampling.Ts, sampling.duration)
        else:
            trajectory = load_csv(plant.path)
            if abs(trajectory.Ts - sampling.Ts) > 1e-9 * sampling.Ts:
                raise ConfigError('sampling.Ts', f"{sampling.Ts} differs from the file's Ts={trajectory.Ts}")
        trajectory = add_noise(trajectory, scenario.noise.amplitude, scenario.noise_seed)
        return trajectory, truth, system

    def build_estimators(self, scenario: ScenarioConfig, truth: Optional[IOCoefficients],
                         system: Optional[ContinuousLTISystem]) -> Dict[str, Any]:
        estimators = {}
        for i, spec in enumerate(scenario.estimators):
            try:
                estimators[spec.name] = self._build(spec, scenario.sampling.Ts, truth, system)
            except (ValueError, EstimationError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"estimators[{i}]", str(exc)) from exc
        return estimators

    def _build(self, spec: EstimatorSpec, Ts: float, truth: Optional[IOCoefficients],
               system: Optional[ContinuousLTISystem]):
        structure = ModelStructure(spec.n, spec.include_d, spec.include_u)
        kernel = make_mf_generator(spec.kernel, spec.T_prime) if spec.kernel else None
        if spec.kind == 'batch':
            return BatchEstimator(spec.name, structure, spec.T, Ts, fixed_bank(spec.orders, spec.T),
                                  spec.free, spec.hold_y, spec.hold_u)
        if spec.kind == 'gramian':
            return GramianEstimator(spec.name, structure, spec.T, spec.T_prime, Ts,
                                    fixed_bank(spec.orders, spec.T), kernel, spec.hold_y, spec.hold_u)
        if spec.kind == 'normalized':
            return NormalizedEstimator(spec.name, structure, spec.T, spec.T_prime, Ts, spec.stride,
                                       spec.hold_y, spec.hold_u)
        if spec.kind == 'direct':
            generator = make_mf_generator({'family': 'poly-total', 'order': spec.mf_order}, spec.T)
            return DirectEstimator(spec.name, structure, spec.T, spec.T_prime, Ts, generator, kernel,
                                   spec.hold_y, spec.hold_u)
        if spec.kind == 'offline':
            structure.mask(spec.free)
            return None

        coeffs, plant_system = self._coefficients(spec, truth, system)
        if spec.kind == 'state-mf':
            return MFStateEstimator(spec.name, spec.T, Ts, spec.n, spec.m_l, STATE_MODE_NAMES[spec.mode],
                                    spec.hold_y, spec.hold_u, coeffs, plant_system)
        observer = LuenbergerObserver(spec.name, Ts, poles=spec.poles, pole_factor=spec.pole_factor, x0=spec.x0)
        if coeffs is not None:
            observer.set_system(plant_system if plant_system is not None else realize(coeffs))
        return observer

    @staticmethod
    def _coefficients(spec: EstimatorSpec, truth: Optional[IOCoefficients],
                      system: Optional[ContinuousLTISystem]) -> Tuple[Optional[IOCoefficients], Optional[ContinuousLTISystem]]:
        if spec.coefficients == 'truth':
            return truth, system
        if isinstance(spec.coefficients, dict):
            return IOCoefficients.from_dict(spec.coefficients), None
        return None, None

    def run_scenario(self, scenario: ScenarioConfig, write: bool = True) -> RunReport:
        """Stream every sample through every estimator once, in time order."""
        logger.info("running scenario '%s' (seed %d)", scenario.name, scenario.seed)
        trajectory, truth, system = self.build_trajectory(scenario)
        estimators = self.build_estimators(scenario, truth, system)
        specs = {spec.name: spec for spec in scenario.estimators}
        streaming = {name: est for name, est in estimators.items() if est is not None}
        parameter = [name for name in streaming if specs[name].is_parameter_estimator]
        state = [name for name in streaming if not specs[name].is_parameter_estimator]

        traces = {}
        for name in streaming:
            spec = specs[name]
            labels = ModelStructure(spec.n, spec.include_d, spec.include_u).labels \
                if spec.is_parameter_estimator else tuple(f'x{i + 1}' for i in range(spec.n))
            traces[name] = EstimateTrace(method=spec.kind, labels=labels)
        latest: Dict[str, Any] = {}
        cascade = self._cascade_plan(scenario, state)
        last_update: Dict[str, int] = {}
        elapsed = defaultdict(float)

        for k in range(len(trajectory)):
            t, u, y = float(trajectory.t[k]), float(trajectory.u[k]), float(trajectory.y[k])
            for name in parameter:
                started = time.perf_counter()
                estimate = streaming[name].update(t, u, y)
                elapsed[name] += time.perf_counter() - started
                traces[name].append(t, None if estimate is None else estimate.theta,
                                    estimate is not None and estimate.stale)
                if estimate is not None and not estimate.stale:
                    latest[name] = estimate
            for name, (source, stride) in cascade.items():
                due = name not in last_update or k - last_update[name] >= stride
                if due and source in latest:
                    streaming[name].set_coefficients(latest[source].to_coefficients())
                    last_update[name] = k
            for name in state:
                started = time.perf_counter()
                estimate = streaming[name].update(t, u, y)
                elapsed[name] += time.perf_counter() - started
                traces[name].append(t, None if estimate is None else estimate.x_hat,
                                    estimate is not None and estimate.stale)

        report = RunReport(scenario=scenario.name, seed=scenario.seed)
        ticks = max(1, len(trajectory))
        for name in streaming:
            report.seconds_per_tick[name] = elapsed[name] / ticks
            counts = dict(sorted(streaming[name].warnings.items()))
            if counts:
                report.warnings[name] = counts
                logger.warning("%s: %s", name, ', '.join(f"{count} {kind}" for kind, count in counts.items()))
            logger.info("%s: %.3g ms per tick", name, 1e3 * report.seconds_per_tick[name])

        for name, spec in specs.items():
            if spec.kind == 'offline':
                traces[name] = self._run_offline(spec, trajectory, report)
        for name in specs:
            report.estimators[name] = self._summary(specs[name], traces[name], trajectory, truth)

        if write:
            self._write(scenario, trajectory, traces, specs, report)
        logger.info("scenario '%s' finished", scenario.name)
        return report

    def _cascade_plan(self, scenario: ScenarioConfig, state: List[str]) -> Dict[str, Tuple[str, int]]:
        plan = {}
        Ts = scenario.sampling.Ts
        for name in state:
            spec = scenario.estimator(name)
            if isinstance(spec.coefficients, str) and spec.coefficients.startswith('estimator:'):
                source = spec.coefficients.split(':', 1)[1]
                stride = spec.update_stride or scenario.estimator(source).T_prime / 10.0
                plan[name] = (source, max(1, int(round(stride / Ts))))
        return plan

    def _run_offline(self, spec: EstimatorSpec, trajectory: Trajectory, report: RunReport) -> EstimateTrace:
        structure = ModelStructure(spec.n, spec.include_d, spec.include_u)
        trace = EstimateTrace(method=spec.kind, labels=structure.labels)
        started = time.perf_counter()
        try:
            estimate = estimate_offline(trajectory, fixed_bank(spec.orders, spec.T), structure, spec.T,
                                        stride=spec.stride if spec.stride > 1 else None,
                                        hold_y=spec.hold_y, hold_u=spec.hold_u)
            trace.append(estimate.time, estimate.theta)
        except EstimationError as exc:
            report.warnings[spec.name] = {type(exc).__name__: 1}
            logger.warning("%s: %s", spec.name, exc)
            trace.append(float(trajectory.t[-1]), None)
        report.seconds_per_tick[spec.name] = (time.perf_counter() - started) / max(1, len(trajectory))
        return trace

    def _summary(self, spec: EstimatorSpec, trace: EstimateTrace, trajectory: Trajectory,
                 truth: Optional[IOCoefficients]) -> Dict[str, Any]:
        summary: Dict[str, Any] = {'kind': spec.kind, 'first_valid': trace.first_valid_time}
        final = trace.last_valid()
        if final is None:
            return summary
        if not spec.is_parameter_estimator:
            summary['final'] = {label: float(v) for label, v in zip(trace.labels, final)}
            if trajectory.x is not None and trajectory.x.shape[1] == len(trace.labels):
                errors = state_errors(trace.as_array(), trajectory.x)
                valid = np.asarray(trace.valid)
                summary['max_error'] = float(np.max(errors[valid]))
                summary['final_error'] = float(errors[valid][-1])
            return summary

        summary['final'] = {label: float(v) for label, v in zip(trace.labels, final)}
        coeffs = ParameterEstimate(theta=final, labels=trace.labels, time=trace.times[-1], valid_from=0.0,
                                   method=spec.kind).to_coefficients()
        summary['coefficients'] = coeffs.to_dict()
        if truth is not None:
            summary['relative_errors'] = relative_errors(coeffs, truth)
        if spec.include_u:
            summary['fit_percent'] = _fit(coeffs, trajectory)
        return summary

    def _write(self, scenario: ScenarioConfig, trajectory: Trajectory, traces: Dict[str, EstimateTrace],
               specs: Dict[str, EstimatorSpec], report: RunReport) -> None:
        out = self.config.output_dir(scenario)
        out.mkdir(parents=True, exist_ok=True)
        written = [write_trajectory(out / 'trajectory.csv', trajectory)]
        series = {'u': trajectory.u, 'y': trajectory.y}
        if trajectory.y_clean is not None and trajectory.noise_amplitude > 0:
            series['y_clean'] = trajectory.y_clean
        if trajectory.x is not None:
            for i in range(trajectory.x.shape[1]):
                series[f'x{i + 1}'] = trajectory.x[:, i]
        for name, trace in traces.items():
            extra = {}
            values = trace.as_array()
            streamed = len(trace.times) == len(trajectory)
            comparable = trajectory.x is not None and trajectory.x.shape[1] == len(trace.labels)
            if not specs[name].is_parameter_estimator and comparable and streamed:
                extra['error'] = state_errors(values, trajectory.x)
            written.append(write_trace(out / f'{name}.csv', trace, extra))
            if streamed:
                for j, label in enumerate(trace.labels):
                    series[f'{name}.{label}'] = values[:, j]
        written.append(write_plot_data(out / 'plot_data.csv', trajectory.t, series))
        report_path = out / ('report.json' if scenario.output.format == 'json' else 'report.csv')
        report.files = [p.name for p in written] + [report_path.name]
        write_report(report_path, report, scenario.output.format)
        for path in written + [report_path]:
            logger.info("wrote %s", path)

    def run_monte_carlo(self, scenario: ScenarioConfig, runs: int, write: bool = True) -> Dict[str, Any]:
        """Repeat a scenario over seeds seed..seed+runs-1; median relative errors per estimator."""
        if runs < 1:
            raise ValueError(f"runs must be >= 1, got {runs}")
        errors: Dict[str, Dict[str, List[float]]] = defaultdict(lambda: defaultdict(list))
        failures: Dict[str, int] = defaultdict(int)
        seeds = list(range(scenario.seed, scenario.seed + runs))
        for seed in seeds:
            run = replace(scenario, seed=seed, noise=replace(scenario.noise, seed=None))
            report = self.run_scenario(run, write=False)
            for name, summary in report.estimators.items():
                if name in report.failed:
                    failures[name] += 1
                    continue
                if 'relative_errors' not in summary:
                    continue
                for key, value in summary['relative_errors'].items():
                    errors[name][key].append(value)
        result = {
            'scenario': scenario.name,
            'runs': runs,
            'seeds': seeds,
            'median_relative_errors': {
                name: {key: float(np.median(values)) for key, values in sorted(per_key.items())}
                for name, per_key in sorted(errors.items())
            },
            'failed_runs': dict(sorted(failures.items()))
        }
        if write:
            out = self.config.output_dir(scenario)
            out.mkdir(parents=True, exist_ok=True)
            path = out / 'monte_carlo.json'
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(result, f, indent=2, sort_keys=True)
                f.write('\n')
            logger.info("wrote %s", path)
        return result


def _fit(coeffs: IOCoefficients, trajectory: Trajectory) -> Optional[float]:
    try:
        with np.errstate(all='ignore'):
            value = fit_percent(trajectory.reference_output, resimulate(coeffs, trajectory))
    except (EstimationError, np.linalg.LinAlgError, ValueError) as exc:
        logger.debug("no fit for %s: %s", coeffs.to_dict(), exc)
        return None
    return value if np.isfinite(value) else None


def run_scenario(scenario: ScenarioConfig, config: Optional[Config] = None, write: bool = True) -> RunReport:
    return ScenarioManager(config or Config()).run_scenario(scenario, write)
