"""Command-line entry point and exit codes."""

import json

import pytest

import main
from test_scenario_manager import parameter_scenario, state_scenario


def write_scenario(tmp_path, data, name='scenario.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_list_scenarios(capsys):
    assert main.main(['list-scenarios']) == main.EXIT_OK
    listed = capsys.readouterr().out
    assert 'param-pulse' in listed
    assert 'state-prbs' in listed


def test_validate(tmp_path, capsys):
    path = write_scenario(tmp_path, parameter_scenario())
    assert main.main(['validate', str(path)]) == main.EXIT_OK
    assert 'pulse-small: ok (3 estimators)' in capsys.readouterr().out


def test_validate_bundled():
    assert main.main(['validate', 'sine-singularity']) == main.EXIT_OK


@pytest.mark.parametrize('data', [
    parameter_scenario(estimators=[]),
    parameter_scenario(sampling={'Ts': 2.0, 'duration': 4400.0}, estimators=[{'kind': 'batch', 'T': 3.0}]),
    parameter_scenario(estimators=[{'kind': 'gramian', 'kernel': 'poly-total'}]),
    parameter_scenario(estimators=[{'kind': 'state-mf', 'm_l': 'three'}]),
    parameter_scenario(estimators=[{'kind': 'batch', 'n': 7, 'orders': [7]}]),
])
def test_invalid_config(tmp_path, data):
    assert main.main(['validate', str(write_scenario(tmp_path, data))]) == main.EXIT_CONFIG


def test_missing_file():
    assert main.main(['validate', 'definitely-not-a-scenario']) == main.EXIT_CONFIG


def test_run(tmp_path, capsys):
    path = write_scenario(tmp_path, state_scenario())
    out = tmp_path / 'out'
    assert main.main(['-q', 'run', str(path), '--out-dir', str(out), '--format', 'json']) == main.EXIT_OK
    printed = capsys.readouterr().out
    assert 'mf-left [state-mf]: valid from t=50' in printed
    report = json.loads((out / 'state-small' / 'report.json').read_text())
    assert report['estimators']['luenberger']['first_valid'] == 0.0


def test_seed_override(tmp_path):
    path = write_scenario(tmp_path, state_scenario())
    out = tmp_path / 'out'
    argv = ['-q', 'run', str(path), '--out-dir', str(out), '--seed', '9', '--format', 'json']
    assert main.main(argv) == main.EXIT_OK
    assert json.loads((out / 'state-small' / 'report.json').read_text())['seed'] == 9


def test_no_valid_estimate(tmp_path):
    data = parameter_scenario(estimators=[{'name': 'batch', 'kind': 'batch', 'T': 2000.0}])
    data['sampling'] = {'Ts': 2.0, 'duration': 1000.0}
    path = write_scenario(tmp_path, data)
    assert main.main(['-q', 'run', str(path), '--out-dir', str(tmp_path / 'out')]) == main.EXIT_NO_ESTIMATE
