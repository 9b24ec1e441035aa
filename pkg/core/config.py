"""
Configuration management for mfestimate.
"""

import os
import json
from pathlib import Path
from typing import Optional, Dict, Any, List, Union

from .errors import ConfigError
from .models import ScenarioConfig


class Config:
    """Application configuration: bundled scenarios and the output location."""

    def __init__(self, scenarios_dir: Optional[Path] = None, out_dir: Optional[Path] = None):
        self.app_dir = Path(__file__).resolve().parent.parent
        self.scenarios_dir = Path(scenarios_dir) if scenarios_dir else self.app_dir / "scenarios"
        env_out = os.environ.get('MFESTIMATE_OUT_DIR')
        self.out_dir = Path(out_dir) if out_dir else Path(env_out) if env_out else None

    def _load_json(self, path: Path, default: Any = None) -> Any:
        """Load JSON from file."""
        try:
            if path.exists():
                with open(path, 'r', encoding='utf-8') as f:
                    return json.load(f)
        except (json.JSONDecodeError, IOError):
            pass
        return default if default is not None else {}

    def list_scenarios(self) -> List[str]:
        """Names of the bundled scenarios."""
        if not self.scenarios_dir.exists():
            return []
        return sorted(p.stem for p in self.scenarios_dir.glob('*.json'))

    def scenario_descriptions(self) -> Dict[str, str]:
        """Bundled scenario names with their description field."""
        return {
            name: self._load_json(self.scenarios_dir / f"{name}.json", {}).get('description', '')
            for name in self.list_scenarios()
        }

    def resolve_scenario(self, name_or_path: Union[str, Path]) -> Path:
        """A scenario file path, or the bundled scenario of that name."""
        path = Path(name_or_path)
        if path.exists():
            return path
        bundled = self.scenarios_dir / f"{name_or_path}.json"
        if bundled.exists():
            return bundled
        raise ConfigError('', f"no scenario file or bundled scenario named '{name_or_path}'")

    def load_scenario_data(self, name_or_path: Union[str, Path]) -> Dict[str, Any]:
        path = self.resolve_scenario(name_or_path)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError('', f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        if isinstance(data, dict):
            data.setdefault('name', path.stem)
        return data

    def load_scenario(self, name_or_path: Union[str, Path]) -> ScenarioConfig:
        """Validated scenario; raises ConfigError with the offending field path."""
        return ScenarioConfig.from_dict(self.load_scenario_data(name_or_path))

    def output_dir(self, scenario: ScenarioConfig) -> Path:
        base = self.out_dir if self.out_dir is not None else Path(scenario.output.dir)
        return base / scenario.name
