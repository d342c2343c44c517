import os
import yaml
from typing import Dict, Any, Optional
from functools import lru_cache
import logging
from dotenv import load_dotenv
import pydantic

from src.models.errors import ValidationError
from src.synthesis.settings import AnytimeConfig, SimulationConfig, SolverConfig

# Load environment variables from .env file if it exists
load_dotenv()


class AppConfig:
    """
    Centralized configuration system for the synthesis tool.

    This class manages all settings from various sources:
    - YAML configuration files
    - Environment variables
    - Default values

    It provides structured access to configuration sections like:
    - Logging configuration
    - Solver settings
    - Anytime loop budgets
    - Simulation oracle settings
    """

    # Default configuration values
    DEFAULT_CONFIG = {
        "environment": "development",
        "logging": {
            "log_level_file": "DEBUG",
            "log_level_console": "WARNING",
            "log_format": "standard",
            "log_to_file": True,
            "max_log_size_mb": 10,
            "log_backup_count": 5,
        },
        "solver": {
            "epsilon": 1e-6,
            "max_iterations": 100000,
        },
        "product": {
            "strict": False,
        },
        "anytime": {
            "select": "min-prob",
            "budget_seconds": None,
            "budget_states": None,
            "evaluate": True,
            "incremental": True,
            "output_dir": "out",
        },
        "simulation": {
            "runs": 10000,
            "horizon": None,
            "seed": 0,
        },
        "runtime": {
            "threads": 1,
        },
    }

    # Mapping of environment variable prefixes to config sections
    ENV_PREFIXES = {
        "SYNTH_LOG_": "logging",
        "SYNTH_SOLVER_": "solver",
        "SYNTH_PRODUCT_": "product",
        "SYNTH_ANYTIME_": "anytime",
        "SYNTH_SIM_": "simulation",
        "SYNTH_RUNTIME_": "runtime",
    }

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize the configuration system.

        Args:
            config_path: Optional path to the main configuration file.
                         If not provided, it will look for 'config.yaml' in the config directory.
        """
        self.base_path = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

        # Determine config file path
        self.config_path = config_path
        if not self.config_path:
            self.config_path = os.path.join(self.base_path, 'config', 'config.yaml')

        self._logger = logging.getLogger(__name__)

        # Load configuration
        self.config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        """Defaults, then config.yaml, then logging.yaml, then the environment"""
        config = _deep_copy(self.DEFAULT_CONFIG)
        _deep_update(config, self._read_yaml(self.config_path))

        logging_config = self._read_yaml(os.path.join(os.path.dirname(self.config_path), "logging.yaml"))
        # config.yaml owns the environment
        logging_config.pop("environment", None)
        _deep_update(config["logging"], logging_config)

        self._apply_env_overrides(config)
        return config

    def _read_yaml(self, path: str) -> Dict[str, Any]:
        if not os.path.exists(path):
            return {}
        try:
            with open(path, "r", encoding="utf-8") as f:
                return yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            self._logger.warning(f"Error loading config from {path}: {e}")
            return {}

    def _apply_env_overrides(self, config: Dict[str, Any]) -> None:
        """Typed overrides from SYNTH_* variables"""
        for env_var, value in os.environ.items():
            section = next((s for p, s in self.ENV_PREFIXES.items() if env_var.startswith(p)), None)
            if section is not None:
                key = env_var.split("_", 2)[2].lower()
                config[section][key] = _coerce(config[section].get(key), value)
            elif env_var == "SYNTH_ENV":
                config["environment"] = value
            elif env_var == "SYNTH_THREADS":
                config["runtime"]["threads"] = _coerce(config["runtime"]["threads"], value)

    @property
    def environment(self) -> str:
        """Get the current environment"""
        return self.config.get("environment", "development")

    @property
    def logging(self) -> Dict[str, Any]:
        """Logging section for SynthLogger.configure, carrying the environment"""
        return dict(self.config.get("logging", {}), environment=self.environment)

    @property
    def solver(self) -> SolverConfig:
        """Validated solver settings"""
        try:
            return SolverConfig(**self.config.get("solver", {}))
        except pydantic.ValidationError as e:
            raise ValidationError(f"invalid solver configuration: {e.errors()[0]['msg']}") from None

    @property
    def strict(self) -> bool:
        return bool(self.config.get("product", {}).get("strict", False))

    @property
    def threads(self) -> int:
        return max(1, int(self.config.get("runtime", {}).get("threads", 1)))

    def anytime(self, **overrides: Any) -> AnytimeConfig:
        """Validated anytime settings, with command-line overrides applied"""
        section = dict(self.config.get("anytime", {}))
        section.update({k: v for k, v in overrides.items() if v is not None})
        return AnytimeConfig(solver=self.solver, threads=self.threads, **section)

    def simulation(self, **overrides: Any) -> SimulationConfig:
        """Validated simulation settings, with command-line overrides applied"""
        section = dict(self.config.get("simulation", {}))
        section.update({k: v for k, v in overrides.items() if v is not None})
        return SimulationConfig(threads=self.threads, **section)


def _deep_update(target: Dict[str, Any], source: Dict[str, Any]) -> None:
    for key, value in source.items():
        if isinstance(target.get(key), dict) and isinstance(value, dict):
            _deep_update(target[key], value)
        else:
            target[key] = value


def _deep_copy(config: Dict[str, Any]) -> Dict[str, Any]:
    return {k: _deep_copy(v) if isinstance(v, dict) else v for k, v in config.items()}


def _coerce(current: Any, value: str) -> Any:
    """Convert an environment string to the type of the value it replaces"""
    try:
        if isinstance(current, bool):
            return value.lower() in ('true', 'yes', '1')
        if isinstance(current, int):
            return int(value)
        if isinstance(current, float):
            return float(value)
        if current is None and value.lower() in ('null', 'none', ''):
            return None
    except (ValueError, TypeError):
        pass
    return value


@lru_cache(maxsize=4)
def get_app_config(config_path: Optional[str] = None) -> AppConfig:
    """One AppConfig per config path"""
    return AppConfig(config_path)
