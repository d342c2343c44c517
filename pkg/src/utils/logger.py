import logging
import logging.handlers
import os
import sys
import yaml
import json
from typing import Any, Dict, Mapping, Optional


CONTEXT_FIELDS = ("run_id", "iteration")


class JsonFormatter(logging.Formatter):
    """One JSON object per record, carrying the run context when present"""

    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "timestamp": self.formatTime(record, "%Y-%m-%d %H:%M:%S"),
            "level": record.levelname,
            "module": record.module,
            "message": record.getMessage(),
        }
        payload.update({name: getattr(record, name) for name in CONTEXT_FIELDS if hasattr(record, name)})
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        return json.dumps(payload)


class SynthLogger:
    """
    Logging configuration for the synthesis tool.

    Features:
    - Environment-based configuration (dev, staging, prod)
    - Log rotation
    - Structured logging (JSON format) option
    - Different log levels for file and console
    - Run context (run id, anytime iteration) on every record

    The console handler writes to standard error; standard output carries results only.
    """

    # Default config values
    DEFAULT_CONFIG = {
        "environment": "development",  # development, staging, production
        "log_level_file": "DEBUG",
        "log_level_console": "WARNING",
        "log_format": "standard",  # standard or json
        "log_to_file": True,
        "max_log_size_mb": 10,
        "log_backup_count": 5,
    }

    # Singleton instance
    _instance = None

    @classmethod
    def get_instance(cls, config_path: Optional[str] = None) -> 'SynthLogger':
        """Get or create the logger instance"""
        if cls._instance is None:
            cls._instance = cls(config_path)
        return cls._instance

    def __init__(self, config_path: Optional[str] = None):
        """Initialize the logger from a logging.yaml file (config/logging.yaml by default)"""
        base_path = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
        if config_path is None:
            config_path = os.path.join(base_path, 'config', 'logging.yaml')
        self.logs_dir = os.path.join(base_path, 'logs')

        self.logger = logging.getLogger('synth')
        self.logger.setLevel(logging.DEBUG)  # Base level - handlers will filter
        self.logger.propagate = False

        # Global context
        self.run_id: Optional[str] = None
        self.iteration: Optional[int] = None

        self.configure(self._read_file(config_path))

    def configure(self, settings: Mapping[str, Any]) -> None:
        """Replace the handlers according to a logging section, e.g. AppConfig.logging"""
        self.config = self._load_config(settings)

        for handler in list(self.logger.handlers):
            self.logger.removeHandler(handler)
            handler.close()

        if self.config.get("log_to_file", True):
            self._add_file_handler()
        self._add_console_handler()

        env = self.config.get("environment", "development")
        self.logger.debug(f"Logger configured for the {env} environment")

    @staticmethod
    def _read_file(config_path: str) -> Dict[str, Any]:
        if not os.path.exists(config_path):
            return {}
        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                return yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            print(f"Error loading logger config: {e}", file=sys.stderr)
            return {}

    def _load_config(self, settings: Mapping[str, Any]) -> Dict[str, Any]:
        """Defaults, then the given settings, then SYNTH_LOG_* and SYNTH_ENV"""
        config = self.DEFAULT_CONFIG.copy()
        config.update({k: v for k, v in settings.items() if k in config})

        for key, current in list(config.items()):
            raw = os.environ.get(f"SYNTH_LOG_{key.upper()}")
            if raw is None:
                continue
            if isinstance(current, bool):
                config[key] = raw.strip().lower() in ("true", "yes", "1", "on")
            elif isinstance(current, int):
                config[key] = int(raw)
            else:
                config[key] = raw
        if "SYNTH_ENV" in os.environ:
            config["environment"] = os.environ["SYNTH_ENV"]

        return config

    def _add_file_handler(self):
        """Add rotating file handler"""
        log_level = getattr(logging, self.config.get("log_level_file", "DEBUG"))
        max_bytes = self.config.get("max_log_size_mb", 10) * 1024 * 1024
        backup_count = self.config.get("log_backup_count", 5)

        try:
            os.makedirs(self.logs_dir, exist_ok=True)
        except OSError as e:
            print(f"Warning: log directory unavailable, file logging disabled: {e}", file=sys.stderr)
            return

        env = self.config.get("environment", "development")
        log_file = os.path.join(self.logs_dir, f'synth_{env}.log')

        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=max_bytes,
            backupCount=backup_count,
            encoding='utf-8',
        )
        file_handler.setLevel(log_level)

        if self.config.get("log_format") == "json":
            formatter = JsonFormatter()
        else:
            formatter = logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
            )

        file_handler.setFormatter(formatter)
        self.logger.addHandler(file_handler)

    def _add_console_handler(self):
        """Add diagnostics handler on standard error"""
        log_level = getattr(logging, self.config.get("log_level_console", "WARNING"))

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(log_level)

        # Always use simple formatter for console
        formatter = logging.Formatter('%(levelname)s: %(message)s')
        console_handler.setFormatter(formatter)

        self.logger.addHandler(console_handler)

    def set_context(self, run_id: Optional[str] = None, iteration: Optional[int] = None):
        """Set context for the current run"""
        if run_id is not None:
            self.run_id = run_id
        self.iteration = iteration

    def _extra(self, kwargs: Dict[str, Any]) -> Dict[str, Any]:
        extra = kwargs.pop('extra', {})
        if self.run_id:
            extra['run_id'] = self.run_id
        if self.iteration is not None:
            extra['iteration'] = self.iteration
        return extra

    def is_enabled_for(self, level: int) -> bool:
        """Whether some handler would emit a record of this level"""
        return any(h.level <= level for h in self.logger.handlers)

    def _log(self, level: int, msg: str, args: tuple, kwargs: Dict[str, Any]) -> None:
        kwargs.setdefault("stacklevel", 3)
        self.logger.log(level, msg, *args, extra=self._extra(kwargs), **kwargs)

    def debug(self, msg: str, *args, **kwargs):
        self._log(logging.DEBUG, msg, args, kwargs)

    def info(self, msg: str, *args, **kwargs):
        self._log(logging.INFO, msg, args, kwargs)

    def warning(self, msg: str, *args, **kwargs):
        self._log(logging.WARNING, msg, args, kwargs)

    def error(self, msg: str, *args, **kwargs):
        self._log(logging.ERROR, msg, args, kwargs)

    def exception(self, msg: str, *args, **kwargs):
        """Error record with the active traceback attached"""
        kwargs.setdefault("exc_info", True)
        self._log(logging.ERROR, msg, args, kwargs)


def get_logger(config_path: Optional[str] = None) -> SynthLogger:
    """The process-wide SynthLogger"""
    return SynthLogger.get_instance(config_path)
