import pydantic
import pytest

from src.models.errors import ValidationError
from src.utils.config import AppConfig


@pytest.fixture
def config_file(tmp_path):
    def write(text: str) -> str:
        path = tmp_path / "config.yaml"
        path.write_text(text, encoding="utf-8")
        return str(path)
    return write


def test_defaults_without_a_file(tmp_path):
    config = AppConfig(str(tmp_path / "absent.yaml"))
    assert config.solver.epsilon == 1e-6
    assert config.solver.tolerance == pytest.approx(1e-5)
    assert config.threads == 1
    assert config.anytime().select == "min-prob"
    assert config.simulation().runs == 10000


def test_file_values_override_defaults(config_file):
    config = AppConfig(config_file("solver:\n  epsilon: 1.0e-8\nanytime:\n  select: given\n  budget_states: 500\n"))
    assert config.solver.epsilon == 1e-8
    assert config.solver.max_iterations == 100000
    settings = config.anytime()
    assert settings.select == "given"
    assert settings.budget_states == 500
    assert settings.solver.epsilon == 1e-8


def test_environment_overrides_are_typed(config_file, monkeypatch):
    monkeypatch.setenv("SYNTH_SOLVER_MAX_ITERATIONS", "50")
    monkeypatch.setenv("SYNTH_PRODUCT_STRICT", "yes")
    monkeypatch.setenv("SYNTH_THREADS", "4")
    monkeypatch.setenv("SYNTH_ANYTIME_BUDGET_SECONDS", "2.5")
    config = AppConfig(config_file("environment: production\n"))
    assert config.solver.max_iterations == 50
    assert config.strict is True
    assert config.threads == 4
    assert config.anytime().budget_seconds == 2.5
    assert config.environment == "production"
    assert config.logging["environment"] == "production"


def test_command_line_overrides_win(config_file):
    config = AppConfig(config_file("simulation:\n  runs: 10\n  seed: 4\n"))
    settings = config.simulation(runs=99, horizon=None)
    assert settings.runs == 99
    assert settings.seed == 4
    assert settings.horizon is None


def test_invalid_solver_section(config_file):
    config = AppConfig(config_file("solver:\n  epsilon: -1\n"))
    with pytest.raises(ValidationError, match="invalid solver configuration"):
        config.solver


def test_invalid_anytime_values(config_file):
    config = AppConfig(config_file("anytime:\n  select: random\n"))
    with pytest.raises(pydantic.ValidationError):
        config.anytime()


def test_logging_section_merges_both_files(tmp_path, monkeypatch):
    monkeypatch.delenv("SYNTH_LOG_LOG_LEVEL_CONSOLE", raising=False)
    (tmp_path / "config.yaml").write_text("environment: staging\nlogging:\n  log_format: json\n", encoding="utf-8")
    (tmp_path / "logging.yaml").write_text("environment: ignored\nlog_level_console: ERROR\n", encoding="utf-8")
    section = AppConfig(str(tmp_path / "config.yaml")).logging
    assert section["log_format"] == "json"
    assert section["log_level_console"] == "ERROR"
    assert section["environment"] == "staging"
