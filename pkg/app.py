import argparse
import sys
from typing import List, Optional, Sequence

from ulid import ULID

from src.commands.anytime import AnytimeCommand
from src.commands.base import BaseCommand
from src.commands.evaluate import EvalCommand
from src.commands.simulate import SimulateCommand
from src.commands.synth import SynthCommand
from src.models.errors import SynthesisError
from src.utils.config import get_app_config
from src.utils.logger import SynthLogger, get_logger

COMMANDS: List[BaseCommand] = [SynthCommand(), AnytimeCommand(), EvalCommand(), SimulateCommand()]


class SynthesisApplication:
    """
    Command-line application binding the synthesis pipeline together.

    This class is responsible for loading the configuration, setting up
    logging with a per-invocation run id, dispatching to the subcommand and
    mapping errors to exit statuses (2 parse/usage, 3 validation, 1 other).
    """

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize the application.

        Args:
            config_path: Optional path to configuration file
        """
        self.config = get_app_config(config_path)

        self.logger = self._initialize_logger()
        self.run_id = self._generate_run_id()

        if self.logger:
            self.logger.set_context(run_id=self.run_id)
            self.logger.debug(f"Application initialized with run ID: {self.run_id}")

    def _initialize_logger(self) -> Optional[SynthLogger]:
        """Initialize the logger with configuration"""
        try:
            logger = get_logger()
            logger.configure(self.config.logging)
            return logger
        except Exception as e:
            print(f"Warning: Logger initialization failed: {str(e)}", file=sys.stderr)
            return None

    def _generate_run_id(self) -> str:
        """Generate a unique id for this invocation"""
        return str(ULID())

    def run(self, args: argparse.Namespace) -> int:
        """Run the selected subcommand and return the exit status"""
        command: BaseCommand = args.command
        try:
            status = command.run(args, self.config)
            if self.logger:
                self.logger.info(f"{command.name} finished with status {status}")
            return status
        except SynthesisError as e:
            if self.logger:
                self.logger.info(f"{command.name} failed: {e.diagnostic()}")
            print(f"error: {e.diagnostic()}", file=sys.stderr)
            return e.exit_code
        except Exception as e:
            if self.logger:
                self.logger.exception(f"{command.name} crashed: {e}")
            print(f"error: internal failure: {e}", file=sys.stderr)
            return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synth",
        description="Policy synthesis for a plant among Markov-chain agents against a DFA specification",
    )
    parser.add_argument("--config", help="configuration file (default config/config.yaml)")
    subparsers = parser.add_subparsers(title="commands", dest="command_name", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    app = SynthesisApplication(args.config)
    return app.run(args)


# Entry point
if __name__ == "__main__":
    sys.exit(main())
