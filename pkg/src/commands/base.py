import argparse
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Callable, List, Tuple, TypeVar, Union

import pydantic

from src.models.components import Dfts, Mc, Mdp
from src.models.dfa import Dfa, load_dfa
from src.models.errors import UsageError, ValidationError
from src.models.parser import load_component
from src.synthesis.settings import SolverConfig
from src.utils.config import AppConfig

T = TypeVar("T")


def positive_int(text: str) -> int:
    """argparse type for counts that must be at least 1"""
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def non_negative(kind: Callable[[str], T]) -> Callable[[str], T]:
    def parse(text: str) -> T:
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None
        if value < 0:
            raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
        return value
    return parse


def validated(build: Callable[[], T]) -> T:
    """Build a settings object from command-line values, reporting bad values as usage errors"""
    try:
        return build()
    except pydantic.ValidationError as e:
        details = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise UsageError(f"invalid option value: {details}") from None


class BaseCommand(ABC):
    """Abstract base class for CLI subcommands"""

    @property
    @abstractmethod
    def name(self) -> str:
        """
        Subcommand name on the command line.

        Returns:
            Name such as 'synth'
        """
        pass

    @property
    @abstractmethod
    def help(self) -> str:
        """
        One-line description for the usage text.

        Returns:
            Help text
        """
        pass

    @abstractmethod
    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        """
        Register the subcommand's own options.

        Args:
            parser: Subparser of this command
        """
        pass

    @abstractmethod
    def run(self, args: argparse.Namespace, config: AppConfig) -> int:
        """
        Execute the subcommand.

        Args:
            args: Parsed command line
            config: Application configuration

        Returns:
            Process exit status
        """
        pass

    def register(self, subparsers: Any) -> None:
        parser = subparsers.add_parser(self.name, help=self.help, description=self.help)
        self.add_model_arguments(parser)
        self.add_arguments(parser)
        parser.set_defaults(command=self)

    @staticmethod
    def add_model_arguments(parser: argparse.ArgumentParser) -> None:
        group = parser.add_argument_group("models")
        group.add_argument("--plant", required=True, help="plant model (kind dfts or mdp)")
        group.add_argument("--agent", action="append", default=[], dest="agents", metavar="PATH",
                           help="environment agent (kind mc), repeatable; order is the declared agent order")
        group.add_argument("--dfa", required=True, help="specification automaton")
        group.add_argument("--strict", action="store_true", default=None,
                           help="reject DFA propositions the model never emits")
        group.add_argument("--epsilon", type=float, help="value iteration threshold (default from config)")
        group.add_argument("--max-iterations", type=positive_int, help="value iteration cap")

    @staticmethod
    def load_models(args: argparse.Namespace) -> Tuple[Union[Dfts, Mdp], List[Mc], Dfa]:
        """
        Raises:
            ParseError: unreadable or malformed file
            ValidationError: wrong component kinds or invalid models
        """
        plant = load_component(args.plant)
        if not isinstance(plant, (Dfts, Mdp)):
            error = ValidationError(f"plant must be of kind dfts or mdp, got {plant.kind}")
            error.source = args.plant
            raise error
        agents = []
        for path in args.agents:
            agent = load_component(path)
            if not isinstance(agent, Mc):
                error = ValidationError(f"agent must be of kind mc, got {agent.kind}")
                error.source = path
                raise error
            agents.append(agent)
        names = [a.name for a in agents]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValidationError(f"duplicate agent name(s): {', '.join(duplicates)}")
        return plant, agents, load_dfa(args.dfa)

    @staticmethod
    def solver_config(args: argparse.Namespace, config: AppConfig) -> SolverConfig:
        overrides = {k: v for k, v in (("epsilon", args.epsilon), ("max_iterations", args.max_iterations))
                     if v is not None}
        base = config.solver.model_dump()
        return validated(lambda: SolverConfig(**{**base, **overrides}))

    @staticmethod
    def strict(args: argparse.Namespace, config: AppConfig) -> bool:
        return config.strict if args.strict is None else True

    @staticmethod
    def ensure_parent(path: str) -> Path:
        target = Path(path)
        if target.parent != Path(""):
            target.parent.mkdir(parents=True, exist_ok=True)
        return target
