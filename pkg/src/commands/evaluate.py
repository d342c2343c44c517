import argparse

from src.commands.base import BaseCommand
from src.synthesis.policy import lift_and_evaluate, read_policy
from src.utils.config import AppConfig


class EvalCommand(BaseCommand):
    """Evaluate a stored policy on the full model"""

    @property
    def name(self) -> str:
        return "eval"

    @property
    def help(self) -> str:
        return "probability that the full model satisfies the specification under a policy"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--policy", required=True, help="policy TSV written by synth or anytime")

    def run(self, args: argparse.Namespace, config: AppConfig) -> int:
        solver = self.solver_config(args, config)
        plant, agents, dfa = self.load_models(args)
        policy = read_policy(args.policy)
        probability = lift_and_evaluate(policy, plant, agents, dfa, solver, self.strict(args, config))
        print(f"probability={probability:.6f}")
        return 0
