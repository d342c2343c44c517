import argparse

from src.commands.base import BaseCommand, positive_int, validated
from src.synthesis.policy import lift_policy, read_policy, simulate
from src.utils.config import AppConfig


class SimulateCommand(BaseCommand):
    """Monte Carlo estimate of a policy's satisfaction probability"""

    @property
    def name(self) -> str:
        return "simulate"

    @property
    def help(self) -> str:
        return "estimate a policy's satisfaction probability by seeded simulation"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--policy", required=True, help="policy TSV written by synth or anytime")
        parser.add_argument("--runs", type=positive_int, help="number of trajectories (default from config)")
        parser.add_argument("--horizon", type=positive_int, help="steps per trajectory (default 10 x chain size)")
        parser.add_argument("--seed", type=int, help="generator seed (default from config)")

    def run(self, args: argparse.Namespace, config: AppConfig) -> int:
        settings = validated(lambda: config.simulation(runs=args.runs, horizon=args.horizon, seed=args.seed))
        plant, agents, dfa = self.load_models(args)
        policy = read_policy(args.policy)
        chain = lift_policy(policy, plant, agents, dfa, self.strict(args, config))
        print(simulate(chain, cfg=settings))
        return 0
