import argparse

from src.commands.base import BaseCommand
from src.synthesis.pipeline import METHODS, METRICS_HEADER, synthesize
from src.synthesis.policy import write_policy
from src.synthesis.product import render_product
from src.synthesis.scc import render_sccs
from src.utils.config import AppConfig
from src.utils.logger import get_logger

logger = get_logger()


class SynthCommand(BaseCommand):
    """Monolithic synthesis on the fully composed model"""

    @property
    def name(self) -> str:
        return "synth"

    @property
    def help(self) -> str:
        return "synthesize an optimal policy for the full model"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--method", choices=METHODS, default="scc",
                            help="vi: plain value iteration; scc: over product SCCs; "
                                 "partition: over system SCC x Q blocks (default: scc)")
        parser.add_argument("--policy-out", default="policy.tsv", help="policy file to write")
        parser.add_argument("--metrics-out", help="one-row CSV with sizes and timings")
        parser.add_argument("--dump-product", metavar="PATH", help="write the product MDP for debugging")
        parser.add_argument("--dump-sccs", metavar="PATH", help="write the solver blocks for debugging")

    def run(self, args: argparse.Namespace, config: AppConfig) -> int:
        solver = self.solver_config(args, config)
        plant, agents, dfa = self.load_models(args)
        result = synthesize(plant, agents, dfa, args.method, solver, self.strict(args, config), config.threads)

        write_policy(result.policy, self.ensure_parent(args.policy_out))
        if args.metrics_out:
            self.ensure_parent(args.metrics_out).write_text(
                METRICS_HEADER + "\n" + result.metrics_row() + "\n", encoding="utf-8")
        if args.dump_product:
            self.ensure_parent(args.dump_product).write_text(render_product(result.product), encoding="utf-8")
        if args.dump_sccs and result.sccs is not None:
            names = [result.product.describe_state(i) for i in range(result.product.size)]
            self.ensure_parent(args.dump_sccs).write_text(render_sccs(result.sccs, names), encoding="utf-8")
        elif args.dump_sccs:
            logger.warning("--method vi uses no blocks, nothing written to --dump-sccs")

        print(f"probability={result.probability:.6f}")
        return 0
