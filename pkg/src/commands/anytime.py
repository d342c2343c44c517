import argparse
from pathlib import Path
from typing import Dict, List

from src.commands.base import BaseCommand, non_negative, validated
from src.models.errors import UsageError
from src.synthesis.anytime import run_anytime, write_metrics
from src.synthesis.product import ProductMdp, render_product
from src.utils.config import AppConfig


def _pins(values: List[str]) -> Dict[str, str]:
    pins = {}
    for value in values:
        name, sep, state = value.partition("=")
        if not sep or not name or not state:
            raise UsageError(f"--pin expects <agent>=<state>, got {value!r}")
        pins[name] = state
    return pins


class AnytimeCommand(BaseCommand):
    """Anytime synthesis adding one full agent model per iteration"""

    @property
    def name(self) -> str:
        return "anytime"

    @property
    def help(self) -> str:
        return ("synthesize a sequence of improving policies under resource budgets; prints the last "
                "iteration without timings, which go to the metrics CSV")

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--budget-seconds", type=non_negative(float), help="stop once this much time is spent")
        parser.add_argument("--budget-states", type=non_negative(int),
                            help="never build a product with more states than this")
        parser.add_argument("--select", choices=("min-prob", "given"),
                            help="next agent: least satisfaction probability or declared order")
        parser.add_argument("--out", help="directory for policy_k<k>.tsv files (default from config)")
        parser.add_argument("--metrics", help="metrics CSV path (default <out>/metrics.csv)")
        parser.add_argument("--no-eval", action="store_true", help="skip evaluating policies on the full model")
        parser.add_argument("--no-incremental", action="store_true",
                            help="rebuild product and SCCs from scratch every iteration")
        parser.add_argument("--pin", action="append", default=[], metavar="AGENT=STATE",
                            help="state of an agent's stationary abstraction, repeatable")
        parser.add_argument("--dump-product", metavar="PATH", help="write the last product MDP for debugging")

    def run(self, args: argparse.Namespace, config: AppConfig) -> int:
        solver = self.solver_config(args, config)
        overrides = {
            "budget_seconds": args.budget_seconds,
            "budget_states": args.budget_states,
            "select": args.select,
            "output_dir": args.out,
            "evaluate": False if args.no_eval else None,
            "incremental": False if args.no_incremental else None,
        }
        settings = validated(lambda: config.anytime(**overrides).model_copy(update={"solver": solver}))
        pins = _pins(args.pin)
        plant, agents, dfa = self.load_models(args)

        last: Dict[str, ProductMdp] = {}

        def keep_product(policy, report, product: ProductMdp) -> None:
            last["product"] = product

        results = run_anytime(plant, agents, dfa, settings, pins, self.strict(args, config), keep_product)
        reports = [report for _, report in results]

        metrics = args.metrics
        if metrics is None and settings.output_dir is not None:
            metrics = str(Path(settings.output_dir) / "metrics.csv")
        if metrics:
            write_metrics(reports, self.ensure_parent(metrics))
        if args.dump_product:
            self.ensure_parent(args.dump_product).write_text(render_product(last["product"]), encoding="utf-8")

        print(reports[-1].summary())
        return 0
