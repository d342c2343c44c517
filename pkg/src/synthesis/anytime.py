"""
Anytime synthesis: start with every agent abstracted to a stationary
one-state chain, then bring in one full agent model per iteration.

Every iteration yields a usable policy. The incremental mode refines the
previous product and derives the new SCCs from the previous ones; the
non-incremental mode rebuilds both from scratch.
"""
import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from src.models.components import Mc
from src.models.dfa import Dfa
from src.models.errors import ValidationError
from src.synthesis.compose import Plant, compose_system, make_stationary
from src.synthesis.policy import Policy, evaluate_policy, extract_policy, write_policy
from src.synthesis.product import ProductMdp, build_product, refine_product
from src.synthesis.scc import SccSet, chain_sccs, derive_sccs, product_partition, system_sccs, tarjan_sccs
from src.synthesis.settings import AnytimeConfig, SolverConfig
from src.synthesis.solve import block_value_iteration, fixed_point_residual
from src.utils.logger import get_logger

logger = get_logger()

METRICS_HEADER = [
    "iteration", "agent_added", "system_states", "product_states", "build_s", "scc_s", "solve_s",
    "policy_s", "select_s", "abstract_prob", "full_prob", "elapsed_s",
]


@dataclass(frozen=True)
class IterationReport:
    """Sizes, timings (seconds) and probabilities of one anytime iteration"""

    iteration: int
    agent_added: Optional[str]
    system_states: int
    product_states: int
    build_s: float
    scc_s: float
    solve_s: float
    policy_s: float
    select_s: float
    abstract_prob: float
    full_prob: Optional[float]
    elapsed_s: float

    def csv_row(self) -> List[str]:
        return [
            str(self.iteration),
            self.agent_added or "",
            str(self.system_states),
            str(self.product_states),
            f"{self.build_s:.4f}",
            f"{self.scc_s:.4f}",
            f"{self.solve_s:.4f}",
            f"{self.policy_s:.4f}",
            f"{self.select_s:.4f}",
            f"{self.abstract_prob:.6f}",
            "" if self.full_prob is None else f"{self.full_prob:.6f}",
            f"{self.elapsed_s:.4f}",
        ]

    def summary(self) -> str:
        """Timing-free one-line summary"""
        full = "-" if self.full_prob is None else f"{self.full_prob:.6f}"
        return (f"iteration={self.iteration} product_states={self.product_states} "
                f"abstract_prob={self.abstract_prob:.6f} full_prob={full}")


def write_metrics(reports: Sequence[IterationReport], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for report in reports:
            writer.writerow(report.csv_row())


class _Stopwatch:
    """Monotonic clock that can leave out excluded spans (full-model evaluation)"""

    def __init__(self):
        self.start = time.perf_counter()
        self.excluded = 0.0

    def elapsed(self) -> float:
        return time.perf_counter() - self.start - self.excluded


def select_next_agent(product: ProductMdp, policy: Policy, candidates: Sequence[Tuple[int, Mc]],
                      cfg: Optional[SolverConfig] = None, threads: int = 1) -> int:
    """
    Index of the candidate whose full model makes the current policy least likely to succeed.

    Each candidate is scored by refining the current product with its full
    chain and evaluating the current policy there, the candidate's state
    being projected to its pinned state. Ties go to the earlier candidate.

    Args:
        product: product the policy was extracted from
        policy: current policy
        candidates: (layout position, full agent) pairs in declared order
    """
    cfg = cfg or SolverConfig()
    if len(candidates) == 1:
        return 0

    def score(candidate: Tuple[int, Mc]) -> float:
        position, agent = candidate
        refined, _ = refine_product(product, agent, position)
        return evaluate_policy(refined, policy, cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(score, candidates))
    else:
        scores = [score(c) for c in candidates]

    best = 0
    for i in range(1, len(scores)):
        if scores[i] < scores[best] - cfg.tolerance:
            best = i
    logger.debug("Candidate scores: " + ", ".join(f"{a.name}={s:.6f}" for (_, a), s in zip(candidates, scores)))
    return best


def run_anytime(
    plant: Plant,
    agents: Sequence[Mc],
    d: Dfa,
    cfg: Optional[AnytimeConfig] = None,
    pins: Optional[Mapping[str, str]] = None,
    strict: bool = False,
    on_report: Optional[Callable[[Policy, IterationReport, ProductMdp], None]] = None,
) -> List[Tuple[Policy, IterationReport]]:
    """
    Run the anytime loop until every agent is full or a budget is exhausted.

    Iteration 0 always completes. Budgets are checked between iterations:
    elapsed time first, then the size of the product the next refinement
    would produce. Full-model evaluation is optional and not charged to the
    time budget.

    Args:
        plant: plant model
        agents: full agent chains in declared order
        d: specification automaton
        cfg: budgets, strategy and solver settings
        pins: per agent name, the state its stationary abstraction is pinned to
        strict: reject DFA propositions the model never emits
        on_report: called after every iteration with its policy, report and product

    Returns:
        (policy, report) per completed iteration
    """
    cfg = cfg or AnytimeConfig()
    pins = dict(pins or {})
    names = {a.name for a in agents}
    for name in pins:
        if name not in names:
            raise ValidationError(f"pinned agent {name} is not among the supplied agents")

    clock = _Stopwatch()
    full_product: Dict[str, ProductMdp] = {}
    results: List[Tuple[Policy, IterationReport]] = []
    solver = cfg.solver

    def evaluate(policy: Policy) -> Optional[float]:
        if not cfg.evaluate:
            return None
        start = time.perf_counter()
        if "full" not in full_product:
            full_product["full"] = build_product(compose_system(plant, agents), d, strict)
        probability = evaluate_policy(full_product["full"], policy, solver)
        clock.excluded += time.perf_counter() - start
        return probability

    def solve(k: int, added: Optional[str], product: ProductMdp, partition: SccSet,
              build_s: float, scc_s: float, select_s: float) -> None:
        logger.set_context(iteration=k)
        start = time.perf_counter()
        values = block_value_iteration(product, partition, cfg=solver, threads=cfg.threads)
        residual = fixed_point_residual(product, values)
        if residual > solver.tolerance:
            logger.warning(f"Fixed-point residual {residual:.3e} exceeds {solver.tolerance:.1e}")
        solve_s = time.perf_counter() - start

        start = time.perf_counter()
        policy = extract_policy(product, values, solver)
        policy_s = time.perf_counter() - start

        full_prob = evaluate(policy)
        report = IterationReport(
            iteration=k,
            agent_added=added,
            system_states=product.system_size,
            product_states=product.size,
            build_s=build_s,
            scc_s=scc_s,
            solve_s=solve_s,
            policy_s=policy_s,
            select_s=select_s,
            abstract_prob=values.at(product.init),
            full_prob=full_prob,
            elapsed_s=clock.elapsed(),
        )
        if cfg.output_dir is not None:
            Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
            write_policy(policy, Path(cfg.output_dir) / f"policy_k{k}.tsv")
        logger.info(f"Anytime {report.summary()} elapsed={report.elapsed_s:.3f}s")
        results.append((policy, report))
        if on_report is not None:
            on_report(policy, report, product)

    current: List[Mc] = [make_stationary(a, pins.get(a.name)) for a in agents]

    start = time.perf_counter()
    system = compose_system(plant, current)
    product = build_product(system, d, strict)
    build_s = time.perf_counter() - start

    start = time.perf_counter()
    agent_sccs: List[SccSet] = []
    if cfg.incremental:
        sccs = system_sccs(system)
        agent_sccs = [chain_sccs(a) for a in agents]
        partition = product_partition(sccs, product.n_q)
    else:
        partition = tarjan_sccs(product.adjacency())
    scc_s = time.perf_counter() - start
    solve(0, None, product, partition, build_s, scc_s, 0.0)

    remaining = list(range(len(agents)))
    k = 0
    while remaining:
        if cfg.budget_seconds is not None and clock.elapsed() >= cfg.budget_seconds:
            logger.info(f"Time budget of {cfg.budget_seconds}s exhausted after iteration {k}")
            break

        start = time.perf_counter()
        if cfg.select == "given":
            pick = 0
        else:
            pick = select_next_agent(product, results[-1][0],
                                     [(i + 1, agents[i]) for i in remaining], solver, cfg.threads)
        select_s = time.perf_counter() - start
        chosen = remaining[pick]
        agent = agents[chosen]

        predicted = product.size * agent.size
        if cfg.budget_states is not None and predicted > cfg.budget_states:
            logger.info(f"Adding {agent.name} would need {predicted} product states, budget is {cfg.budget_states}")
            break

        k += 1
        remaining.remove(chosen)
        start = time.perf_counter()
        if cfg.incremental:
            product, index_of = refine_product(product, agent, chosen + 1)
        else:
            current[chosen] = agent
            product = build_product(compose_system(plant, current), d, strict)
        build_s = time.perf_counter() - start

        start = time.perf_counter()
        if cfg.incremental:
            sccs = derive_sccs(sccs, agent_sccs[chosen], index_of)
            partition = product_partition(sccs, product.n_q)
        else:
            partition = tarjan_sccs(product.adjacency())
        scc_s = time.perf_counter() - start
        solve(k, agent.name, product, partition, build_s, scc_s, select_s)

    logger.set_context(iteration=None)
    return results
