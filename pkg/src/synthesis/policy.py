"""
Memoryless policies over product states: extraction, projection onto other
products, induced chains, full-model evaluation and Monte Carlo simulation.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from src.models.components import Mc, Prop
from src.models.dfa import Dfa
from src.models.errors import InconsistentValuesError, ParseError, ProjectionError, RosterError
from src.synthesis.compose import Plant, compose_system
from src.synthesis.product import ProductMdp, build_product
from src.synthesis.settings import SimulationConfig, SolverConfig
from src.synthesis.solve import ProbVector, fixed_point_residual, mc_reachability
from src.utils.logger import get_logger

logger = get_logger()

# Label of accepting states in induced chains; '$' never occurs in parsed identifiers
ACCEPT = Prop("$accept", 0)

Key = Tuple[Tuple[str, ...], str]


class RosterEntry(NamedTuple):
    """An agent a policy was computed for, observed in full or pinned to one state"""

    name: str
    pinned: Optional[str] = None

    @property
    def full(self) -> bool:
        return self.pinned is None

    def describe(self) -> str:
        return f"{self.name}:full" if self.full else f"{self.name}:pinned:{self.pinned}"

    @classmethod
    def parse(cls, text: str) -> "RosterEntry":
        parts = text.split(":")
        if len(parts) == 2 and parts[1] == "full" and parts[0]:
            return cls(parts[0])
        if len(parts) == 3 and parts[1] == "pinned" and parts[0] and parts[2]:
            return cls(parts[0], parts[2])
        raise ParseError(f"invalid roster entry {text!r}, expected <agent>:full or <agent>:pinned:<state>")


@dataclass(frozen=True)
class Policy:
    """
    Memoryless policy keyed by (observed composite state, DFA state).

    The observed composite state holds the plant state followed by the states
    of the full roster agents in roster order; pinned agents are constant and
    not part of the key. Entries keep product state order.
    """

    roster: Tuple[RosterEntry, ...]
    choices: Dict[Key, str]

    def action(self, observed: Tuple[str, ...], q: str) -> str:
        try:
            return self.choices[(observed, q)]
        except KeyError:
            raise ProjectionError(f"state ⟨{','.join(observed)}|{q}⟩ is outside the policy domain") from None

    def choice_indices(self, p: ProductMdp) -> np.ndarray:
        """
        Action index per product state of `p`, projecting each state onto the observed agents.

        Raises:
            RosterError: the product lacks an agent of the roster
            ProjectionError: a projected state has no entry or its action is disabled in `p`
        """
        positions = []
        for entry in self.roster:
            position = p.slot_position(entry.name)
            if position is None:
                raise RosterError(f"policy roster names agent {entry.name}, which was not supplied")
            if entry.full:
                positions.append(position)
        action_index = {a: i for i, a in enumerate(p.actions)}
        enabled = np.stack([p.enabled[a] for a in p.actions])
        chosen = np.empty(p.size, dtype=np.int64)
        i = 0
        for s in p.system_states:
            observed = (s[0],) + tuple(s[k] for k in positions)
            for q in p.dfa.states:
                a = self.action(observed, q)
                if a not in action_index or not enabled[action_index[a], i]:
                    raise ProjectionError(f"action {a} is not enabled at {p.describe_state(i)}")
                chosen[i] = action_index[a]
                i += 1
        return chosen


def _roster_of(p: ProductMdp) -> Tuple[RosterEntry, ...]:
    return tuple(RosterEntry(slot.name, slot.pinned) for slot in p.layout[1:])


def _min_successor(matrix: sparse.csr_matrix, values: np.ndarray) -> np.ndarray:
    """Per row, the least value over the row's successors (inf for empty rows)"""
    result = np.full(matrix.shape[0], np.inf)
    counts = np.diff(matrix.indptr)
    rows = np.flatnonzero(counts)
    if rows.size:
        result[rows] = np.minimum.reduceat(values[matrix.indices], matrix.indptr[rows])
    return result


def extract_policy(p: ProductMdp, x: ProbVector, cfg: Optional[SolverConfig] = None) -> Policy:
    """
    Progress-making memoryless policy from a converged value vector.

    Act_max(s) holds the actions whose one-step value is within 10 epsilon of
    x_s. States with x_s above that tolerance take the first Act_max action
    (declaration order) that moves one step closer to B_p along Act_max
    edges; all other states take their first enabled action.

    Raises:
        InconsistentValuesError: some state with positive value cannot make progress
    """
    cfg = cfg or SolverConfig()
    eta = cfg.tolerance
    values = x.values
    matrices = [p.transitions[a] for a in p.actions]
    enabled = [p.enabled[a] for a in p.actions]
    act_max = [mask & (np.abs(values - m @ values) <= eta) for m, mask in zip(matrices, enabled)]

    graph = sparse.csr_matrix((p.size, p.size))
    for m, mask in zip(matrices, act_max):
        graph = graph + sparse.diags(mask.astype(float)) @ m
    graph.eliminate_zeros()
    graph = (graph > 0).astype(float).tocsr()

    distance = np.full(p.size, np.inf)
    frontier = p.accepting.copy()
    distance[frontier] = 0
    step = 0
    while frontier.any():
        step += 1
        reached = (graph @ frontier.astype(float) > 0) & np.isinf(distance)
        distance[reached] = step
        frontier = reached

    chosen = np.full(p.size, -1, dtype=np.int64)
    for a in range(len(p.actions) - 1, -1, -1):
        chosen[enabled[a]] = a
    progress = (values > eta) & ~p.accepting
    choice = np.full(p.size, -1, dtype=np.int64)
    for a in range(len(p.actions) - 1, -1, -1):
        closer = act_max[a] & (_min_successor(matrices[a], distance) == distance - 1)
        choice[closer] = a
    stuck = progress & ((choice < 0) | np.isinf(distance))
    if stuck.any():
        state = int(np.flatnonzero(stuck)[0])
        raise InconsistentValuesError(
            f"no optimal action makes progress towards the accepting states at {p.describe_state(state)}",
            fixed_point_residual(p, x))
    chosen[progress] = choice[progress]

    choices: Dict[Key, str] = {}
    roster = _roster_of(p)
    positions = [k for k, slot in enumerate(p.layout) if k > 0 and slot.full]
    for i, (s, q) in enumerate(p.states):
        observed = (s[0],) + tuple(s[k] for k in positions)
        choices[(observed, q)] = p.actions[chosen[i]]
    return Policy(roster, choices)


def induce_chain(p: ProductMdp, policy: Policy) -> Mc:
    """Markov chain over the product states following the policy; B_p carries the ACCEPT marker"""
    chosen = policy.choice_indices(p)
    matrix = sparse.csr_matrix((p.size, p.size))
    for a, action in enumerate(p.actions):
        matrix = matrix + sparse.diags((chosen == a).astype(float)) @ p.transitions[action]
    matrix = sparse.csr_matrix(matrix)
    matrix.eliminate_zeros()
    labels = tuple(p.labels_of(i) | {ACCEPT} if p.accepting[i] else p.labels_of(i) for i in range(p.size))
    props = frozenset().union(*p.system_labels, (ACCEPT,)) if p.system_labels else frozenset((ACCEPT,))
    return Mc(f"{p.name}|policy", p.states, matrix, p.init.copy(), labels, props)


def accepting_marker(chain: Mc) -> np.ndarray:
    return np.array([ACCEPT in label for label in chain.labels])


def lift_policy(policy: Policy, plant: Plant, agents: Sequence[Mc], d: Dfa, strict: bool = False) -> Mc:
    """
    Induced chain of a (possibly abstract) policy on the full model.

    Raises:
        RosterError: the roster names an agent that was not supplied
    """
    names = {a.name for a in agents}
    unknown = [e.name for e in policy.roster if e.name not in names]
    if unknown:
        raise RosterError(f"policy roster names unknown agent(s): {', '.join(unknown)}")
    product = build_product(compose_system(plant, agents), d, strict)
    return induce_chain(product, policy)


def evaluate_policy(p: ProductMdp, policy: Policy, cfg: Optional[SolverConfig] = None) -> float:
    """Probability of reaching B_p from the initial distribution of `p` under the policy"""
    chain = induce_chain(p, policy)
    return mc_reachability(chain, accepting_marker(chain), cfg).at(chain.init)


def lift_and_evaluate(policy: Policy, plant: Plant, agents: Sequence[Mc], d: Dfa,
                      cfg: Optional[SolverConfig] = None, strict: bool = False) -> float:
    """Probability that the full model satisfies the specification under the policy"""
    chain = lift_policy(policy, plant, agents, d, strict)
    return mc_reachability(chain, accepting_marker(chain), cfg).at(chain.init)


@dataclass(frozen=True)
class SimulationResult:
    estimate: float
    stderr: float
    runs: int

    def __str__(self) -> str:
        return f"estimate={self.estimate:.6f} stderr={self.stderr:.6f} runs={self.runs}"


def _can_reach(chain: Mc, targets: np.ndarray) -> np.ndarray:
    edges = sparse.csr_matrix((chain.matrix > 0).astype(float))
    seen = targets.copy()
    frontier = targets.copy()
    while frontier.any():
        frontier = (edges @ frontier.astype(float) > 0) & ~seen
        seen |= frontier
    return seen


def _run(chain: Mc, cumulative: List[np.ndarray], init_cumulative: np.ndarray, targets: np.ndarray,
         alive: np.ndarray, horizon: int, seed: int, run: int) -> bool:
    rng = np.random.default_rng(np.random.SeedSequence([seed, run]))
    state = int(np.searchsorted(init_cumulative, rng.random() * init_cumulative[-1], side="right"))
    for _ in range(horizon + 1):
        if targets[state]:
            return True
        if not alive[state]:
            return False
        start = chain.matrix.indptr[state]
        weights = cumulative[state]
        state = int(chain.matrix.indices[start + np.searchsorted(weights, rng.random() * weights[-1], side="right")])
    return False


def simulate(chain: Mc, targets: Optional[np.ndarray] = None, cfg: Optional[SimulationConfig] = None) -> SimulationResult:
    """
    Monte Carlo estimate of the probability of reaching the targets.

    Run r draws from its own generator seeded by (seed, r), so estimates do
    not depend on the thread count. A run fails once it exceeds the horizon
    or enters a state from which the targets are unreachable.
    """
    cfg = cfg or SimulationConfig()
    targets = accepting_marker(chain) if targets is None else targets
    horizon = cfg.horizon or 10 * chain.size
    alive = _can_reach(chain, targets)
    matrix = chain.matrix
    cumulative = [np.cumsum(matrix.data[matrix.indptr[i]:matrix.indptr[i + 1]]) for i in range(chain.size)]
    init_cumulative = np.cumsum(chain.init)

    def batch(runs: Iterable[int]) -> int:
        return sum(_run(chain, cumulative, init_cumulative, targets, alive, horizon, cfg.seed, int(r)) for r in runs)

    if cfg.threads > 1:
        chunks = np.array_split(np.arange(cfg.runs), cfg.threads)
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            successes = sum(pool.map(batch, chunks))
    else:
        successes = batch(range(cfg.runs))

    estimate = successes / cfg.runs
    stderr = math.sqrt(estimate * (1.0 - estimate) / cfg.runs)
    return SimulationResult(estimate, stderr, cfg.runs)


def write_policy(policy: Policy, path: Union[str, Path, None] = None) -> str:
    """Render the policy as TSV (and write it when a path is given)"""
    lines = ["#policy roster=" + ",".join(e.describe() for e in policy.roster)]
    for (observed, q), action in policy.choices.items():
        lines.append("\t".join(observed + (q, action)))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def parse_policy(text: str, path: Optional[str] = None) -> Policy:
    """
    Raises:
        ParseError: missing header, malformed roster or wrong column count
    """
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#policy roster="):
        raise ParseError("expected header '#policy roster=...'", path, 1)
    spec = lines[0][len("#policy roster="):].strip()
    try:
        roster = tuple(RosterEntry.parse(t) for t in spec.split(",")) if spec else ()
    except ParseError as e:
        raise ParseError(e.message, path, 1) from e
    width = 1 + sum(e.full for e in roster) + 2
    choices: Dict[Key, str] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != width:
            raise ParseError(f"expected {width} tab-separated columns, got {len(fields)}", path, line_no)
        key = (tuple(fields[:-2]), fields[-2])
        if key in choices:
            raise ParseError("duplicate policy row", path, line_no)
        choices[key] = fields[-1]
    return Policy(roster, choices)


def read_policy(path: Union[str, Path]) -> Policy:
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read file: {e.strerror}", path) from e
    except UnicodeDecodeError as e:
        raise ParseError("file is not valid UTF-8", path) from e
    return parse_policy(text, path)
