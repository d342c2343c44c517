"""
Product of a composed system with the specification DFA, and its refinement.

The intermediate transition function of the product does not depend on the
automaton states, so it is stored once per action at system level
(|S| x |S|). The gated product matrices are derived from it by sending each
system transition s -> s' from automaton state q to delta(q, L(s')).
"""
from dataclasses import dataclass
from functools import cached_property
from typing import AbstractSet, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from src.models.components import Labels, Mc, Mdp, ROW_TOLERANCE, Slot, row_sums
from src.models.dfa import Dfa
from src.models.errors import RefinementError, ValidationError
from src.synthesis.compose import refinement_index, replace
from src.utils.logger import get_logger

logger = get_logger()


@dataclass(frozen=True, eq=False)
class ProductMdp:
    """
    Product MDP over S x Q, product index = system index * |Q| + automaton index.

    Attributes:
        system_states: composite states of the composed system
        system_labels: L(s) per system state
        layout: one slot per composite-state position, pinned slots are abstracted agents
        ptilde: intermediate transition matrix per action, system level
        init_tilde: intermediate initial distribution, system level
        next_q: next_q[q, s'] = delta(q, L(s'))
        transitions: gated product matrix per action
        init: gated initial distribution over product states
    """

    name: str
    dfa: Dfa
    actions: Tuple[str, ...]
    system_states: Tuple[tuple, ...]
    system_labels: Tuple[Labels, ...]
    layout: Tuple[Slot, ...]
    ptilde: Mapping[str, sparse.csr_matrix]
    init_tilde: np.ndarray
    next_q: np.ndarray
    transitions: Mapping[str, sparse.csr_matrix]
    init: np.ndarray

    @property
    def n_q(self) -> int:
        return len(self.dfa.states)

    @property
    def system_size(self) -> int:
        return len(self.system_states)

    @property
    def size(self) -> int:
        return self.system_size * self.n_q

    @cached_property
    def states(self) -> Tuple[Tuple[tuple, str], ...]:
        return tuple((s, q) for s in self.system_states for q in self.dfa.states)

    @cached_property
    def index(self) -> Dict[Tuple[tuple, str], int]:
        return {state: i for i, state in enumerate(self.states)}

    @cached_property
    def accepting(self) -> np.ndarray:
        """Boolean mask of B_p"""
        per_q = np.array([q in self.dfa.accepting for q in self.dfa.states])
        return np.tile(per_q, self.system_size)

    @cached_property
    def enabled(self) -> Dict[str, np.ndarray]:
        return {a: np.abs(row_sums(m) - 1.0) <= ROW_TOLERANCE for a, m in self.transitions.items()}

    def labels_of(self, i: int) -> Labels:
        return self.system_labels[i // self.n_q]

    def adjacency(self) -> sparse.csr_matrix:
        """Edge wherever some action has positive probability"""
        total = sparse.csr_matrix((self.size, self.size))
        for matrix in self.transitions.values():
            total = total + matrix
        total.eliminate_zeros()
        return (total > 0).tocsr()

    def system_adjacency(self) -> sparse.csr_matrix:
        total = sparse.csr_matrix((self.system_size, self.system_size))
        for matrix in self.ptilde.values():
            total = total + matrix
        total.eliminate_zeros()
        return (total > 0).tocsr()

    def slot_position(self, name: str) -> Optional[int]:
        for position, slot in enumerate(self.layout):
            if position > 0 and slot.name == name:
                return position
        return None

    def describe_state(self, i: int) -> str:
        s, q = self.states[i]
        return "⟨" + ",".join(s) + "|" + q + "⟩"


def dfa_successor(d: Dfa, q: str, labels: AbstractSet) -> str:
    """delta(q, labels)"""
    return d.successor(q, labels)


def _successor_table(d: Dfa, labels: Sequence[Labels]) -> np.ndarray:
    """next_q[q, s] = delta(q, L(s)); label sets are cut down to the guard alphabet before evaluation"""
    memo: Dict[Labels, np.ndarray] = {}
    table = np.empty((len(d.states), len(labels)), dtype=np.int64)
    for s, label in enumerate(labels):
        key = label & d.alphabet
        column = memo.get(key)
        if column is None:
            column = np.array([d.index[d.successor(q, key)] for q in d.states], dtype=np.int64)
            memo[key] = column
        table[:, s] = column
    return table


def _gate(matrix: sparse.csr_matrix, next_q: np.ndarray) -> sparse.csr_matrix:
    """Lift a system-level matrix to S x Q, keeping only the entry with q' = delta(q, L(s'))"""
    n_q, n = next_q.shape
    coo = matrix.tocoo()
    q = np.arange(n_q, dtype=np.int64)
    rows = (coo.row.astype(np.int64)[:, None] * n_q + q[None, :]).ravel()
    cols = (coo.col.astype(np.int64)[:, None] * n_q + next_q[:, coo.col].T).ravel()
    data = np.repeat(coo.data, n_q)
    return sparse.csr_matrix((data, (rows, cols)), shape=(n * n_q, n * n_q))


def _gate_init(init_tilde: np.ndarray, next_q: np.ndarray, initial: int) -> np.ndarray:
    n_q, n = next_q.shape
    init = np.zeros(n * n_q)
    support = np.flatnonzero(init_tilde)
    init[support * n_q + next_q[initial, support]] = init_tilde[support]
    return init


def _assemble(name: str, d: Dfa, actions: Tuple[str, ...], states: Tuple[tuple, ...], labels: Tuple[Labels, ...],
              layout: Tuple[Slot, ...], ptilde: Mapping[str, sparse.csr_matrix],
              init_tilde: np.ndarray) -> ProductMdp:
    next_q = _successor_table(d, labels)
    transitions = {a: _gate(m, next_q) for a, m in ptilde.items()}
    init = _gate_init(init_tilde, next_q, d.index[d.initial])
    return ProductMdp(name, d, actions, states, labels, layout, ptilde, init_tilde, next_q, transitions, init)


def build_product(m: Mdp, d: Dfa, strict: bool = False) -> ProductMdp:
    """
    Product of a composed system with a DFA over the full S x Q.

    Propositions the DFA mentions but the model never emits read as false;
    this is reported once per call, or rejected when `strict` is set.

    Raises:
        ValidationError: in strict mode, when the DFA uses propositions absent from the model
    """
    missing = d.alphabet - m.props
    if missing:
        names = ", ".join(sorted(str(p) for p in missing))
        if strict:
            raise ValidationError(f"DFA propositions never emitted by the model: {names}")
        logger.warning(f"DFA propositions never emitted by the model read as false: {names}")

    states = tuple(s if isinstance(s, tuple) else (s,) for s in m.states)
    layout = m.layout or (Slot(m.name, m.agent, tuple(m.states)),)
    product = _assemble(f"{m.name}x{len(d.states)}", d, m.actions, states, m.labels, layout,
                        dict(m.matrices), m.init.copy())
    logger.debug(f"Built product {product.name}: {product.system_size} system states, {product.size} product states")
    return product


def refine_product(p: ProductMdp, agent: Mc, position: int) -> Tuple[ProductMdp, np.ndarray]:
    """
    Replace the stationary abstraction at `position` with the agent's full chain.

    The intermediate functions are multiplied by the agent's transition and
    initial probabilities, the labels swap the agent's contribution, and the
    product is re-gated against the automaton; the flat system is never
    recomposed.

    Returns:
        The refined product and the index map [k, r] -> index of s_k|_{position <- r}

    Raises:
        RefinementError: position out of range, slot already full or agent mismatch
    """
    if not 0 < position < len(p.layout):
        raise RefinementError(f"agent position {position} out of range 1..{len(p.layout) - 1}")
    slot = p.layout[position]
    if slot.full:
        raise RefinementError(f"agent {slot.name} is already represented by its full model")
    if slot.agent != agent.agent or slot.name != agent.name:
        raise RefinementError(f"slot {position} abstracts {slot.name}@{slot.agent}, got {agent.name}@{agent.agent}")

    sizes = [len(s.states) for s in p.layout]
    index_of = refinement_index(sizes, position, agent.size)
    to_new = index_of.ravel()
    n = len(to_new)

    ptilde = {}
    for a, m in p.ptilde.items():
        coo = sparse.kron(m, agent.matrix, format="coo")
        refined = sparse.csr_matrix((coo.data, (to_new[coo.row], to_new[coo.col])), shape=(n, n))
        refined.eliminate_zeros()
        ptilde[a] = refined
    init_tilde = np.zeros(n)
    init_tilde[to_new] = np.kron(p.init_tilde, agent.init)

    states: list = [None] * n
    labels: list = [None] * n
    for k, (s, label) in enumerate(zip(p.system_states, p.system_labels)):
        kept = frozenset(prop for prop in label if prop.agent != slot.agent)
        for r, local in enumerate(agent.states):
            j = index_of[k, r]
            states[j] = replace(s, position, local)
            labels[j] = kept | agent.labels[r]

    layout = p.layout[:position] + (Slot(agent.name, agent.agent, tuple(agent.states)),) + p.layout[position + 1:]
    refined = _assemble(p.name, p.dfa, p.actions, tuple(states), tuple(labels), layout, ptilde, init_tilde)
    logger.debug(f"Refined {agent.name}: {p.size} -> {refined.size} product states")
    return refined, index_of


def accepting_states(p: ProductMdp) -> frozenset:
    """B_p as a set of (composite state, automaton state) pairs"""
    return frozenset(p.states[i] for i in np.flatnonzero(p.accepting))


def render_product(p: ProductMdp) -> str:
    """Debug dump in the MDP file format; composite states are written as <s0,...,sN|q>"""
    names = [p.describe_state(i) for i in range(p.size)]
    lines = ["kind mdp", f"name {p.name}", "agent 0", "states " + " ".join(names),
             "actions " + " ".join(p.actions)]
    for i in np.flatnonzero(p.init):
        lines.append(f"init {names[i]} {float(p.init[i])!r}")
    for i in range(p.size):
        for a in p.actions:
            matrix = p.transitions[a]
            start, end = matrix.indptr[i], matrix.indptr[i + 1]
            for j, prob in sorted(zip(matrix.indices[start:end], matrix.data[start:end])):
                lines.append(f"trans {names[i]} {a} {names[j]} {float(prob)!r}")
    for i in range(p.size):
        label = p.labels_of(i)
        if label:
            lines.append(f"label {names[i]} " + " ".join(sorted(str(prop) for prop in label)))
    return "\n".join(lines) + "\n"
