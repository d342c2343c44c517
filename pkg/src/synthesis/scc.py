"""
Strongly connected components and the block schedule of value iteration.

Precedence pairs (i, j) read "block i precedes block j": some state of j has
a successor in i. Block i must then be solved before block j, so the
processing order lists every block after the blocks it precedes.
"""
import heapq
from dataclasses import dataclass
from functools import cached_property
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from src.models.components import Mc, Mdp
from src.models.errors import PartitionError

VISIT, VISIT_EDGE, POST_VISIT = range(3)


@dataclass(frozen=True, eq=False)
class SccSet:
    """
    Blocks partitioning a state space together with their schedule.

    Attributes:
        n_states: size of the covered state space
        blocks: sorted state-index arrays
        tags: per block, the (parent block, agent block) pair it was derived from
        precedence: pairs (i, j) with block i preceding block j
        order: processing order, a linearization of the precedence
        self_loop: per block, whether a singleton block carries a self-loop (True for larger blocks)
    """

    n_states: int
    blocks: Tuple[np.ndarray, ...]
    tags: Tuple[Optional[Tuple[int, int]], ...]
    precedence: FrozenSet[Tuple[int, int]]
    order: Tuple[int, ...]
    self_loop: Tuple[bool, ...]

    def __len__(self) -> int:
        return len(self.blocks)

    @cached_property
    def block_of(self) -> np.ndarray:
        owner = np.full(self.n_states, -1, dtype=np.int64)
        for b, members in enumerate(self.blocks):
            owner[members] = b
        return owner

    def canonical(self, names: Optional[Sequence] = None) -> FrozenSet[FrozenSet]:
        """Block set with blocks as sets of state indices, or of `names` when given"""
        if names is None:
            return frozenset(frozenset(int(i) for i in b) for b in self.blocks)
        return frozenset(frozenset(names[i] for i in b) for b in self.blocks)

    def levels(self) -> List[List[int]]:
        """Blocks grouped so that every block only depends on blocks of earlier groups, each group in order"""
        depends = [[] for _ in self.blocks]
        for i, j in self.precedence:
            depends[j].append(i)
        level = [0] * len(self.blocks)
        for b in self.order:
            level[b] = 1 + max((level[i] for i in depends[b]), default=-1)
        groups: List[List[int]] = [[] for _ in range(max(level, default=-1) + 1)]
        for b in self.order:
            groups[level[b]].append(b)
        return groups


def _linearize(blocks: Sequence[np.ndarray], precedence: Iterable[Tuple[int, int]]) -> Tuple[int, ...]:
    """Kahn's algorithm; among ready blocks the one holding the smallest state index goes first"""
    waiting = [0] * len(blocks)
    unlocks: List[List[int]] = [[] for _ in blocks]
    for i, j in precedence:
        waiting[j] += 1
        unlocks[i].append(j)
    heap = [(int(blocks[b][0]), b) for b in range(len(blocks)) if waiting[b] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, b = heapq.heappop(heap)
        order.append(b)
        for j in unlocks[b]:
            waiting[j] -= 1
            if waiting[j] == 0:
                heapq.heappush(heap, (int(blocks[j][0]), j))
    if len(order) != len(blocks):
        raise PartitionError("block precedence is cyclic")
    return tuple(order)


def _edge_precedence(adjacency: sparse.csr_matrix, block_of: np.ndarray) -> FrozenSet[Tuple[int, int]]:
    coo = adjacency.tocoo()
    source, target = block_of[coo.row], block_of[coo.col]
    crossing = source != target
    pairs = np.unique(np.stack([target[crossing], source[crossing]], axis=1), axis=0)
    return frozenset((int(i), int(j)) for i, j in pairs)


def tarjan_sccs(adjacency: sparse.csr_matrix) -> SccSet:
    """
    Maximal SCCs of a directed graph given as a square boolean CSR matrix.

    Iterative path-based search, so graph depth is not limited by the recursion limit.
    """
    adjacency = sparse.csr_matrix(adjacency)
    n = adjacency.shape[0]
    indptr, indices = adjacency.indptr, adjacency.indices
    identified = np.zeros(n, dtype=bool)
    index = np.full(n, -1, dtype=np.int64)
    stack: List[int] = []
    boundaries: List[int] = []
    found: List[np.ndarray] = []

    for root in range(n):
        if index[root] >= 0:
            continue
        todo = [(VISIT, root)]
        while todo:
            op, v = todo.pop()
            if op == VISIT:
                index[v] = len(stack)
                stack.append(v)
                boundaries.append(index[v])
                todo.append((POST_VISIT, v))
                todo.extend((VISIT_EDGE, int(w)) for w in indices[indptr[v]:indptr[v + 1]])
            elif op == VISIT_EDGE:
                if index[v] < 0:
                    todo.append((VISIT, v))
                elif not identified[v]:
                    while index[v] < boundaries[-1]:
                        boundaries.pop()
            elif boundaries[-1] == index[v]:
                boundaries.pop()
                scc = np.sort(np.array(stack[index[v]:], dtype=np.int64))
                del stack[index[v]:]
                identified[scc] = True
                found.append(scc)

    # blocks in order of their smallest state
    found.sort(key=lambda b: int(b[0]))
    blocks = tuple(found)
    owner = np.empty(n, dtype=np.int64)
    for b, members in enumerate(blocks):
        owner[members] = b
    diagonal = adjacency.diagonal() != 0
    precedence = _edge_precedence(adjacency, owner)
    return SccSet(
        n_states=n,
        blocks=blocks,
        tags=(None,) * len(blocks),
        precedence=precedence,
        order=_linearize(blocks, precedence),
        self_loop=tuple(bool(diagonal[b[0]]) if len(b) == 1 else True for b in blocks),
    )


def system_sccs(m: Mdp) -> SccSet:
    return tarjan_sccs(m.adjacency())


def chain_sccs(m: Mc) -> SccSet:
    adjacency = sparse.csr_matrix(m.matrix)
    adjacency.eliminate_zeros()
    return tarjan_sccs((adjacency > 0).tocsr())


def _reflexive(sccs: SccSet) -> np.ndarray:
    closure = np.eye(len(sccs), dtype=bool)
    for i, j in sccs.precedence:
        closure[i, j] = True
    return closure


def derive_sccs(parent: SccSet, agent: SccSet, index_of: np.ndarray) -> SccSet:
    """
    SCCs of a system refined with one agent, from the SCCs of both factors.

    Every (parent block C, agent block C') pair yields one block C x C', or
    |C|.|C'| singletons when C or C' is a singleton without a self-loop. The
    candidate precedence relates blocks whose parents are related in both
    factors under the reflexive closure; it is acyclic and contains every
    precedence the transitions induce.

    Args:
        parent: SCCs of the system before refinement
        agent: SCCs of the agent's chain
        index_of: [k, r] -> index of s_k with the agent slot set to r

    Raises:
        PartitionError: the covers do not match index_of
    """
    if index_of.shape != (parent.n_states, agent.n_states):
        raise PartitionError(
            f"index map of shape {index_of.shape} does not match covers of "
            f"{parent.n_states} and {agent.n_states} states")

    blocks: List[np.ndarray] = []
    tags: List[Tuple[int, int]] = []
    self_loop: List[bool] = []
    for i, c in enumerate(parent.blocks):
        splits_parent = len(c) == 1 and not parent.self_loop[i]
        for j, c_agent in enumerate(agent.blocks):
            members = index_of[np.ix_(c, c_agent)]
            if splits_parent or (len(c_agent) == 1 and not agent.self_loop[j]):
                for state in np.sort(members.ravel()):
                    blocks.append(np.array([state], dtype=np.int64))
                    tags.append((i, j))
                    self_loop.append(False)
            else:
                blocks.append(np.sort(members.ravel()))
                tags.append((i, j))
                self_loop.append(len(c) > 1 or len(c_agent) > 1 or (parent.self_loop[i] and agent.self_loop[j]))

    parent_le = _reflexive(parent)
    agent_le = _reflexive(agent)
    pi = np.array([t[0] for t in tags], dtype=np.int64)
    aj = np.array([t[1] for t in tags], dtype=np.int64)
    candidate = parent_le[np.ix_(pi, pi)] & agent_le[np.ix_(aj, aj)]
    candidate &= (pi[:, None] != pi[None, :]) | (aj[:, None] != aj[None, :])
    precedence = frozenset((int(a), int(b)) for a, b in zip(*np.nonzero(candidate)))

    return SccSet(
        n_states=index_of.size,
        blocks=tuple(blocks),
        tags=tuple(tags),
        precedence=precedence,
        order=_linearize(blocks, precedence),
        self_loop=tuple(self_loop),
    )


def product_partition(sccs: SccSet, n_q: int) -> SccSet:
    """Blocks C x Q over the product states, precedence and order inherited"""
    q = np.arange(n_q, dtype=np.int64)
    blocks = tuple((b[:, None] * n_q + q[None, :]).ravel() for b in sccs.blocks)
    return SccSet(
        n_states=sccs.n_states * n_q,
        blocks=blocks,
        tags=sccs.tags,
        precedence=sccs.precedence,
        order=sccs.order,
        self_loop=sccs.self_loop,
    )


def check_partition(sccs: SccSet, n_states: int) -> None:
    """
    Raises:
        PartitionError: blocks overlap or miss a state
    """
    if sccs.n_states != n_states:
        raise PartitionError(f"blocks cover {sccs.n_states} states, expected {n_states}")
    counts = np.zeros(n_states, dtype=np.int64)
    for b in sccs.blocks:
        np.add.at(counts, b, 1)
    if (counts > 1).any():
        raise PartitionError(f"state {int(np.flatnonzero(counts > 1)[0])} lies in more than one block")
    if (counts == 0).any():
        raise PartitionError(f"state {int(np.flatnonzero(counts == 0)[0])} lies in no block")
    if sorted(sccs.order) != list(range(len(sccs.blocks))):
        raise PartitionError("processing order is not a permutation of the blocks")


def render_sccs(sccs: SccSet, names: Sequence[str]) -> str:
    """Debug dump, one line per block: scc <idx> derived-from <i>,<j> : <states...>"""
    lines = []
    for b in sccs.order:
        tag = sccs.tags[b]
        origin = f"{tag[0]},{tag[1]}" if tag is not None else "-"
        lines.append(f"scc {b} derived-from {origin} : " + " ".join(names[i] for i in sccs.blocks[b]))
    return "\n".join(lines) + "\n"
