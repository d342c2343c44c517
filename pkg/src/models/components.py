"""Plant and agent models: deterministic transition systems, Markov chains and MDPs."""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Hashable, Iterable, Mapping, Optional, Tuple

import numpy as np
from scipy import sparse

from src.models.errors import ParseError, ValidationError

# Row sums and initial distributions must hit 1 within this slack
ROW_TOLERANCE = 1e-9

State = Hashable


@dataclass(frozen=True, order=True)
class Prop:
    """Atomic proposition namespaced by the index of the agent that emits it (0 = plant)"""

    base: str
    agent: int

    def __str__(self) -> str:
        return f"{self.base}@{self.agent}"

    @classmethod
    def parse(cls, text: str) -> "Prop":
        base, sep, agent = text.rpartition("@")
        if not sep or not base or not agent.isdigit():
            raise ParseError(f"expected <name>@<agent>, got {text!r}")
        return cls(base, int(agent))


Labels = FrozenSet[Prop]


@dataclass(frozen=True)
class Slot:
    """
    One position of a composite state.

    A pinned slot stands for a stationary abstraction of the named agent and
    holds exactly one local state.
    """

    name: str
    agent: int
    states: Tuple[str, ...]
    pinned: Optional[str] = None

    @property
    def full(self) -> bool:
        return self.pinned is None

    def describe(self) -> str:
        return f"{self.name}:full" if self.full else f"{self.name}:pinned:{self.pinned}"


class BaseComponent(ABC):
    """Common interface of the plant and agent models"""

    name: str
    agent: int
    states: Tuple[State, ...]
    labels: Tuple[Labels, ...]
    props: FrozenSet[Prop]

    @property
    @abstractmethod
    def kind(self) -> str:
        """File-format kind keyword (dfts, mc or mdp)"""

    @abstractmethod
    def validate(self) -> None:
        """
        Check the model invariants.

        Raises:
            ValidationError: naming the first offending state
        """

    @cached_property
    def index(self) -> Dict[State, int]:
        return {s: i for i, s in enumerate(self.states)}

    @property
    def size(self) -> int:
        return len(self.states)

    def label_of(self, state: State) -> Labels:
        return self.labels[self.index[state]]


def _labels_tuple(states: Tuple[State, ...], labels: Mapping[State, Iterable[Prop]]) -> Tuple[Labels, ...]:
    return tuple(frozenset(labels.get(s, ())) for s in states)


def _alphabet(labels: Tuple[Labels, ...]) -> FrozenSet[Prop]:
    return frozenset().union(*labels) if labels else frozenset()


def _distribution(states: Tuple[State, ...], index: Mapping[State, int], values: Mapping[State, float]) -> np.ndarray:
    vector = np.zeros(len(states))
    for s, p in values.items():
        vector[index[s]] += p
    return vector


def _csr(n: int, entries: Iterable[Tuple[int, int, float]]) -> sparse.csr_matrix:
    rows, cols, vals = [], [], []
    for i, j, p in entries:
        if p != 0.0:
            rows.append(i)
            cols.append(j)
            vals.append(p)
    return sparse.csr_matrix(
        (np.asarray(vals, dtype=float), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(n, n),
    )


def row_sums(matrix: sparse.spmatrix) -> np.ndarray:
    return np.asarray(matrix.sum(axis=1)).ravel()


def _check_distribution(name: str, vector: np.ndarray) -> None:
    if abs(vector.sum() - 1.0) > ROW_TOLERANCE:
        raise ValidationError(f"{name}: initial distribution sums to {vector.sum():.12g}, expected 1")
    if (vector < 0).any() or (vector > 1).any():
        raise ValidationError(f"{name}: initial probabilities must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class Dfts(BaseComponent):
    """Deterministic finite transition system: at most one successor per (state, action)"""

    name: str
    states: Tuple[str, ...]
    actions: Tuple[str, ...]
    transitions: Mapping[Tuple[str, str], str]
    initial: str
    labels: Tuple[Labels, ...]
    props: FrozenSet[Prop]
    agent: int = 0

    @property
    def kind(self) -> str:
        return "dfts"

    @classmethod
    def from_edges(
        cls,
        name: str,
        states: Iterable[str],
        actions: Iterable[str],
        transitions: Mapping[Tuple[str, str], str],
        initial: str,
        labels: Mapping[str, Iterable[Prop]],
        agent: int = 0,
    ) -> "Dfts":
        states = tuple(states)
        label_tuple = _labels_tuple(states, labels)
        return cls(name, states, tuple(actions), dict(transitions), initial, label_tuple, _alphabet(label_tuple), agent)

    def post(self, state: str, action: str) -> Optional[str]:
        return self.transitions.get((state, action))

    def enabled_actions(self, state: str) -> Tuple[str, ...]:
        return tuple(a for a in self.actions if (state, a) in self.transitions)

    def validate(self) -> None:
        if not self.states:
            raise ValidationError(f"{self.name}: no states")
        if self.initial not in self.index:
            raise ValidationError(f"{self.name}: unknown initial state {self.initial}")
        for (s, a), t in self.transitions.items():
            if s not in self.index or t not in self.index:
                raise ValidationError(f"{self.name}: transition {s} {a} {t} uses an unknown state")
        for s in self.states:
            if not self.enabled_actions(s):
                raise ValidationError(f"{self.name}: state {s} has no enabled action")

    def to_mdp(self) -> "Mdp":
        """The same graph as an MDP with probability-1 transitions"""
        matrices = {
            a: _csr(self.size, ((self.index[s], self.index[t], 1.0)
                                for (s, b), t in self.transitions.items() if b == a))
            for a in self.actions
        }
        init = np.zeros(self.size)
        init[self.index[self.initial]] = 1.0
        return Mdp(self.name, self.states, self.actions, matrices, init, self.labels, self.props, self.agent)


@dataclass(frozen=True, eq=False)
class Mc(BaseComponent):
    """Discrete-time Markov chain; `pinned` marks a stationary abstraction of an agent"""

    name: str
    states: Tuple[State, ...]
    matrix: sparse.csr_matrix
    init: np.ndarray
    labels: Tuple[Labels, ...]
    props: FrozenSet[Prop]
    agent: int = 0
    pinned: Optional[str] = None

    @property
    def kind(self) -> str:
        return "mc"

    @classmethod
    def from_rows(
        cls,
        name: str,
        states: Iterable[State],
        rows: Mapping[State, Mapping[State, float]],
        init: Mapping[State, float],
        labels: Mapping[State, Iterable[Prop]],
        agent: int = 0,
    ) -> "Mc":
        states = tuple(states)
        index = {s: i for i, s in enumerate(states)}
        matrix = _csr(len(states), ((index[s], index[t], p) for s, row in rows.items() for t, p in row.items()))
        label_tuple = _labels_tuple(states, labels)
        return cls(name, states, matrix, _distribution(states, index, init), label_tuple, _alphabet(label_tuple), agent)

    def probability(self, source: State, target: State) -> float:
        return float(self.matrix[self.index[source], self.index[target]])

    def row(self, state: State) -> Dict[State, float]:
        i = self.index[state]
        start, end = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return {self.states[j]: float(p) for j, p in zip(self.matrix.indices[start:end], self.matrix.data[start:end])}

    def initial_distribution(self) -> Dict[State, float]:
        return {self.states[i]: float(p) for i, p in enumerate(self.init) if p != 0.0}

    def validate(self) -> None:
        if not self.states:
            raise ValidationError(f"{self.name}: no states")
        if (self.matrix.data < 0).any() or (self.matrix.data > 1).any():
            raise ValidationError(f"{self.name}: probabilities must lie in [0, 1]")
        sums = row_sums(self.matrix)
        for i, total in enumerate(sums):
            if abs(total - 1.0) > ROW_TOLERANCE:
                raise ValidationError(
                    f"{self.name}: row of state {self.states[i]} sums to {total:.12g}, expected 1")
        _check_distribution(self.name, self.init)

    def as_mdp(self, action: str = "step") -> "Mdp":
        """The chain as a one-action MDP"""
        return Mdp(self.name, self.states, (action,), {action: self.matrix}, self.init,
                   self.labels, self.props, self.agent)


@dataclass(frozen=True, eq=False)
class Mdp(BaseComponent):
    """
    Markov decision process with one sparse matrix per action.

    An action is enabled in a state iff its row sums to 1; disabled rows are empty.
    Composite systems carry `layout`, one slot per position of their tuple states.
    """

    name: str
    states: Tuple[State, ...]
    actions: Tuple[str, ...]
    matrices: Mapping[str, sparse.csr_matrix]
    init: np.ndarray
    labels: Tuple[Labels, ...]
    props: FrozenSet[Prop]
    agent: int = 0
    layout: Tuple[Slot, ...] = field(default=())

    @property
    def kind(self) -> str:
        return "mdp"

    @classmethod
    def from_rows(
        cls,
        name: str,
        states: Iterable[State],
        actions: Iterable[str],
        rows: Mapping[Tuple[State, str], Mapping[State, float]],
        init: Mapping[State, float],
        labels: Mapping[State, Iterable[Prop]],
        agent: int = 0,
    ) -> "Mdp":
        states = tuple(states)
        actions = tuple(actions)
        index = {s: i for i, s in enumerate(states)}
        matrices = {
            a: _csr(len(states), ((index[s], index[t], p)
                                  for (s, b), row in rows.items() if b == a for t, p in row.items()))
            for a in actions
        }
        label_tuple = _labels_tuple(states, labels)
        return cls(name, states, actions, matrices, _distribution(states, index, init),
                   label_tuple, _alphabet(label_tuple), agent)

    @cached_property
    def enabled(self) -> Dict[str, np.ndarray]:
        """Per action, boolean mask of the states where it is enabled"""
        return {a: np.abs(row_sums(m) - 1.0) <= ROW_TOLERANCE for a, m in self.matrices.items()}

    def enabled_actions(self, state: State) -> Tuple[str, ...]:
        i = self.index[state]
        return tuple(a for a in self.actions if self.enabled[a][i])

    def probability(self, source: State, action: str, target: State) -> float:
        return float(self.matrices[action][self.index[source], self.index[target]])

    def row(self, state: State, action: str) -> Dict[State, float]:
        matrix = self.matrices[action]
        i = self.index[state]
        start, end = matrix.indptr[i], matrix.indptr[i + 1]
        return {self.states[j]: float(p) for j, p in zip(matrix.indices[start:end], matrix.data[start:end])}

    def initial_distribution(self) -> Dict[State, float]:
        return {self.states[i]: float(p) for i, p in enumerate(self.init) if p != 0.0}

    def adjacency(self) -> sparse.csr_matrix:
        """Boolean graph: an edge wherever some action has positive probability"""
        total = sparse.csr_matrix((self.size, self.size))
        for matrix in self.matrices.values():
            total = total + matrix
        total.eliminate_zeros()
        return (total > 0).tocsr()

    def validate(self) -> None:
        if not self.states:
            raise ValidationError(f"{self.name}: no states")
        any_enabled = np.zeros(self.size, dtype=bool)
        for a, matrix in self.matrices.items():
            if (matrix.data < 0).any() or (matrix.data > 1).any():
                raise ValidationError(f"{self.name}: probabilities of action {a} must lie in [0, 1]")
            for i, total in enumerate(row_sums(matrix)):
                if abs(total) > ROW_TOLERANCE and abs(total - 1.0) > ROW_TOLERANCE:
                    raise ValidationError(
                        f"{self.name}: row of state {self.states[i]} under action {a} sums to "
                        f"{total:.12g}, expected 0 or 1")
            any_enabled |= self.enabled[a]
        missing = np.flatnonzero(~any_enabled)
        if missing.size:
            raise ValidationError(f"{self.name}: state {self.states[missing[0]]} has no enabled action")
        _check_distribution(self.name, self.init)
