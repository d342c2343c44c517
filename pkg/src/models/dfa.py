"""Deterministic finite automata over namespaced propositions and their text format."""
import itertools
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import AbstractSet, Dict, FrozenSet, List, Mapping, Optional, Tuple, Union

from src.models.components import Prop
from src.models.errors import (
    DfaIncompleteError,
    DfaOverlapError,
    ParseError,
    SupportTooLargeError,
    ValidationError,
)
from src.models.guard import Guard, eval_guard, parse_guard, support
from src.models.parser import IDENTIFIER, iter_directives

# Determinism is checked by enumerating 2^n valuations of a state's guard support
MAX_SUPPORT = 20


@dataclass(frozen=True, eq=False)
class Dfa:
    """Specification automaton; each state lists its outgoing (guard, target) pairs in file order"""

    states: Tuple[str, ...]
    initial: str
    accepting: FrozenSet[str]
    transitions: Mapping[str, Tuple[Tuple[Guard, str], ...]]
    macros: Mapping[str, Guard]

    @cached_property
    def index(self) -> Dict[str, int]:
        return {q: i for i, q in enumerate(self.states)}

    @cached_property
    def alphabet(self) -> FrozenSet[Prop]:
        """Every proposition some guard mentions"""
        return frozenset().union(*(support(g) for edges in self.transitions.values() for g, _ in edges))

    def successor(self, state: str, labels: AbstractSet[Prop]) -> str:
        for g, target in self.transitions[state]:
            if eval_guard(g, labels):
                return target
        # unreachable for validated automata
        raise DfaIncompleteError("no guard holds", state, labels & self.alphabet)

    def validate(self) -> None:
        """
        Check that every state has exactly one true outgoing guard per valuation.

        Raises:
            DfaOverlapError: two guards hold together
            DfaIncompleteError: no guard holds
            SupportTooLargeError: more than MAX_SUPPORT propositions to enumerate
        """
        if not self.accepting:
            raise ValidationError("DFA has no accepting state")
        for q in self.states:
            edges = self.transitions.get(q, ())
            props = sorted(frozenset().union(*(support(g) for g, _ in edges)) if edges else ())
            if len(props) > MAX_SUPPORT:
                raise SupportTooLargeError(
                    f"state {q}: guard support has {len(props)} propositions, at most {MAX_SUPPORT} allowed")
            for values in itertools.product((False, True), repeat=len(props)):
                valuation = frozenset(p for p, v in zip(props, values) if v)
                holding = sum(1 for g, _ in edges if eval_guard(g, valuation))
                if holding == 0:
                    raise DfaIncompleteError("no outgoing guard holds", q, valuation)
                if holding > 1:
                    raise DfaOverlapError(f"{holding} outgoing guards hold", q, valuation)


def parse_dfa(text: str, path: Optional[str] = None) -> Dfa:
    """
    Parse and validate a DFA file.

    Directives: kind dfa; states; init; accept; def <name> = <guard>; trans <src> <dst> <guard>.

    Raises:
        ParseError: malformed text
        ValidationError: nondeterministic or incomplete automaton
    """
    kind: Optional[str] = None
    states: Optional[Tuple[str, ...]] = None
    initial: Optional[str] = None
    accepting: Optional[FrozenSet[str]] = None
    macros: Dict[str, Guard] = {}
    edges: List[Tuple[int, str, str, Guard]] = []

    for line_no, keyword, args, raw in iter_directives(text, path):
        try:
            if keyword == "kind":
                _arity(args, 1)
                if args[0] != "dfa":
                    raise ParseError(f"expected kind dfa, got {args[0]}")
                kind = args[0]
            elif keyword == "states":
                if not args:
                    raise ParseError("states needs at least one identifier")
                _identifiers(args)
                if len(set(args)) != len(args):
                    raise ParseError("duplicate state in states line")
                states = tuple(args)
            elif keyword == "init":
                _arity(args, 1)
                initial = args[0]
            elif keyword == "accept":
                accepting = frozenset(args)
            elif keyword == "def":
                name, eq, body = raw.partition("=")
                name = name.split(None, 1)[1].strip() if len(name.split()) == 2 else ""
                if not eq or not IDENTIFIER.fullmatch(name) or name in ("true", "false"):
                    raise ParseError("expected def <name> = <guard>")
                macros[name] = parse_guard(body, macros)
            elif keyword == "trans":
                if len(args) < 3:
                    raise ParseError("expected trans <src> <dst> <guard>")
                src, dst = args[0], args[1]
                body = raw.split(None, 3)[3]
                edges.append((line_no, src, dst, parse_guard(body, macros)))
            else:
                raise ParseError(f"unknown directive {keyword!r}")
        except ParseError as e:
            if e.line is None:
                raise ParseError(e.message, path, line_no) from e
            raise

    if kind is None:
        raise ParseError("missing kind dfa line", path)
    if states is None:
        raise ParseError("missing states line", path)
    if initial is None:
        raise ParseError("missing init line", path)
    known = set(states)
    if initial not in known:
        raise ParseError(f"unknown initial state {initial}", path)
    if accepting is None:
        raise ParseError("missing accept line", path)
    for q in accepting:
        if q not in known:
            raise ParseError(f"unknown accepting state {q}", path)

    transitions: Dict[str, List[Tuple[Guard, str]]] = {q: [] for q in states}
    for line_no, src, dst, g in edges:
        for q in (src, dst):
            if q not in known:
                raise ParseError(f"unknown state {q}", path, line_no)
        transitions[src].append((g, dst))

    dfa = Dfa(states, initial, accepting, {q: tuple(e) for q, e in transitions.items()}, macros)
    dfa.validate()
    return dfa


def _arity(args: List[str], n: int) -> None:
    if len(args) != n:
        raise ParseError(f"expected {n} argument(s), got {len(args)}")


def _identifiers(args: List[str]) -> None:
    for a in args:
        if not IDENTIFIER.fullmatch(a):
            raise ParseError(f"invalid identifier {a!r}")


def load_dfa(path: Union[str, Path]) -> Dfa:
    """Read and parse a DFA file, attributing errors to it"""
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read file: {e.strerror}", path) from e
    except UnicodeDecodeError as e:
        raise ParseError("file is not valid UTF-8", path) from e
    try:
        return parse_dfa(text, path)
    except ValidationError as e:
        e.source = path
        raise
