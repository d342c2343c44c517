"""Line-oriented text format of plant and agent models."""
import math
import re
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

from src.models.components import Dfts, Mc, Mdp, Prop
from src.models.errors import ParseError, ValidationError

IDENTIFIER = re.compile(r"[^\W\d]\w*")

Component = Union[Dfts, Mc, Mdp]


def iter_directives(text: str, path: Optional[str] = None) -> Iterator[Tuple[int, str, List[str], str]]:
    """Yield (line number, keyword, arguments, comment-stripped line) for every non-blank line"""
    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        words = body.split()
        yield line_no, words[0], words[1:], body


def _probability(text: str, path: Optional[str], line_no: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"invalid probability {text!r}", path, line_no) from None
    if not math.isfinite(value):
        raise ParseError(f"invalid probability {text!r}", path, line_no)
    return value


def parse_component(text: str, path: Optional[str] = None) -> Component:
    """
    Parse a plant (dfts or mdp) or an agent (mc) description.

    Labels are namespaced with the declared agent index; state and action
    order follow declaration order.

    Raises:
        ParseError: malformed line or unknown state
        ValidationError: model invariant violated (row sums, nondeterminism, empty Act(s))
    """
    header: Dict[str, Tuple[int, List[str]]] = {}
    body: List[Tuple[int, str, List[str]]] = []

    for line_no, keyword, args, _ in iter_directives(text, path):
        if keyword in ("kind", "name", "agent", "states", "actions"):
            if keyword in header:
                raise ParseError(f"duplicate {keyword} line", path, line_no)
            header[keyword] = (line_no, args)
        elif keyword in ("init", "trans", "label"):
            body.append((line_no, keyword, args))
        else:
            raise ParseError(f"unknown directive {keyword!r}", path, line_no)

    for required in ("kind", "name", "states"):
        if required not in header:
            raise ParseError(f"missing {required} line", path)

    line_no, args = header["kind"]
    if len(args) != 1 or args[0] not in ("dfts", "mc", "mdp"):
        raise ParseError("expected kind dfts|mc|mdp", path, line_no)
    kind = args[0]

    line_no, args = header["name"]
    if len(args) != 1:
        raise ParseError("expected name <id>", path, line_no)
    name = args[0]

    agent = 0
    if "agent" in header:
        line_no, args = header["agent"]
        if len(args) != 1 or not args[0].isdigit():
            raise ParseError("expected agent <non-negative integer>", path, line_no)
        agent = int(args[0])

    line_no, states = header["states"]
    if not states:
        raise ParseError("states needs at least one identifier", path, line_no)
    for s in states:
        if not IDENTIFIER.fullmatch(s):
            raise ParseError(f"invalid state identifier {s!r}", path, line_no)
    if len(set(states)) != len(states):
        raise ParseError("duplicate state in states line", path, line_no)
    known = set(states)

    declared_actions: Optional[List[str]] = None
    if "actions" in header:
        line_no, declared_actions = header["actions"]
        if kind == "mc":
            raise ParseError("a Markov chain has no actions", path, line_no)

    def state(token: str, at: int) -> str:
        if token not in known:
            raise ParseError(f"unknown state {token!r}", path, at)
        return token

    def action(token: str, at: int) -> str:
        if not IDENTIFIER.fullmatch(token):
            raise ParseError(f"invalid action identifier {token!r}", path, at)
        if declared_actions is not None and token not in declared_actions:
            raise ParseError(f"undeclared action {token!r}", path, at)
        if token not in seen_actions:
            seen_actions.append(token)
        return token

    seen_actions: List[str] = []
    labels: Dict[str, set] = {}
    init: Dict[str, float] = {}
    dfts_init: Optional[str] = None
    edges: Dict[tuple, object] = {}

    for line_no, keyword, args in body:
        if keyword == "label":
            if not args:
                raise ParseError("expected label <state> <prop>...", path, line_no)
            s = state(args[0], line_no)
            for p in args[1:]:
                if not IDENTIFIER.fullmatch(p):
                    raise ParseError(f"invalid proposition {p!r} (the @agent suffix is added automatically)",
                                     path, line_no)
                labels.setdefault(s, set()).add(Prop(p, agent))
        elif keyword == "init":
            if kind == "dfts":
                if len(args) != 1:
                    raise ParseError("expected init <state>", path, line_no)
                if dfts_init is not None:
                    raise ParseError("a transition system has exactly one initial state", path, line_no)
                dfts_init = state(args[0], line_no)
            else:
                if len(args) != 2:
                    raise ParseError("expected init <state> <prob>", path, line_no)
                s = state(args[0], line_no)
                init[s] = init.get(s, 0.0) + _probability(args[1], path, line_no)
        elif kind == "dfts":
            if len(args) != 3:
                raise ParseError("expected trans <src> <action> <dst>", path, line_no)
            key = (state(args[0], line_no), action(args[1], line_no))
            if key in edges:
                raise ValidationError(
                    f"{path or name}:{line_no}: state {key[0]} has more than one successor under {key[1]}")
            edges[key] = state(args[2], line_no)
        elif kind == "mc":
            if len(args) != 3:
                raise ParseError("expected trans <src> <dst> <prob>", path, line_no)
            key = (state(args[0], line_no), state(args[1], line_no))
            if key in edges:
                raise ParseError(f"duplicate transition {key[0]} -> {key[1]}", path, line_no)
            edges[key] = _probability(args[2], path, line_no)
        else:
            if len(args) != 4:
                raise ParseError("expected trans <src> <action> <dst> <prob>", path, line_no)
            key = (state(args[0], line_no), action(args[1], line_no), state(args[2], line_no))
            if key in edges:
                raise ParseError(f"duplicate transition {key[0]} {key[1]} -> {key[2]}", path, line_no)
            edges[key] = _probability(args[3], path, line_no)

    actions = tuple(declared_actions if declared_actions is not None else seen_actions)

    component: Component
    if kind == "dfts":
        if dfts_init is None:
            raise ParseError("missing init line", path)
        component = Dfts.from_edges(name, states, actions, edges, dfts_init, labels, agent)
    elif kind == "mc":
        rows: Dict[str, Dict[str, float]] = {}
        for (s, t), p in edges.items():
            rows.setdefault(s, {})[t] = p
        if not init:
            raise ParseError("missing init line", path)
        component = Mc.from_rows(name, states, rows, init, labels, agent)
    else:
        mdp_rows: Dict[Tuple[str, str], Dict[str, float]] = {}
        for (s, a, t), p in edges.items():
            mdp_rows.setdefault((s, a), {})[t] = p
        if not init:
            raise ParseError("missing init line", path)
        component = Mdp.from_rows(name, states, actions, mdp_rows, init, labels, agent)

    component.validate()
    return component


def render_component(component: Component) -> str:
    """Inverse of parse_component: parse(render(c)) reproduces c exactly"""
    lines = [f"kind {component.kind}", f"name {component.name}", f"agent {component.agent}",
             "states " + " ".join(component.states)]
    if isinstance(component, (Dfts, Mdp)) and component.actions:
        lines.append("actions " + " ".join(component.actions))

    if isinstance(component, Dfts):
        lines.append(f"init {component.initial}")
        for s in component.states:
            for a in component.actions:
                t = component.post(s, a)
                if t is not None:
                    lines.append(f"trans {s} {a} {t}")
    elif isinstance(component, Mc):
        for s, p in component.initial_distribution().items():
            lines.append(f"init {s} {p!r}")
        for s in component.states:
            row = component.row(s)
            for t in sorted(row, key=component.index.__getitem__):
                lines.append(f"trans {s} {t} {row[t]!r}")
    else:
        for s, p in component.initial_distribution().items():
            lines.append(f"init {s} {p!r}")
        for s in component.states:
            for a in component.actions:
                row = component.row(s, a)
                for t in sorted(row, key=component.index.__getitem__):
                    lines.append(f"trans {s} {a} {t} {row[t]!r}")

    for s, labels in zip(component.states, component.labels):
        if labels:
            lines.append(f"label {s} " + " ".join(sorted(p.base for p in labels)))
    return "\n".join(lines) + "\n"


def load_component(path: Union[str, Path]) -> Component:
    """Read and parse a component file, attributing errors to it"""
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read file: {e.strerror}", path) from e
    except UnicodeDecodeError as e:
        raise ParseError("file is not valid UTF-8", path) from e
    try:
        return parse_component(text, path)
    except ValidationError as e:
        e.source = path
        raise
