"""
Boolean guards over namespaced propositions.

Grammar:
    expr   :: term ('|' term)*
    term   :: factor ('&' factor)*
    factor :: '!' factor
              '(' expr ')'
              'true' | 'false'
              prop            (name@agent)
              macro-name      (expanded while parsing)
"""
import re
from dataclasses import dataclass
from typing import AbstractSet, FrozenSet, Iterator, Mapping, Optional, Tuple, Union

from src.models.components import Prop
from src.models.errors import ParseError


@dataclass(frozen=True)
class Const:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Lit:
    prop: Prop

    def __str__(self) -> str:
        return str(self.prop)


@dataclass(frozen=True)
class Not:
    operand: "Guard"

    def __str__(self) -> str:
        return f"!{_wrap(self.operand)}"


@dataclass(frozen=True)
class And:
    operands: Tuple["Guard", ...]

    def __str__(self) -> str:
        return " & ".join(_wrap(g) for g in self.operands)


@dataclass(frozen=True)
class Or:
    operands: Tuple["Guard", ...]

    def __str__(self) -> str:
        return " | ".join(_wrap(g) for g in self.operands)


Guard = Union[Const, Lit, Not, And, Or]

TRUE = Const(True)
FALSE = Const(False)


def _wrap(g: Guard) -> str:
    return f"({g})" if isinstance(g, (And, Or)) else str(g)


def eval_guard(g: Guard, labels: AbstractSet[Prop]) -> bool:
    """A proposition literal holds iff it is in the label set"""
    if isinstance(g, Lit):
        return g.prop in labels
    if isinstance(g, Not):
        return not eval_guard(g.operand, labels)
    if isinstance(g, And):
        return all(eval_guard(o, labels) for o in g.operands)
    if isinstance(g, Or):
        return any(eval_guard(o, labels) for o in g.operands)
    return g.value


def support(g: Guard) -> FrozenSet[Prop]:
    """Propositions the guard mentions"""
    if isinstance(g, Lit):
        return frozenset((g.prop,))
    if isinstance(g, Not):
        return support(g.operand)
    if isinstance(g, (And, Or)):
        return frozenset().union(*(support(o) for o in g.operands))
    return frozenset()


class GuardParser:
    """Recursive-descent parser for one guard expression"""

    # Singleton end-of-expression marker.
    END = object()

    PATTERN = re.compile(r"\s*(?:([()&|!])|([^\W\d]\w*@\d+)|([^\W\d]\w*))")

    def __init__(self, text: str, macros: Mapping[str, Guard]):
        self.text = text
        self.macros = macros
        self.tokens = self._tokenize(text)
        self.token = next(self.tokens)

    @classmethod
    def _tokenize(cls, text: str) -> Iterator[object]:
        pos = 0
        while True:
            m = cls.PATTERN.match(text, pos)
            if m is None or m.end() == pos:
                if text[pos:].strip() == "":
                    yield cls.END
                    return
                raise ParseError(f"couldn't parse guard text {text[pos:].strip()!r}")
            pos = m.end()
            if m.group(1):
                yield m.group(1)
            elif m.group(2):
                yield Prop.parse(m.group(2))
            else:
                yield m.group(3)

    def _describe(self, token: object) -> str:
        return "<end of expression>" if token is self.END else repr(str(token))

    def _advance(self) -> None:
        self.token = next(self.tokens)

    def _accept(self, symbol: str) -> bool:
        if self.token == symbol:
            self._advance()
            return True
        return False

    def _expect(self, symbol: str) -> None:
        if not self._accept(symbol):
            raise ParseError(f"expected {symbol!r} in guard, have {self._describe(self.token)}")

    def parse(self) -> Guard:
        g = self._expr()
        if self.token is not self.END:
            raise ParseError(f"unexpected {self._describe(self.token)} in guard {self.text!r}")
        return g

    def _expr(self) -> Guard:
        operands = [self._term()]
        while self._accept("|"):
            operands.append(self._term())
        return operands[0] if len(operands) == 1 else Or(tuple(operands))

    def _term(self) -> Guard:
        operands = [self._factor()]
        while self._accept("&"):
            operands.append(self._factor())
        return operands[0] if len(operands) == 1 else And(tuple(operands))

    def _factor(self) -> Guard:
        token = self.token
        if self._accept("!"):
            return Not(self._factor())
        if self._accept("("):
            g = self._expr()
            self._expect(")")
            return g
        if isinstance(token, Prop):
            self._advance()
            return Lit(token)
        if token in ("true", "false"):
            self._advance()
            return TRUE if token == "true" else FALSE
        if isinstance(token, str) and token not in "()&|!":
            if token not in self.macros:
                raise ParseError(f"unknown macro {token!r} (macros must be defined before use)")
            self._advance()
            return self.macros[token]
        raise ParseError(f"expected '!', '(', a proposition or a macro, have {self._describe(token)}")


def parse_guard(text: str, macros: Optional[Mapping[str, Guard]] = None) -> Guard:
    """
    Parse a guard expression, expanding macro references.

    Raises:
        ParseError: on syntax errors or undefined macros
    """
    return GuardParser(text, macros or {}).parse()
