from typing import AbstractSet, Optional


class SynthesisError(Exception):
    """Base class for every error the tool reports to the user"""

    exit_code = 1
    # input file the error was found in, when the message does not name it
    source: Optional[str] = None

    def diagnostic(self) -> str:
        text = str(self)
        if self.source and not text.startswith(self.source):
            return f"{self.source}: {text}"
        return text


class ParseError(SynthesisError):
    """Malformed input text; carries the offending file and line when known"""

    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.message = message
        self.path = path
        self.line = line
        super().__init__(self.location() + message)

    def location(self) -> str:
        if self.path is None and self.line is None:
            return ""
        parts = [self.path or "<text>"]
        if self.line is not None:
            parts.append(str(self.line))
        return ":".join(parts) + ": "

    def at(self, path: str) -> "ParseError":
        """Copy of this error attributed to a file"""
        return type(self)(self.message, path, self.line)


class UsageError(SynthesisError):
    """Invalid command-line values"""

    exit_code = 2


class ValidationError(SynthesisError):
    """Well-formed input that violates a model invariant"""

    exit_code = 3


class WitnessError(ValidationError):
    """DFA determinism/completeness failure with the valuation that exposes it"""

    def __init__(self, message: str, state: str, witness: AbstractSet):
        self.state = state
        self.witness = frozenset(witness)
        rendered = "{" + ", ".join(sorted(str(p) for p in self.witness)) + "}"
        super().__init__(f"{message} at state {state}, witness valuation {rendered}")


class DfaOverlapError(WitnessError):
    """Two outgoing guards are simultaneously true"""


class DfaIncompleteError(WitnessError):
    """No outgoing guard is true"""


class SupportTooLargeError(ValidationError):
    """Guard support too large to enumerate"""


class RefinementError(ValidationError):
    """refine_product called on an agent that cannot be refined"""


class PartitionError(ValidationError):
    """Blocks handed to the block solver do not partition the state space"""


class RosterError(ValidationError):
    """Policy roster does not match the supplied agents"""


class ProjectionError(ValidationError):
    """A full-model state projects outside the policy domain"""


class InconsistentValuesError(ValidationError):
    """Probability vector admits no progress-making optimal action"""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (fixed-point residual {residual:.3e})")
