"""Shared error types."""

from __future__ import annotations


class ParseError(Exception):
    """Lex, grammar, or resolution failure with a character offset.

    kind is one of "lex", "grammar", "resolution"; position is an offset
    into the offending input (0 for whole-document problems).
    """

    def __init__(self, kind: str, position: int, message: str) -> None:
        assert kind in ("lex", "grammar", "resolution")
        self.kind = kind
        self.position = position
        self.message = message
        super().__init__(f"{kind} error at {position}: {message}")


class SynthesisError(Exception):
    """Corpus synthesis could not meet its contract (e.g. yield below 50%)."""
