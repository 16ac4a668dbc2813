"""Exception hierarchy shared across the toolkit.

All data and contract failures raise a subclass of :class:`SgEvalError`
so the CLI can map them onto a single exit code.
"""

from __future__ import annotations


class SgEvalError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SgEvalError):
    """Invalid configuration value or combination."""


class ParseError(SgEvalError):
    """Malformed input file; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class VocabularyError(SgEvalError):
    """A label string is not present in the vocabulary."""

    def __init__(self, label: str, kind: str = "label"):
        super().__init__(f"unknown {kind}: {label!r}")
        self.label = label


class DuplicationError(SgEvalError):
    """Duplicate image id or label where uniqueness is required."""


class AlignmentError(SgEvalError):
    """Prediction and ground-truth splits do not cover the same images."""


class TaskContractError(SgEvalError):
    """Input violates the object-list contract of the evaluation task."""


class ContractError(SgEvalError):
    """A caller-side precondition was violated (e.g. unsorted input)."""


class HarnessOrderError(SgEvalError):
    """Ablation steps applied out of order."""


class MetricUndefinedError(SgEvalError):
    """The requested metric has an empty denominator."""


class AdapterError(SgEvalError):
    """Source annotation file does not match the expected schema."""
