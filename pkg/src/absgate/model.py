"""Domain vocabulary: field values, outputs, expectations, audit traces.

The decision surface is deliberately closed: a run of the engine ends in
exactly one of two shapes, a recommendation of a single class or a typed
abstention, and nothing in this module can represent both at once. All value
types here are immutable, hashable where practical, and serialize through
``to_canonical`` into the shared canonical JSON form used for hashing and
reports (see ``canon``).

Numeric discipline: integers are 64-bit signed; decimals are exact
fixed-point with four fractional digits, carried as ``decimal.Decimal`` and
rendered as strings so no binary float ever reaches serialization.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Any, Mapping

from .canon import canonical_bytes

__all__ = [
    "IDENT_RE",
    "TOKEN_RE",
    "INT64_MIN",
    "INT64_MAX",
    "FieldKind",
    "FieldValue",
    "Action",
    "AbstentionCategory",
    "AbstentionReason",
    "SystemOutput",
    "MatchLevel",
    "ExpectedBehavior",
    "CaseInput",
    "Stage",
    "Verdict",
    "StageRecord",
    "AuditTrace",
    "PIPELINE_STAGES",
    "compare_outputs",
    "canonical_serialize",
]

# Identifiers name declared things (fields, classes, rules, labels); token
# values are the stricter lowercase vocabulary carried inside cases.
IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
TOKEN_RE = re.compile(r"^[a-z][a-z0-9_]*$")
_DECIMAL_TEXT_RE = re.compile(r"^-?[0-9]+\.[0-9]{1,4}$")

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

_QUANTUM = Decimal("0.0001")


class FieldKind(str, Enum):
    BOOLEAN = "boolean"
    INTEGER = "integer"
    DECIMAL = "decimal"
    TOKEN = "token"
    TOKEN_SET = "token_set"


@dataclass(frozen=True)
class FieldValue:
    """One typed case-input value; construct via the named classmethods."""

    kind: FieldKind
    value: Any

    @classmethod
    def boolean(cls, value: bool) -> "FieldValue":
        if not isinstance(value, bool):
            raise ValueError(f"boolean value required, got {value!r}")
        return cls(FieldKind.BOOLEAN, value)

    @classmethod
    def integer(cls, value: int) -> "FieldValue":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"integer value required, got {value!r}")
        if not INT64_MIN <= value <= INT64_MAX:
            raise ValueError(f"integer out of 64-bit signed range: {value}")
        return cls(FieldKind.INTEGER, value)

    @classmethod
    def decimal(cls, value: "Decimal | str") -> "FieldValue":
        if isinstance(value, str):
            try:
                value = Decimal(value)
            except InvalidOperation as exc:
                raise ValueError(f"not a decimal: {value!r}") from exc
        if not isinstance(value, Decimal) or not value.is_finite():
            raise ValueError(f"finite decimal required, got {value!r}")
        quantized = value.quantize(_QUANTUM)
        if quantized != value:
            raise ValueError(f"more than 4 fractional digits: {value}")
        if quantized == 0:
            quantized = abs(quantized)  # normalize -0.0000
        return cls(FieldKind.DECIMAL, quantized)

    @classmethod
    def token(cls, value: str) -> "FieldValue":
        if not isinstance(value, str) or not TOKEN_RE.match(value):
            raise ValueError(f"not a token (expected [a-z][a-z0-9_]*): {value!r}")
        return cls(FieldKind.TOKEN, value)

    @classmethod
    def token_set(cls, values: Any) -> "FieldValue":
        if isinstance(values, (str, bytes)) or not hasattr(values, "__iter__"):
            raise ValueError(f"token set requires a sequence of tokens, got {values!r}")
        items = list(values)
        for item in items:
            if not isinstance(item, str) or not TOKEN_RE.match(item):
                raise ValueError(f"not a token (expected [a-z][a-z0-9_]*): {item!r}")
        if len(set(items)) != len(items):
            raise ValueError(f"duplicate tokens in set: {items!r}")
        return cls(FieldKind.TOKEN_SET, frozenset(items))

    @classmethod
    def from_json(cls, raw: Any) -> "FieldValue":
        """Map a raw JSON value to its field kind.

        JSON shape decides the kind: bool, int, string (decimal syntax vs
        token syntax, which are disjoint), or array of tokens. Whether the
        kind suits a particular schema field is checked later, at bind time.
        """
        if isinstance(raw, bool):
            return cls.boolean(raw)
        if isinstance(raw, int):
            return cls.integer(raw)
        if isinstance(raw, str):
            if _DECIMAL_TEXT_RE.match(raw):
                return cls.decimal(raw)
            if TOKEN_RE.match(raw):
                return cls.token(raw)
            raise ValueError(f"string is neither decimal nor token: {raw!r}")
        if isinstance(raw, list):
            return cls.token_set(raw)
        raise ValueError(f"unsupported field value: {raw!r}")

    def to_canonical(self) -> Any:
        if self.kind is FieldKind.DECIMAL:
            return format(self.value, ".4f")
        if self.kind is FieldKind.TOKEN_SET:
            return sorted(self.value)
        return self.value


class Action(str, Enum):
    RECOMMEND = "recommend"
    ABSTAIN = "abstain"


class AbstentionCategory(str, Enum):
    MISSING_INPUTS = "missing_inputs"
    UNKNOWN_RISK = "unknown_risk"
    CONFLICTING_SIGNALS = "conflicting_signals"
    EXPLICIT_EXCLUSION = "explicit_exclusion"
    CONSERVATIVE_AMBIGUITY = "conservative_ambiguity"


@dataclass(frozen=True)
class AbstentionReason:
    """Why the engine declined, plus the identifiers that triggered it."""

    category: AbstentionCategory
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        normalized = tuple(sorted(set(self.labels)))
        for label in normalized:
            if not IDENT_RE.match(label):
                raise ValueError(f"label is not an identifier: {label!r}")
        if self.category is AbstentionCategory.EXPLICIT_EXCLUSION and not normalized:
            raise ValueError("explicit exclusion requires at least one label")
        object.__setattr__(self, "labels", normalized)

    def to_canonical(self) -> dict[str, Any]:
        return {"category": self.category.value, "labels": list(self.labels)}


@dataclass(frozen=True)
class SystemOutput:
    """Exactly one of: recommendation of a class, or typed abstention."""

    action: Action
    class_id: str | None = None
    reason: AbstentionReason | None = None

    def __post_init__(self) -> None:
        if self.action is Action.RECOMMEND:
            if self.class_id is None or self.reason is not None:
                raise ValueError("recommendation carries a class id and no reason")
            if not IDENT_RE.match(self.class_id):
                raise ValueError(f"class id is not an identifier: {self.class_id!r}")
        else:
            if self.reason is None or self.class_id is not None:
                raise ValueError("abstention carries a reason and no class id")

    @classmethod
    def recommend(cls, class_id: str) -> "SystemOutput":
        return cls(Action.RECOMMEND, class_id=class_id)

    @classmethod
    def abstain(cls, category: AbstentionCategory, labels: tuple[str, ...] | list[str]) -> "SystemOutput":
        return cls(Action.ABSTAIN, reason=AbstentionReason(category, tuple(labels)))

    def to_canonical(self) -> dict[str, Any]:
        if self.action is Action.RECOMMEND:
            return {"action": "recommend", "class": self.class_id}
        assert self.reason is not None
        return {
            "action": "abstain",
            "category": self.reason.category.value,
            "labels": list(self.reason.labels),
        }

    def render_line(self) -> str:
        """One-line human text form used by the decide command."""
        if self.action is Action.RECOMMEND:
            return f"recommend {self.class_id}"
        assert self.reason is not None
        labels = ", ".join(self.reason.labels)
        return f"abstain {self.reason.category.value} [{labels}]"


class MatchLevel(str, Enum):
    FULL = "full"
    ACTION = "action"
    MISMATCH = "mismatch"


@dataclass(frozen=True)
class ExpectedBehavior:
    """Expected action for a case; ``None`` detail means wildcard ("any")."""

    action: Action
    class_id: str | None = None
    category: AbstentionCategory | None = None

    def __post_init__(self) -> None:
        if self.action is Action.RECOMMEND:
            if self.category is not None:
                raise ValueError("recommend expectation cannot carry a category")
            if self.class_id is not None and not IDENT_RE.match(self.class_id):
                raise ValueError(f"class id is not an identifier: {self.class_id!r}")
        else:
            if self.class_id is not None:
                raise ValueError("abstain expectation cannot carry a class id")

    def to_canonical(self) -> dict[str, str]:
        if self.action is Action.RECOMMEND:
            return {"recommend": self.class_id if self.class_id is not None else "any"}
        return {"abstain": self.category.value if self.category is not None else "any"}


@dataclass(frozen=True)
class CaseInput:
    """One evaluation case: typed fields plus the expected behavior."""

    case_id: str
    description: str
    mechanism: str
    fields: Mapping[str, FieldValue]
    expected: ExpectedBehavior

    def __post_init__(self) -> None:
        if not IDENT_RE.match(self.case_id):
            raise ValueError(f"case id is not an identifier: {self.case_id!r}")
        if not TOKEN_RE.match(self.mechanism):
            raise ValueError(f"mechanism is not a token: {self.mechanism!r}")
        for name in self.fields:
            if not IDENT_RE.match(name):
                raise ValueError(f"field name is not an identifier: {name!r}")

    def to_canonical(self) -> dict[str, Any]:
        return {
            "id": self.case_id,
            "description": self.description,
            "mechanism": self.mechanism,
            "fields": {name: value.to_canonical() for name, value in self.fields.items()},
            "expect": self.expected.to_canonical(),
        }


class Stage(str, Enum):
    INPUT_ASSESSMENT = "input_assessment"
    EXCLUSIONS = "exclusions"
    CLINICAL_RULES = "clinical_rules"
    STEWARDSHIP = "stewardship"
    OUTPUT = "output"


PIPELINE_STAGES: tuple[Stage, ...] = (
    Stage.INPUT_ASSESSMENT,
    Stage.EXCLUSIONS,
    Stage.CLINICAL_RULES,
    Stage.STEWARDSHIP,
    Stage.OUTPUT,
)


class Verdict(str, Enum):
    FIRED = "fired"
    NOT_FIRED = "not_fired"
    INDETERMINATE = "indeterminate"
    VETOED = "vetoed"


@dataclass(frozen=True)
class StageRecord:
    """What one pipeline stage evaluated, in rule-id order."""

    stage: Stage
    evaluated: tuple[tuple[str, Verdict], ...] = ()
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "evaluated", tuple(sorted(self.evaluated, key=lambda e: e[0])))
        object.__setattr__(self, "notes", tuple(self.notes))

    def to_canonical(self) -> dict[str, Any]:
        return {
            "stage": self.stage.value,
            "evaluated": [[rule_id, verdict.value] for rule_id, verdict in self.evaluated],
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class AuditTrace:
    """Ordered stage records ending in the final output.

    Stages appear in pipeline order; stages after the terminating stage are
    absent, so an abstention at exclusions yields exactly two records.
    """

    stages: tuple[StageRecord, ...]
    final: SystemOutput

    def __post_init__(self) -> None:
        object.__setattr__(self, "stages", tuple(self.stages))
        observed = tuple(record.stage for record in self.stages)
        if observed != PIPELINE_STAGES[: len(observed)]:
            raise ValueError(f"stages out of pipeline order: {[s.value for s in observed]}")
        if not self.stages:
            raise ValueError("trace requires at least one stage")

    def to_canonical(self) -> dict[str, Any]:
        return {
            "stages": [record.to_canonical() for record in self.stages],
            "final": self.final.to_canonical(),
        }


def compare_outputs(actual: SystemOutput, expected: ExpectedBehavior) -> MatchLevel:
    """Grade an output against an expectation.

    Same action and same detail is a full match; a wildcard detail matches
    any detail of that action. Same action with different detail is an
    action match. Different actions are a mismatch.
    """
    if actual.action is not expected.action:
        return MatchLevel.MISMATCH
    if actual.action is Action.RECOMMEND:
        if expected.class_id is None or expected.class_id == actual.class_id:
            return MatchLevel.FULL
        return MatchLevel.ACTION
    assert actual.reason is not None
    if expected.category is None or expected.category is actual.reason.category:
        return MatchLevel.FULL
    return MatchLevel.ACTION


def canonical_serialize(value: Any) -> bytes:
    """Canonical byte form of any domain value exposing ``to_canonical``."""
    return canonical_bytes(value.to_canonical())
