"""Case suite loading, binding, and hashing.

A suite is a JSON document: header identity, a mechanism vocabulary, and at
least one case. Parsing checks shape and vocabulary; binding type-checks
every case field against a policy schema and verifies expected class ids,
so anything that survives both steps can be decided without surprises.

The canonical suite form orders cases by id and mechanisms lexicographically,
making ``suite_hash`` insensitive to source ordering while any change to
fields, descriptions, or expected behaviors changes the digest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from .canon import canonical_bytes, canonical_hash
from .diagnostics import Diagnostic, Severity
from .model import (
    IDENT_RE,
    TOKEN_RE,
    AbstentionCategory,
    Action,
    CaseInput,
    ExpectedBehavior,
    FieldKind,
    FieldValue,
)
from .policy import Policy, policy_hash

__all__ = ["Suite", "parse_suite", "bind_suite", "suite_canonical", "suite_bytes", "suite_hash"]

_HEX64 = frozenset("0123456789abcdef")

_TOP_KEYS = {"suite_id", "version", "policy_hash_pin", "mechanisms", "cases"}
_CASE_KEYS = {"id", "description", "mechanism", "fields", "expect"}


@dataclass(frozen=True)
class Suite:
    suite_id: str
    version: str
    mechanisms: tuple[str, ...]
    cases: tuple[CaseInput, ...]
    policy_hash_pin: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mechanisms", tuple(self.mechanisms))
        object.__setattr__(self, "cases", tuple(sorted(self.cases, key=lambda c: c.case_id)))
        if not self.cases:
            raise ValueError("suite requires at least one case")

    def case(self, case_id: str) -> CaseInput | None:
        for case in self.cases:
            if case.case_id == case_id:
                return case
        return None


def _err(diags: list[Diagnostic], code: str, message: str) -> None:
    diags.append(Diagnostic(Severity.ERROR, code, message))


def _warn(diags: list[Diagnostic], code: str, message: str) -> None:
    diags.append(Diagnostic(Severity.WARNING, code, message))


def _parse_expect(raw: Any, case_id: str, diags: list[Diagnostic]) -> ExpectedBehavior | None:
    if not isinstance(raw, dict) or len(raw) != 1:
        _err(diags, "unknown_expected_behavior", f"case '{case_id}': expect must be a one-key object")
        return None
    key, value = next(iter(raw.items()))
    if key == "recommend":
        if not isinstance(value, str) or (value != "any" and not IDENT_RE.match(value)):
            _err(diags, "unknown_expected_behavior", f"case '{case_id}': bad recommend expectation {value!r}")
            return None
        return ExpectedBehavior(Action.RECOMMEND, class_id=None if value == "any" else value)
    if key == "abstain":
        if not isinstance(value, str):
            _err(diags, "unknown_expected_behavior", f"case '{case_id}': bad abstain expectation {value!r}")
            return None
        if value == "any":
            return ExpectedBehavior(Action.ABSTAIN)
        try:
            category = AbstentionCategory(value)
        except ValueError:
            _err(diags, "unknown_expected_behavior", f"case '{case_id}': unknown abstention category {value!r}")
            return None
        return ExpectedBehavior(Action.ABSTAIN, category=category)
    _err(diags, "unknown_expected_behavior", f"case '{case_id}': expect key must be recommend or abstain")
    return None


def _parse_case(raw: Any, index: int, mechanisms: tuple[str, ...], diags: list[Diagnostic]) -> CaseInput | None:
    if not isinstance(raw, dict):
        _err(diags, "malformed_case", f"case #{index} is not an object")
        return None
    case_id = raw.get("id")
    if not isinstance(case_id, str) or not IDENT_RE.match(case_id):
        _err(diags, "malformed_case", f"case #{index}: missing or invalid id")
        return None
    for key in raw:
        if key not in _CASE_KEYS:
            _warn(diags, "unknown_key", f"case '{case_id}': unknown key {key!r}")
    description = raw.get("description")
    if not isinstance(description, str):
        _err(diags, "malformed_case", f"case '{case_id}': description must be a string")
        return None
    mechanism = raw.get("mechanism")
    if not isinstance(mechanism, str) or not TOKEN_RE.match(mechanism):
        _err(diags, "malformed_case", f"case '{case_id}': mechanism must be a token")
        return None
    if mechanism not in mechanisms:
        _err(diags, "unknown_mechanism", f"case '{case_id}': mechanism '{mechanism}' is not in the suite vocabulary")
        return None
    raw_fields = raw.get("fields")
    if not isinstance(raw_fields, dict):
        _err(diags, "malformed_case", f"case '{case_id}': fields must be an object")
        return None
    fields: dict[str, FieldValue] = {}
    ok = True
    for name, value in raw_fields.items():
        if not IDENT_RE.match(name):
            _err(diags, "malformed_case", f"case '{case_id}': field name {name!r} is not an identifier")
            ok = False
            continue
        try:
            fields[name] = FieldValue.from_json(value)
        except ValueError as exc:
            _err(diags, "invalid_field_value", f"case '{case_id}', field '{name}': {exc}")
            ok = False
    expected = _parse_expect(raw.get("expect"), case_id, diags)
    if expected is None or not ok:
        return None
    return CaseInput(case_id, description, mechanism, fields, expected)


def parse_suite(text: str) -> tuple[Suite | None, list[Diagnostic]]:
    """Parse suite JSON; returns (suite or None, diagnostics)."""
    diags: list[Diagnostic] = []
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        diags.append(Diagnostic(Severity.ERROR, "malformed_document", exc.msg, exc.lineno, exc.colno))
        return None, diags
    if not isinstance(document, dict):
        _err(diags, "malformed_document", "suite document must be a JSON object")
        return None, diags
    for key in document:
        if key not in _TOP_KEYS:
            _warn(diags, "unknown_key", f"unknown top-level key {key!r}")

    suite_id = document.get("suite_id")
    if not isinstance(suite_id, str) or not IDENT_RE.match(suite_id):
        _err(diags, "malformed_document", "suite_id must be an identifier")
        suite_id = None
    version = document.get("version")
    if not isinstance(version, str) or not TOKEN_RE.match(version):
        _err(diags, "malformed_document", "version must be a token")
        version = None

    pin = document.get("policy_hash_pin")
    if pin is not None:
        if not isinstance(pin, str) or len(pin) != 64 or not set(pin) <= _HEX64:
            _err(diags, "invalid_pin", "policy_hash_pin must be 64 lowercase hex digits")
            pin = None

    raw_mechanisms = document.get("mechanisms")
    mechanisms: tuple[str, ...] = ()
    if not isinstance(raw_mechanisms, list):
        _err(diags, "malformed_document", "mechanisms must be an array of tokens")
    else:
        seen: list[str] = []
        for entry in raw_mechanisms:
            if not isinstance(entry, str) or not TOKEN_RE.match(entry):
                _err(diags, "malformed_document", f"mechanism {entry!r} is not a token")
            elif entry in seen:
                _warn(diags, "duplicate_mechanism", f"mechanism '{entry}' listed twice")
            else:
                seen.append(entry)
        mechanisms = tuple(seen)

    raw_cases = document.get("cases")
    cases: list[CaseInput] = []
    if not isinstance(raw_cases, list) or not raw_cases:
        _err(diags, "empty_suite", "suite must carry at least one case")
    else:
        seen_ids: set[str] = set()
        for index, raw_case in enumerate(raw_cases):
            case = _parse_case(raw_case, index, mechanisms, diags)
            if case is None:
                continue
            if case.case_id in seen_ids:
                _err(diags, "duplicate_case_id", f"case id '{case.case_id}' appears twice")
                continue
            seen_ids.add(case.case_id)
            cases.append(case)

    if suite_id is None or version is None or not cases or any(d.severity is Severity.ERROR for d in diags):
        return None, diags
    return Suite(suite_id, version, tuple(mechanisms), tuple(cases), pin), diags


def _bind_value(case_id: str, name: str, value: FieldValue, policy: Policy, diags: list[Diagnostic]) -> None:
    decl = policy.field_map().get(name)
    if decl is None:
        _err(diags, "unknown_field", f"case '{case_id}': field '{name}' is not declared by the policy")
        return
    if value.kind is not decl.kind:
        _err(
            diags,
            "type_mismatch",
            f"case '{case_id}': field '{name}' is {decl.kind.value} but the value is {value.kind.value}",
        )
        return
    if decl.kind is FieldKind.TOKEN and decl.enum is not None and value.value not in decl.enum:
        _err(
            diags,
            "unknown_enum_token",
            f"case '{case_id}': token '{value.value}' is outside the enumeration of '{name}'",
        )
    elif decl.kind is FieldKind.TOKEN_SET and decl.enum is not None:
        for token in sorted(value.value):
            if token not in decl.enum:
                _err(
                    diags,
                    "unknown_enum_token",
                    f"case '{case_id}': token '{token}' is outside the enumeration of '{name}'",
                )


def bind_suite(suite: Suite, policy: Policy) -> list[Diagnostic]:
    """Type-check a parsed suite against a policy; returns diagnostics.

    Errors block evaluation; the only warning is ``policy_drift`` when the
    suite pins a different policy hash than the one supplied.
    """
    diags: list[Diagnostic] = []
    if suite.policy_hash_pin is not None:
        actual = policy_hash(policy)
        if actual != suite.policy_hash_pin:
            _warn(
                diags,
                "policy_drift",
                f"suite pins policy hash {suite.policy_hash_pin[:12]}..., supplied policy hashes {actual[:12]}...",
            )
    declared_classes = {c.class_id for c in policy.classes}
    for case in suite.cases:
        for name, value in case.fields.items():
            _bind_value(case.case_id, name, value, policy, diags)
        expected = case.expected
        if expected.action is Action.RECOMMEND and expected.class_id is not None:
            if expected.class_id not in declared_classes:
                _err(
                    diags,
                    "unknown_expected_class",
                    f"case '{case.case_id}': expected class '{expected.class_id}' is not declared by the policy",
                )
    return diags


def suite_canonical(suite: Suite) -> dict[str, Any]:
    """Canonical JSON-able form: cases by id, mechanisms sorted."""
    body: dict[str, Any] = {
        "suite": suite.suite_id,
        "version": suite.version,
        "mechanisms": sorted(suite.mechanisms),
        "cases": [case.to_canonical() for case in suite.cases],
    }
    if suite.policy_hash_pin is not None:
        body["policy_hash_pin"] = suite.policy_hash_pin
    return body


def suite_bytes(suite: Suite) -> bytes:
    return canonical_bytes(suite_canonical(suite))


def suite_hash(suite: Suite) -> str:
    """SHA-256 hex digest of the canonical suite form."""
    return canonical_hash(suite_canonical(suite))
