"""Deterministic empiric-therapy recommendations with typed abstention.

The public surface: parse a policy written in the small governance DSL,
bind a JSON case suite against it, run cases through the five-stage
decision pipeline, and evaluate behavior reproducibly.
"""

from .canon import canonical_bytes, canonical_dumps, canonical_hash, sha256_hex
from .condition import Truth
from .diagnostics import Diagnostic, Severity, has_errors
from .dsl import format_policy, parse_policy
from .engine import assess_inputs, decide
from .evaluation import (
    EvaluationReport,
    abstention_distribution,
    concordance,
    coverage_by_mechanism,
    render_ratio,
    run_suite,
    stewardship_audit,
)
from .model import (
    AbstentionCategory,
    AbstentionReason,
    Action,
    AuditTrace,
    CaseInput,
    ExpectedBehavior,
    FieldKind,
    FieldValue,
    MatchLevel,
    StageRecord,
    SystemOutput,
    Verdict,
    compare_outputs,
    canonical_serialize,
)
from .policy import Policy, policy_hash, validate_policy
from .reference import load_reference_policy, load_reference_suite
from .suite import Suite, bind_suite, parse_suite, suite_hash

__version__ = "0.1.0"

__all__ = [
    "AbstentionCategory",
    "AbstentionReason",
    "Action",
    "AuditTrace",
    "CaseInput",
    "Diagnostic",
    "EvaluationReport",
    "ExpectedBehavior",
    "FieldKind",
    "FieldValue",
    "MatchLevel",
    "Policy",
    "Severity",
    "StageRecord",
    "Suite",
    "SystemOutput",
    "Truth",
    "Verdict",
    "__version__",
    "abstention_distribution",
    "assess_inputs",
    "bind_suite",
    "canonical_bytes",
    "canonical_dumps",
    "canonical_hash",
    "canonical_serialize",
    "compare_outputs",
    "concordance",
    "coverage_by_mechanism",
    "decide",
    "format_policy",
    "has_errors",
    "load_reference_policy",
    "load_reference_suite",
    "parse_policy",
    "parse_suite",
    "policy_hash",
    "render_ratio",
    "run_suite",
    "sha256_hex",
    "stewardship_audit",
    "suite_hash",
    "validate_policy",
]
