"""Independent transcription of the decision procedure, for equivalence tests.

This module re-derives the pipeline behavior directly from the written
stage rules, sharing only the parsed data structures with the package.
Truth values are Python's ``True``/``False``/``None`` (``None`` meaning
"cannot be determined") instead of the engine's enum, every stage is a
straight-line function, and no engine code is imported. It also provides
a seeded generator of small all-boolean policies and exhaustive case
enumerators so the equivalence check sweeps an entire input space.
"""

from __future__ import annotations

import itertools
import random
from decimal import Decimal

from absgate.condition import (
    Absent,
    And,
    Comparison,
    Has,
    Literal,
    Not,
    Or,
    Present,
)
from absgate.model import Action, CaseInput, ExpectedBehavior, FieldKind, FieldValue, SystemOutput
from absgate.policy import (
    ClassDecl,
    ClinicalRule,
    ConsistencyConstraint,
    ExclusionRule,
    FieldDecl,
    Policy,
    StewardshipSpec,
    StewardshipVeto,
)

Maybe = "bool | None"


def truth_of(cond, fields) -> bool | None:
    """Three-valued evaluation, written as explicit truth tables."""
    if isinstance(cond, Literal):
        return cond.value
    if isinstance(cond, Present):
        return cond.field_name in fields
    if isinstance(cond, Absent):
        return cond.field_name not in fields
    if isinstance(cond, Has):
        value = fields.get(cond.field_name)
        if value is None:
            return None
        return cond.token in value.value
    if isinstance(cond, Comparison):
        value = fields.get(cond.field_name)
        if value is None:
            return None
        left = value.value
        right = cond.literal.value
        if isinstance(right, int) and not isinstance(right, bool) and isinstance(left, Decimal):
            right = Decimal(right)
        if cond.op == "==":
            return left == right
        if cond.op == "!=":
            return left != right
        if cond.op == "<":
            return left < right
        if cond.op == "<=":
            return left <= right
        if cond.op == ">":
            return left > right
        if cond.op == ">=":
            return left >= right
        raise ValueError(f"unknown operator {cond.op!r}")
    if isinstance(cond, And):
        a = truth_of(cond.left, fields)
        b = truth_of(cond.right, fields)
        if a is False or b is False:
            return False
        if a is None or b is None:
            return None
        return True
    if isinstance(cond, Or):
        a = truth_of(cond.left, fields)
        b = truth_of(cond.right, fields)
        if a is True or b is True:
            return True
        if a is None or b is None:
            return None
        return False
    if isinstance(cond, Not):
        inner = truth_of(cond.inner, fields)
        return None if inner is None else not inner
    raise TypeError(f"not a condition node: {cond!r}")


def holes_of(cond, fields) -> set[str]:
    """Bare-referenced fields missing from the case (guards excluded)."""
    if isinstance(cond, (Literal, Present, Absent)):
        return set()
    if isinstance(cond, (Comparison, Has)):
        return set() if cond.field_name in fields else {cond.field_name}
    if isinstance(cond, (And, Or)):
        return holes_of(cond.left, fields) | holes_of(cond.right, fields)
    if isinstance(cond, Not):
        return holes_of(cond.inner, fields)
    raise TypeError(f"not a condition node: {cond!r}")


def oracle_decide(policy: Policy, case: CaseInput) -> tuple:
    """Stage rules transcribed verbatim; returns a plain comparable tuple.

    ``("recommend", class_id)`` or ``("abstain", category, labels)``.
    """
    fields = case.fields

    # Stage 1: required fields, then consistency, then unknown risk tokens.
    missing = tuple(sorted(set(policy.required) - set(fields)))
    if missing:
        return ("abstain", "missing_inputs", missing)
    violated = tuple(sorted(c.rule_id for c in policy.consistency if truth_of(c.forbid, fields) is True))
    if violated:
        return ("abstain", "conflicting_signals", violated)
    strange = set()
    for decl in policy.schema:
        if decl.is_risk and decl.name in fields:
            for token in fields[decl.name].value:
                if token not in policy.known_risks:
                    strange.add(token)
    if strange:
        return ("abstain", "unknown_risk", tuple(sorted(strange)))

    # Stage 2: a true exclusion wins; otherwise indeterminate scope abstains.
    labels = []
    gaps: set[str] = set()
    for exclusion in policy.exclusions:
        verdict = truth_of(exclusion.when, fields)
        if verdict is True:
            labels.append(exclusion.label)
        elif verdict is None:
            gaps |= holes_of(exclusion.when, fields)
    if labels:
        return ("abstain", "explicit_exclusion", tuple(sorted(labels)))
    if gaps:
        return ("abstain", "missing_inputs", tuple(sorted(gaps)))

    # Stage 3: any unevaluable rule aborts; fired incompatibles conflict.
    problems: set[str] = set()
    fired: list[ClinicalRule] = []
    for rule in policy.clinical_rules:
        unmet = set(rule.requires) - set(fields)
        verdict = truth_of(rule.when, fields)
        if unmet or verdict is None:
            problems |= unmet
            if verdict is None:
                problems |= holes_of(rule.when, fields)
        elif verdict is True:
            fired.append(rule)
    if problems:
        return ("abstain", "missing_inputs", tuple(sorted(problems)))
    fired_ids = {rule.rule_id for rule in fired}
    clash: set[str] = set()
    for rule in fired:
        for other in rule.incompatible_with:
            if other in fired_ids:
                clash |= {rule.rule_id, other}
    if clash:
        return ("abstain", "conflicting_signals", tuple(sorted(clash)))
    if not fired:
        return ("abstain", "conservative_ambiguity", ("no_candidate",))

    # Stage 4: vetoes prune (indeterminate prunes), escalation needs a
    # definitively true justification.
    pruned = {v.class_id for v in policy.stewardship.class_vetoes if truth_of(v.when, fields) is not False}
    justified = truth_of(policy.stewardship.escalation_justification, fields) is True
    ranks = {c.class_id: c.spectrum_rank for c in policy.classes}
    escalation = {c.class_id for c in policy.classes if c.escalation_tier}
    survivors = set()
    for rule in fired:
        cid = rule.candidate
        if cid in pruned:
            continue
        if cid in escalation and not justified:
            continue
        survivors.add(cid)
    if not survivors:
        return ("abstain", "conservative_ambiguity", ("all_candidates_vetoed",))
    best = min(ranks[cid] for cid in survivors)
    tied = tuple(sorted(cid for cid in survivors if ranks[cid] == best))
    if len(tied) > 1:
        return ("abstain", "conservative_ambiguity", tied)

    # Stage 5.
    return ("recommend", tied[0])


def as_tuple(output: SystemOutput) -> tuple:
    """Engine output flattened into the oracle's comparison shape."""
    if output.action is Action.RECOMMEND:
        return ("recommend", output.class_id)
    assert output.reason is not None
    return ("abstain", output.reason.category.value, output.reason.labels)


_WILDCARD = ExpectedBehavior(Action.ABSTAIN)


def _rand_cond(rng: random.Random, names: list[str], depth: int):
    roll = rng.random()
    if depth <= 0 or roll < 0.55:
        name = rng.choice(names)
        kind = rng.randrange(5)
        if kind == 0:
            return Comparison(name, "==", FieldValue.boolean(rng.random() < 0.5))
        if kind == 1:
            return Comparison(name, "!=", FieldValue.boolean(rng.random() < 0.5))
        if kind == 2:
            return Present(name)
        if kind == 3:
            return Absent(name)
        return Literal(rng.random() < 0.5)
    if roll < 0.72:
        return And(_rand_cond(rng, names, depth - 1), _rand_cond(rng, names, depth - 1))
    if roll < 0.89:
        return Or(_rand_cond(rng, names, depth - 1), _rand_cond(rng, names, depth - 1))
    return Not(_rand_cond(rng, names, depth - 1))


def make_mini_policy(seed: int) -> Policy:
    """Small all-boolean policy drawn deterministically from ``seed``."""
    rng = random.Random(seed)
    names = [f"f{i}" for i in range(rng.randint(1, 3))]
    schema = tuple(FieldDecl(name, FieldKind.BOOLEAN) for name in names)
    required = tuple(name for name in names if rng.random() < 0.3)

    classes = []
    for i in range(rng.randint(1, 3)):
        classes.append(ClassDecl(f"c{i}", rng.randint(1, 3), escalation_tier=rng.random() < 0.3))

    consistency = tuple(
        ConsistencyConstraint(f"x{i}", _rand_cond(rng, names, 1)) for i in range(rng.randint(0, 2))
    )
    exclusions = tuple(
        ExclusionRule(f"e{i}", f"EXL{i}", _rand_cond(rng, names, 1)) for i in range(rng.randint(0, 2))
    )

    rules = []
    for i in range(rng.randint(1, 4)):
        requires = tuple(name for name in names if rng.random() < 0.2)
        rules.append(
            ClinicalRule(
                f"r{i}",
                _rand_cond(rng, names, 2),
                rng.choice(classes).class_id,
                requires=requires,
            )
        )
    incompatible: dict[str, set[str]] = {rule.rule_id: set() for rule in rules}
    for a, b in itertools.combinations([rule.rule_id for rule in rules], 2):
        if rng.random() < 0.2:
            incompatible[a].add(b)
            incompatible[b].add(a)
    rules = [
        ClinicalRule(
            rule.rule_id,
            rule.when,
            rule.candidate,
            requires=rule.requires,
            incompatible_with=tuple(sorted(incompatible[rule.rule_id])),
        )
        for rule in rules
    ]

    justification = _rand_cond(rng, names, 1)
    if isinstance(justification, Literal) and justification.value is False:
        justification = Not(Literal(True))
    vetoes = tuple(
        StewardshipVeto(f"v{i}", rng.choice(classes).class_id, _rand_cond(rng, names, 1))
        for i in range(rng.randint(0, 2))
    )

    return Policy(
        policy_id=f"mini_{seed}",
        version="v1",
        schema=schema,
        classes=tuple(classes),
        stewardship=StewardshipSpec(justification, vetoes),
        required=required,
        consistency=consistency,
        exclusions=exclusions,
        clinical_rules=tuple(rules),
    )


def full_assignments(policy: Policy):
    """Every case with all boolean fields present: 2**n cases."""
    names = [decl.name for decl in policy.schema]
    for index, values in enumerate(itertools.product((False, True), repeat=len(names))):
        fields = {name: FieldValue.boolean(value) for name, value in zip(names, values)}
        yield CaseInput(f"g{index}", "generated", "generated", fields, _WILDCARD)


def partial_assignments(policy: Policy):
    """Every case over {false, true, absent} per field: 3**n cases."""
    names = [decl.name for decl in policy.schema]
    for index, values in enumerate(itertools.product((False, True, None), repeat=len(names))):
        fields = {
            name: FieldValue.boolean(value) for name, value in zip(names, values) if value is not None
        }
        yield CaseInput(f"p{index}", "generated", "generated", fields, _WILDCARD)
