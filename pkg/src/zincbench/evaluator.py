"""Scoring: did the model run, and did it get the right answer.

Two per-instance verdicts feed every aggregate: `executed` (the toolchain
compiled and ran the model to a conclusive result) and `solution_correct`
(objective matches the reference within tolerance, or the reference model
accepts the assignment for satisfaction problems).  Aggregates roll up per
(source dataset, strategy) with raw counts kept alongside the percentages.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .corpus import ProblemInstance
from .harness import (
    ErrorCategory,
    SolveResult,
    SolverConfig,
    SolverError,
    Status,
    VerifierCompileError,
    verify_satisfaction,
)

ABS_TOL = 1e-6
REL_TOL = 1e-4

SCHEMA_VERSION = 1


class EmptySet(Exception):
    pass


class MissingExpected(Exception):
    pass


def compare_objective(
    got: float, expected: float, objective_kind: Optional[str] = None
) -> bool:
    """Tolerance check; the kind parameter is accepted for symmetry but the
    test is direction-free."""
    return abs(got - expected) <= max(ABS_TOL, REL_TOL * abs(expected))


_EXECUTED = frozenset({Status.OPTIMAL, Status.SATISFIED, Status.UNSATISFIABLE})


def is_executed(result: SolveResult) -> bool:
    if result.status in _EXECUTED:
        return True
    # solver printed a solution it could not round-trip: it did run
    return result.status is Status.UNKNOWN and result.output_parse_failed


@dataclass(frozen=True)
class CompareDetail:
    kind: str  # objective | verifier | unsat-candidate | not-executed | corpus-fault | no-answer
    expected_objective: Optional[float] = None
    got_objective: Optional[float] = None
    abs_tolerance: float = ABS_TOL
    rel_tolerance: float = REL_TOL
    verifier_verdict: Optional[bool] = None
    note: str = ""


@dataclass(frozen=True)
class InstanceOutcome:
    instance_id: str
    source: str
    strategy: str
    executed: bool
    solution_correct: bool
    solve: SolveResult
    detail: CompareDetail
    excluded: bool = False
    exclusion_reason: str = ""

    def __post_init__(self):
        if self.solution_correct and not self.executed:
            raise ValueError("a correct solution implies an executed model")
        if self.excluded and not self.exclusion_reason:
            raise ValueError("excluded outcomes must say why")


def source_of(instance: ProblemInstance) -> str:
    meta = instance.input.metadata
    tag = meta.extra.get("source")
    return tag if isinstance(tag, str) and tag else meta.domain


def judge_instance(
    result: SolveResult,
    instance: ProblemInstance,
    strategy: str,
    solver: Optional[SolverConfig] = None,
) -> InstanceOutcome:
    executed = is_executed(result)
    base = dict(
        instance_id=instance.identifier,
        source=source_of(instance),
        strategy=strategy,
        solve=result,
    )

    if not executed:
        return InstanceOutcome(
            executed=False,
            solution_correct=False,
            detail=CompareDetail("not-executed", note=result.status.value),
            **base,
        )

    expected = instance.expected_output

    if result.status is Status.UNSATISFIABLE:
        # ran fine, but "no solution" only scores when the reference agrees
        correct = bool(expected and expected.unsatisfiable)
        return InstanceOutcome(
            executed=True,
            solution_correct=correct,
            detail=CompareDetail(
                "unsat-candidate",
                note="reference is unsatisfiable" if correct else "reference has a solution",
            ),
            **base,
        )

    if instance.objective == "satisfy":
        if result.output_parse_failed or not result.assignments:
            return InstanceOutcome(
                executed=True,
                solution_correct=False,
                detail=CompareDetail("no-answer", note="no parseable assignments"),
                **base,
            )
        assert instance.ground_truth_model is not None
        try:
            verdict = verify_satisfaction(
                instance.ground_truth_model,
                result.assignments,
                solver or SolverConfig(),
                data_text=instance.data_text,
            )
        except VerifierCompileError as e:
            # the reference model is at fault, not the candidate
            return InstanceOutcome(
                executed=True,
                solution_correct=False,
                excluded=True,
                exclusion_reason="verifier-compile-error",
                detail=CompareDetail("corpus-fault", note=str(e)),
                **base,
            )
        return InstanceOutcome(
            executed=True,
            solution_correct=verdict,
            detail=CompareDetail("verifier", verifier_verdict=verdict),
            **base,
        )

    # optimization: compare objective values
    expected_objective = expected.objective_value if expected else None
    if expected_objective is None:
        return InstanceOutcome(
            executed=True,
            solution_correct=False,
            excluded=True,
            exclusion_reason="missing-expected-objective",
            detail=CompareDetail("corpus-fault", note="no reference objective recorded"),
            **base,
        )
    if result.objective_value is None:
        return InstanceOutcome(
            executed=True,
            solution_correct=False,
            detail=CompareDetail(
                "no-answer",
                expected_objective=expected_objective,
                note="no objective in solver output",
            ),
            **base,
        )
    correct = compare_objective(result.objective_value, expected_objective)
    return InstanceOutcome(
        executed=True,
        solution_correct=correct,
        detail=CompareDetail(
            "objective",
            expected_objective=expected_objective,
            got_objective=result.objective_value,
        ),
        **base,
    )


# --- outcome persistence ---------------------------------------------------


def outcome_to_json(o: InstanceOutcome) -> dict:
    return {
        "instance_id": o.instance_id,
        "source": o.source,
        "strategy": o.strategy,
        "executed": o.executed,
        "solution_correct": o.solution_correct,
        "excluded": o.excluded,
        "exclusion_reason": o.exclusion_reason,
        "status": o.solve.status.value,
        "objective": o.solve.objective_value,
        "wall_seconds": round(o.solve.wall_seconds, 3),
        "output_parse_failed": o.solve.output_parse_failed,
        "error": (
            {"category": o.solve.error.category.value, "text": o.solve.error.text}
            if o.solve.error
            else None
        ),
        "detail": {
            "kind": o.detail.kind,
            "expected_objective": o.detail.expected_objective,
            "got_objective": o.detail.got_objective,
            "verifier_verdict": o.detail.verifier_verdict,
            "note": o.detail.note,
        },
    }


def outcome_from_json(raw: dict) -> InstanceOutcome:
    error = None
    if raw.get("error"):
        error = SolverError(
            ErrorCategory(raw["error"]["category"]), raw["error"]["text"]
        )
    result = SolveResult(
        status=Status(raw["status"]),
        objective_value=raw.get("objective"),
        error=error,
        wall_seconds=raw.get("wall_seconds", 0.0),
        output_parse_failed=raw.get("output_parse_failed", False),
    )
    d = raw.get("detail", {})
    detail = CompareDetail(
        kind=d.get("kind", "objective"),
        expected_objective=d.get("expected_objective"),
        got_objective=d.get("got_objective"),
        verifier_verdict=d.get("verifier_verdict"),
        note=d.get("note", ""),
    )
    return InstanceOutcome(
        instance_id=raw["instance_id"],
        source=raw["source"],
        strategy=raw["strategy"],
        executed=raw["executed"],
        solution_correct=raw["solution_correct"],
        solve=result,
        detail=detail,
        excluded=raw.get("excluded", False),
        exclusion_reason=raw.get("exclusion_reason", ""),
    )


# --- aggregation -----------------------------------------------------------


def _included(outcomes: Iterable[InstanceOutcome]) -> list[InstanceOutcome]:
    return [o for o in outcomes if not o.excluded]


def execution_accuracy(outcomes: Iterable[InstanceOutcome]) -> float:
    pool = _included(outcomes)
    if not pool:
        raise EmptySet("no scoreable outcomes")
    return sum(o.executed for o in pool) / len(pool)


def solution_accuracy(outcomes: Iterable[InstanceOutcome]) -> float:
    pool = _included(outcomes)
    if not pool:
        raise EmptySet("no scoreable outcomes")
    return sum(o.solution_correct for o in pool) / len(pool)


def format_percent(fraction: float) -> str:
    return f"{fraction * 100:.2f}"


@dataclass(frozen=True)
class AggregateRow:
    source: str
    strategy: str
    n: int
    executed: int
    correct: int

    def __post_init__(self):
        if not (0 <= self.correct <= self.executed <= self.n):
            raise ValueError(
                f"inconsistent counts for {self.source}/{self.strategy}: "
                f"{self.correct} correct, {self.executed} executed, {self.n} total"
            )

    @property
    def e_acc(self) -> float:
        return self.executed / self.n

    @property
    def s_acc(self) -> float:
        return self.correct / self.n

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "strategy": self.strategy,
            "n": self.n,
            "executed": self.executed,
            "correct": self.correct,
            "e_acc_percent": format_percent(self.e_acc),
            "s_acc_percent": format_percent(self.s_acc),
        }


@dataclass
class EvaluationReport:
    outcomes: list[InstanceOutcome]
    rows: list[AggregateRow]
    totals: list[AggregateRow]  # one per strategy, source "(all)"
    exclusions: list[InstanceOutcome] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def build_report(outcomes: Iterable[InstanceOutcome]) -> EvaluationReport:
    outcomes = list(outcomes)
    included = _included(outcomes)
    excluded = [o for o in outcomes if o.excluded]

    groups: dict[tuple[str, str], list[InstanceOutcome]] = {}
    for o in included:
        groups.setdefault((o.strategy, o.source), []).append(o)

    rows = [
        AggregateRow(
            source=source,
            strategy=strategy,
            n=len(members),
            executed=sum(m.executed for m in members),
            correct=sum(m.solution_correct for m in members),
        )
        for (strategy, source), members in sorted(groups.items())
    ]

    totals = []
    for strategy in sorted({r.strategy for r in rows}):
        mine = [r for r in rows if r.strategy == strategy]
        totals.append(
            AggregateRow(
                source="(all)",
                strategy=strategy,
                n=sum(r.n for r in mine),
                executed=sum(r.executed for r in mine),
                correct=sum(r.correct for r in mine),
            )
        )

    return EvaluationReport(
        outcomes=outcomes,
        rows=rows,
        totals=totals,
        exclusions=excluded,
        metadata={
            "schema_version": SCHEMA_VERSION,
            "satisfy_scoring": "verifier-acceptance",
            "objective_abs_tolerance": ABS_TOL,
            "objective_rel_tolerance": REL_TOL,
        },
    )


# --- leaderboard emission --------------------------------------------------


def _exclusion_json(o: InstanceOutcome) -> dict:
    return {
        "instance_id": o.instance_id,
        "source": o.source,
        "strategy": o.strategy,
        "reason": o.exclusion_reason,
    }


def emit_leaderboard(report: EvaluationReport, format: str = "markdown") -> str:
    if format == "json":
        blob = {
            "schema_version": SCHEMA_VERSION,
            "metadata": report.metadata,
            "aggregates": [r.to_json() for r in report.rows],
            "totals": [r.to_json() for r in report.totals],
            "exclusions": [_exclusion_json(o) for o in report.exclusions],
        }
        return json.dumps(blob, indent=2, sort_keys=True) + "\n"

    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["source", "strategy", "n", "executed", "correct", "e_acc", "s_acc"])
        for r in report.rows + report.totals:
            writer.writerow(
                [r.source, r.strategy, r.n, r.executed, r.correct,
                 format_percent(r.e_acc), format_percent(r.s_acc)]
            )
        return buf.getvalue()

    if format == "markdown":
        lines = [
            "| Source | Strategy | n | Executed | Correct | E_acc | S_acc |",
            "| --- | --- | ---: | ---: | ---: | ---: | ---: |",
        ]
        for r in report.rows:
            lines.append(
                f"| {r.source} | {r.strategy} | {r.n} | {r.executed} | {r.correct} "
                f"| {format_percent(r.e_acc)} | {format_percent(r.s_acc)} |"
            )
        for r in report.totals:
            lines.append(
                f"| **Total** | {r.strategy} | {r.n} | {r.executed} | {r.correct} "
                f"| {format_percent(r.e_acc)} | {format_percent(r.s_acc)} |"
            )
        grand_n = sum(r.n for r in report.totals)
        lines.append("")
        lines.append(f"Total n={grand_n}")
        if report.exclusions:
            lines.append("")
            lines.append("Excluded instances:")
            for o in report.exclusions:
                lines.append(f"- {o.instance_id} ({o.strategy}): {o.exclusion_reason}")
        return "\n".join(lines) + "\n"

    raise ValueError(f"unknown leaderboard format {format!r}")
