"""The eight model-generation strategies.

Each strategy turns one corpus instance into MiniZinc source through a
fixed-shape sequence of chat calls.  Call counts are part of the contract:
a strategy never loops, never skips its validation step, and never exceeds
its declared budget.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from .corpus import ProblemInstance
from .dzn import ArrayValue, format_value, parse_dzn
from .gateway import (
    CallRecord,
    Gateway,
    RunHandle,
    augment_for_empty_data,
    render_prompt,
)
from .grammar import (
    GrammarSpec,
    SyntaxDiagnostic,
    load_default_grammar,
    render_grammar_for_prompt,
    validate_syntax,
)
from .harness import SolverConfig, check_model


class Strategy(str, Enum):
    ZERO_SHOT = "ZeroShot"
    COT = "CoT"
    KNOWLEDGE_GRAPH = "KnowledgeGraph"
    COT_CODE = "CoTCode"
    COT_GRAMMAR = "CoTGrammar"
    COT_CODE_GRAMMAR = "CoTCodeGrammar"
    AGENTIC = "Agentic"
    AGENTIC_CODE = "AgenticCode"


CALL_BUDGETS = {
    Strategy.ZERO_SHOT: 1,
    Strategy.COT: 1,
    Strategy.KNOWLEDGE_GRAPH: 2,
    Strategy.COT_CODE: 2,
    Strategy.COT_GRAMMAR: 2,
    Strategy.COT_CODE_GRAMMAR: 3,
    Strategy.AGENTIC: 4,
    Strategy.AGENTIC_CODE: 5,
}


class EmptyResponse(Exception):
    pass


class KgEmpty(Exception):
    pass


class FragmentEmpty(Exception):
    def __init__(self, stage: str):
        self.stage = stage
        super().__init__(f"agentic stage {stage!r} produced no code")


@dataclass(frozen=True)
class KnowledgeGraphText:
    ttl: str

    @property
    def has_core_classes(self) -> bool:
        return all(
            f":{cls}" in self.ttl
            for cls in ("Parameter", "Variable", "Constraint", "Objective")
        )


@dataclass
class GeneratedModel:
    model_text: str
    strategy: Strategy
    calls: list[CallRecord]
    intermediate: dict[str, str] = field(default_factory=dict)
    degraded: bool = False

    def __post_init__(self):
        if not self.model_text.strip():
            raise ValueError("model_text must be non-empty")
        budget = CALL_BUDGETS[self.strategy]
        if len(self.calls) > budget:
            raise ValueError(
                f"{self.strategy.value} recorded {len(self.calls)} calls; budget is {budget}"
            )


_FENCE = re.compile(r"```[ \t]*([A-Za-z0-9_+-]*)[ \t]*\r?\n(.*?)```", re.DOTALL)


def extract_code(response_text: str) -> str:
    """Prefer a ```minizinc fence, then any fence, then the raw text."""
    if not response_text.strip():
        raise EmptyResponse("response contained no text")
    blocks = _FENCE.findall(response_text)
    for tag, body in blocks:
        if tag.lower() == "minizinc":
            return body.strip()
    if blocks:
        return blocks[0][1].strip()
    return response_text.strip()


def _code_or_none(response_text: str) -> Optional[str]:
    # Repair replies are sometimes pure prose; a MiniZinc item always ends
    # with a semicolon, so its absence means no usable code came back.
    if not response_text.strip():
        return None
    code = extract_code(response_text)
    return code if ";" in code else None


OBJECTIVE_WORDS = {
    "minimize": "minimization",
    "maximize": "maximization",
    "satisfy": "satisfaction",
}


def _example_line(symbol: str, value) -> str:
    if isinstance(value, ArrayValue) and len(value.elements) > 5:
        head = ", ".join(format_value(e) for e in value.elements[:5])
        return f"  example: {symbol} = [{head}, ...]"
    return f"  example: {symbol} = {format_value(value)};"


def data_nomenclature(instance: ProblemInstance) -> str:
    """One line per declared parameter, with sample values from the data file."""
    try:
        bindings = parse_dzn(instance.data_text) if instance.data_text.strip() else {}
    except Exception:
        bindings = {}
    lines = []
    for p in instance.input.parameters:
        shape = "scalar" if p.is_scalar else "array of " + " x ".join(p.shape)
        lines.append(f"{p.symbol} ({shape}): {p.definition}")
        if p.symbol in bindings:
            lines.append(_example_line(p.symbol, bindings[p.symbol]))
    return "\n".join(lines) if lines else "(no external parameters)"


def _base_slots(instance: ProblemInstance) -> dict[str, str]:
    return {
        "problem_description": instance.input.description,
        "data_nomenclature": data_nomenclature(instance),
    }


def _call(
    run: RunHandle, instance: ProblemInstance, template_id: str, slots: dict[str, str]
) -> CallRecord:
    prompt = render_prompt(template_id, slots)
    # kg_create asks for a knowledge graph, not code, so the embed-your-data
    # note does not apply to it
    if template_id != "kg_create" and not instance.data_text.strip():
        prompt = augment_for_empty_data(prompt)
    return run.complete(template_id, prompt)


# --- single-call strategies ------------------------------------------------


def _one_template_model(
    instance: ProblemInstance, gateway: Gateway, template_id: str, strategy: Strategy
) -> GeneratedModel:
    run = gateway.start_run(CALL_BUDGETS[strategy])
    rec = _call(run, instance, template_id, _base_slots(instance))
    return GeneratedModel(extract_code(rec.response), strategy, run.records)


def run_zero_shot(instance: ProblemInstance, gateway: Gateway) -> GeneratedModel:
    return _one_template_model(instance, gateway, "baseline", Strategy.ZERO_SHOT)


def run_cot(instance: ProblemInstance, gateway: Gateway) -> GeneratedModel:
    return _one_template_model(instance, gateway, "cot", Strategy.COT)


def run_knowledge_graph(instance: ProblemInstance, gateway: Gateway) -> GeneratedModel:
    run = gateway.start_run(CALL_BUDGETS[Strategy.KNOWLEDGE_GRAPH])
    kg_rec = _call(run, instance, "kg_create", _base_slots(instance))
    if not kg_rec.response.strip():
        raise KgEmpty("knowledge-graph call returned no text")
    ttl = extract_code(kg_rec.response)
    slots = _base_slots(instance)
    slots["knowledge_graph"] = ttl
    code_rec = _call(run, instance, "kg_codegen", slots)
    return GeneratedModel(
        extract_code(code_rec.response),
        Strategy.KNOWLEDGE_GRAPH,
        run.records,
        intermediate={"knowledge_graph": ttl},
    )


# --- validation chains -----------------------------------------------------


def _code_validation_call(
    run: RunHandle,
    instance: ProblemInstance,
    model_text: str,
    solver: Optional[SolverConfig],
) -> tuple[str, bool]:
    """Always issues the repair call; the error slot is empty when the model
    already checks out.  Returns (possibly repaired model, degraded flag)."""
    error = check_model(model_text, instance.data_text, solver)
    slots = _base_slots(instance)
    slots.update(
        minizinc_code=model_text,
        syntax_error_message=error.text if error else "",
        objective_type=OBJECTIVE_WORDS[instance.objective],
    )
    rec = _call(run, instance, "code_validation", slots)
    repaired = _code_or_none(rec.response)
    if repaired is None:
        return model_text, True
    return repaired, False


def format_diagnostics(diagnostics: list[SyntaxDiagnostic]) -> str:
    return "\n".join(
        f"line {d.line}, column {d.column}: {d.message}" for d in diagnostics
    )


def _grammar_validation_call(
    run: RunHandle,
    instance: ProblemInstance,
    model_text: str,
    grammar: GrammarSpec,
) -> tuple[str, bool]:
    diagnostics = validate_syntax(model_text, grammar)
    slots = _base_slots(instance)
    slots.update(
        current_code=model_text,
        syntax_error_message=format_diagnostics(diagnostics),
        minizinc_grammar=render_grammar_for_prompt(grammar),
    )
    rec = _call(run, instance, "grammar_validation", slots)
    repaired = _code_or_none(rec.response)
    if repaired is None:
        return model_text, True
    return repaired, False


def run_with_code_validation(
    base: Strategy,
    instance: ProblemInstance,
    gateway: Gateway,
    solver: Optional[SolverConfig] = None,
) -> GeneratedModel:
    if base is Strategy.COT:
        strategy = Strategy.COT_CODE
    elif base is Strategy.AGENTIC:
        strategy = Strategy.AGENTIC_CODE
    else:
        raise ValueError(f"code validation wraps CoT or Agentic, not {base.value}")
    run = gateway.start_run(CALL_BUDGETS[strategy])
    intermediate: dict[str, str] = {}
    if base is Strategy.COT:
        rec = _call(run, instance, "cot", _base_slots(instance))
        model_text = extract_code(rec.response)
    else:
        model_text, intermediate = _agentic_calls(run, instance)
    model_text, degraded = _code_validation_call(run, instance, model_text, solver)
    return GeneratedModel(model_text, strategy, run.records, intermediate, degraded)


def run_with_grammar_validation(
    instance: ProblemInstance,
    gateway: Gateway,
    grammar: Optional[GrammarSpec] = None,
    include_code_validation: bool = False,
    solver: Optional[SolverConfig] = None,
) -> GeneratedModel:
    strategy = (
        Strategy.COT_CODE_GRAMMAR if include_code_validation else Strategy.COT_GRAMMAR
    )
    grammar = grammar or load_default_grammar()
    run = gateway.start_run(CALL_BUDGETS[strategy])
    rec = _call(run, instance, "cot", _base_slots(instance))
    model_text = extract_code(rec.response)
    degraded = False
    if include_code_validation:
        model_text, degraded = _code_validation_call(run, instance, model_text, solver)
    model_text, g_degraded = _grammar_validation_call(run, instance, model_text, grammar)
    return GeneratedModel(
        model_text, strategy, run.records, degraded=degraded or g_degraded
    )


# --- agentic decomposition -------------------------------------------------

_AGENTIC_STAGES = ("params_vars", "constraints", "objective")


def _agentic_calls(
    run: RunHandle, instance: ProblemInstance
) -> tuple[str, dict[str, str]]:
    base = _base_slots(instance)
    fragments: dict[str, str] = {}

    rec = _call(run, instance, "agentic_params_vars", dict(base))
    fragments["params_vars"] = extract_code(rec.response)

    slots = dict(base)
    slots["parameters_and_variables"] = fragments["params_vars"]
    rec = _call(run, instance, "agentic_constraints", slots)
    fragments["constraints"] = extract_code(rec.response)

    slots = dict(base)
    slots["parameters_and_variables"] = fragments["params_vars"]
    slots["constraints"] = fragments["constraints"]
    rec = _call(run, instance, "agentic_objective", slots)
    fragments["objective"] = extract_code(rec.response)

    for stage in _AGENTIC_STAGES:
        if not fragments[stage].strip():
            raise FragmentEmpty(stage)

    slots = dict(base)
    slots.update(
        parameters_and_variables=fragments["params_vars"],
        constraints=fragments["constraints"],
        objective=fragments["objective"],
    )
    rec = _call(run, instance, "agentic_stitch", slots)
    return extract_code(rec.response), fragments


def run_agentic(instance: ProblemInstance, gateway: Gateway) -> GeneratedModel:
    run = gateway.start_run(CALL_BUDGETS[Strategy.AGENTIC])
    model_text, fragments = _agentic_calls(run, instance)
    return GeneratedModel(model_text, Strategy.AGENTIC, run.records, fragments)


# --- dispatch and persistence ----------------------------------------------


def run_strategy(
    strategy: Strategy,
    instance: ProblemInstance,
    gateway: Gateway,
    solver: Optional[SolverConfig] = None,
    grammar: Optional[GrammarSpec] = None,
) -> GeneratedModel:
    if strategy is Strategy.ZERO_SHOT:
        return run_zero_shot(instance, gateway)
    if strategy is Strategy.COT:
        return run_cot(instance, gateway)
    if strategy is Strategy.KNOWLEDGE_GRAPH:
        return run_knowledge_graph(instance, gateway)
    if strategy is Strategy.COT_CODE:
        return run_with_code_validation(Strategy.COT, instance, gateway, solver)
    if strategy is Strategy.COT_GRAMMAR:
        return run_with_grammar_validation(instance, gateway, grammar)
    if strategy is Strategy.COT_CODE_GRAMMAR:
        return run_with_grammar_validation(
            instance, gateway, grammar, include_code_validation=True, solver=solver
        )
    if strategy is Strategy.AGENTIC:
        return run_agentic(instance, gateway)
    if strategy is Strategy.AGENTIC_CODE:
        return run_with_code_validation(Strategy.AGENTIC, instance, gateway, solver)
    raise ValueError(f"unknown strategy {strategy!r}")


def save_generated(generated: GeneratedModel, out_dir: Path) -> None:
    """model.mzn + trace.jsonl + any intermediate artifacts."""
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "model.mzn").write_text(generated.model_text, encoding="utf-8")
    with open(out_dir / "trace.jsonl", "w", encoding="utf-8") as fh:
        for rec in generated.calls:
            fh.write(json.dumps(rec.to_json()) + "\n")
    for name, text in generated.intermediate.items():
        suffix = "ttl" if name == "knowledge_graph" else "mzn"
        (out_dir / f"{name}.{suffix}").write_text(text, encoding="utf-8")
    meta = {
        "strategy": generated.strategy.value,
        "calls": len(generated.calls),
        "degraded": generated.degraded,
    }
    (out_dir / "generation.json").write_text(
        json.dumps(meta, indent=2) + "\n", encoding="utf-8"
    )
