"""Problem-instance storage: the four-file on-disk schema and its invariants.

Each instance lives in its own directory as input.json (description,
declared parameters/outputs, metadata), data.dzn, model.mzn (ground
truth, optional except for satisfaction problems) and output.json
(expected objective / variable values).  A corpus root holds instance
directories plus index.json mapping instance ids to relative paths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .dzn import DznParseError, is_identifier, parse_dzn, value_rank

OBJECTIVES = ("satisfy", "minimize", "maximize")

INPUT_FILE = "input.json"
DATA_FILE = "data.dzn"
MODEL_FILE = "model.mzn"
OUTPUT_FILE = "output.json"
INDEX_FILE = "index.json"


class CorpusError(Exception):
    pass


class MissingInput(CorpusError):
    """The instance directory has no input.json."""


class MalformedInput(CorpusError):
    """input.json or output.json fails JSON parsing or the schema."""


class InvalidObjective(MalformedInput):
    """metadata.objective is outside satisfy/minimize/maximize."""


class MissingGroundTruth(CorpusError):
    """A satisfaction instance arrived without a ground-truth model."""


class IoError(CorpusError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    definition: str
    symbol: str
    shape: tuple[str, ...] = ()

    def __post_init__(self):
        if not is_identifier(self.symbol):
            raise ValueError(f"parameter symbol {self.symbol!r} is not a valid identifier")

    @property
    def is_scalar(self) -> bool:
        return not self.shape


@dataclass(frozen=True)
class OutputSpec:
    definition: str
    symbol: str
    shape: tuple[str, ...] = ()

    def __post_init__(self):
        if not is_identifier(self.symbol):
            raise ValueError(f"output symbol {self.symbol!r} is not a valid identifier")


@dataclass(frozen=True)
class Metadata:
    title: str
    identifier: str
    domain: str
    objective: str
    keywords: tuple[str, ...] = ()
    subdomain: Optional[str] = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.identifier:
            raise ValueError("metadata.identifier must be non-empty")
        if self.objective not in OBJECTIVES:
            raise InvalidObjective(
                f"objective must be one of {', '.join(OBJECTIVES)}; got {self.objective!r}"
            )


@dataclass(frozen=True)
class ProblemInput:
    description: str
    parameters: tuple[ParamSpec, ...]
    output: tuple[OutputSpec, ...]
    metadata: Metadata

    def __post_init__(self):
        for kind, specs in (("parameter", self.parameters), ("output", self.output)):
            seen = set()
            for spec in specs:
                if spec.symbol in seen:
                    raise ValueError(f"duplicate {kind} symbol {spec.symbol!r}")
                seen.add(spec.symbol)


@dataclass(frozen=True)
class ExpectedOutput:
    objective_value: Optional[float] = None
    variable_values: dict[str, Any] = field(default_factory=dict)
    # set when the reference answer is "no solution exists"
    unsatisfiable: bool = False


@dataclass(frozen=True)
class ProblemInstance:
    input: ProblemInput
    data_text: str = ""
    ground_truth_model: Optional[str] = None
    expected_output: Optional[ExpectedOutput] = None
    verified: bool = False

    @property
    def identifier(self) -> str:
        return self.input.metadata.identifier

    @property
    def objective(self) -> str:
        return self.input.metadata.objective

    def check_invariants(self) -> None:
        if self.objective == "satisfy" and self.ground_truth_model is None:
            raise MissingGroundTruth(
                f"{self.identifier}: satisfaction instances require a ground-truth model"
            )
        if self.expected_output is not None:
            exp = self.expected_output
            if exp.unsatisfiable:
                return
            if self.objective != "satisfy" and exp.objective_value is None:
                raise MalformedInput(
                    f"{self.identifier}: optimization output must carry an objective value"
                )
            if self.objective == "satisfy" and not exp.variable_values:
                raise MalformedInput(
                    f"{self.identifier}: satisfaction output must carry variable values"
                )


# --- JSON (de)serialization ------------------------------------------------

_SPEC_KEYS = {"definition", "symbol", "shape"}
_META_KNOWN = {"title", "identifier", "domain", "subdomain", "objective", "keywords"}
_INPUT_KEYS = {"description", "parameters", "output", "metadata", "verified"}


def _as_spec(raw: Any, cls, where: str):
    if not isinstance(raw, dict):
        raise MalformedInput(f"{where}: expected an object, got {type(raw).__name__}")
    unknown = set(raw) - _SPEC_KEYS
    if unknown:
        raise MalformedInput(f"{where}: unknown keys {sorted(unknown)}")
    try:
        shape = raw.get("shape", [])
        if not isinstance(shape, list) or not all(isinstance(s, str) for s in shape):
            raise MalformedInput(f"{where}: shape must be a list of dimension names")
        return cls(
            definition=str(raw.get("definition", "")),
            symbol=raw["symbol"],
            shape=tuple(shape),
        )
    except KeyError as e:
        raise MalformedInput(f"{where}: missing key {e.args[0]!r}") from None
    except ValueError as e:
        raise MalformedInput(f"{where}: {e}") from None


def _parse_metadata(raw: Any) -> Metadata:
    if not isinstance(raw, dict):
        raise MalformedInput("metadata: expected an object")
    try:
        keywords = raw.get("keywords", [])
        if not isinstance(keywords, list):
            raise MalformedInput("metadata.keywords must be a list")
        return Metadata(
            title=str(raw.get("title", "")),
            identifier=str(raw.get("identifier", "")),
            domain=str(raw.get("domain", "")),
            subdomain=raw.get("subdomain"),
            objective=raw.get("objective", ""),
            keywords=tuple(str(k) for k in keywords),
            extra={k: v for k, v in raw.items() if k not in _META_KNOWN},
        )
    except InvalidObjective:
        raise
    except ValueError as e:
        raise MalformedInput(f"metadata: {e}") from None


def parse_problem_input(raw: Any) -> tuple[ProblemInput, bool]:
    """Parse the input.json payload; returns (input, verified flag)."""
    if not isinstance(raw, dict):
        raise MalformedInput("input.json: top level must be an object")
    unknown = set(raw) - _INPUT_KEYS
    if unknown:
        raise MalformedInput(f"input.json: unknown keys {sorted(unknown)}")
    for key in ("description", "metadata"):
        if key not in raw:
            raise MalformedInput(f"input.json: missing key {key!r}")
    params_raw = raw.get("parameters", [])
    output_raw = raw.get("output", [])
    if not isinstance(params_raw, list) or not isinstance(output_raw, list):
        raise MalformedInput("input.json: parameters and output must be lists")
    verified = raw.get("verified", False)
    if not isinstance(verified, bool):
        raise MalformedInput("input.json: verified must be a boolean")
    try:
        problem_input = ProblemInput(
            description=str(raw["description"]),
            parameters=tuple(
                _as_spec(p, ParamSpec, f"parameters[{i}]") for i, p in enumerate(params_raw)
            ),
            output=tuple(
                _as_spec(o, OutputSpec, f"output[{i}]") for i, o in enumerate(output_raw)
            ),
            metadata=_parse_metadata(raw["metadata"]),
        )
    except ValueError as e:
        raise MalformedInput(str(e)) from None
    return problem_input, verified


def _input_to_json(instance: ProblemInstance) -> dict[str, Any]:
    inp = instance.input
    meta = inp.metadata
    meta_json: dict[str, Any] = {
        "title": meta.title,
        "identifier": meta.identifier,
        "domain": meta.domain,
        "objective": meta.objective,
        "keywords": list(meta.keywords),
    }
    if meta.subdomain is not None:
        meta_json["subdomain"] = meta.subdomain
    meta_json.update(meta.extra)
    return {
        "description": inp.description,
        "parameters": [
            {"definition": p.definition, "symbol": p.symbol, "shape": list(p.shape)}
            for p in inp.parameters
        ],
        "output": [
            {"definition": o.definition, "symbol": o.symbol, "shape": list(o.shape)}
            for o in inp.output
        ],
        "metadata": meta_json,
        "verified": instance.verified,
    }


def instance_to_json(instance: ProblemInstance) -> dict[str, Any]:
    """Single-object form of the four-file layout, for transport over HTTP."""
    return {
        "input": _input_to_json(instance),
        "data": instance.data_text,
        "model": instance.ground_truth_model,
        "output": (
            _expected_to_json(instance.expected_output)
            if instance.expected_output is not None
            else None
        ),
    }


def instance_from_json(raw: Any) -> ProblemInstance:
    if not isinstance(raw, dict):
        raise MalformedInput("instance body must be an object")
    unknown = set(raw) - {"input", "data", "model", "output"}
    if unknown:
        raise MalformedInput(f"instance body: unknown keys {sorted(unknown)}")
    if "input" not in raw:
        raise MalformedInput("instance body: missing 'input'")
    inp, verified = parse_problem_input(raw["input"])
    data = raw.get("data") or ""
    if not isinstance(data, str):
        raise MalformedInput("instance body: 'data' must be a string")
    model = raw.get("model")
    if model is not None and not isinstance(model, str):
        raise MalformedInput("instance body: 'model' must be a string")
    output_raw = raw.get("output")
    expected = (
        _parse_expected_output(output_raw, "output") if output_raw is not None else None
    )
    instance = ProblemInstance(
        input=inp,
        data_text=data,
        ground_truth_model=model,
        expected_output=expected,
        verified=verified,
    )
    instance.check_invariants()
    return instance


def _parse_expected_output(raw: Any, where: str) -> ExpectedOutput:
    if not isinstance(raw, dict):
        raise MalformedInput(f"{where}: top level must be an object")
    unknown = set(raw) - {"objective", "variables", "unsatisfiable"}
    if unknown:
        raise MalformedInput(f"{where}: unknown keys {sorted(unknown)}")
    objective = raw.get("objective")
    if objective is not None and not isinstance(objective, (int, float)):
        raise MalformedInput(f"{where}: objective must be a number")
    variables = raw.get("variables", {})
    if not isinstance(variables, dict):
        raise MalformedInput(f"{where}: variables must be an object")
    unsat = raw.get("unsatisfiable", False)
    if not isinstance(unsat, bool):
        raise MalformedInput(f"{where}: unsatisfiable must be a boolean")
    return ExpectedOutput(
        objective_value=objective, variable_values=variables, unsatisfiable=unsat
    )


def _expected_to_json(exp: ExpectedOutput) -> dict[str, Any]:
    out: dict[str, Any] = {}
    if exp.objective_value is not None:
        out["objective"] = exp.objective_value
    out["variables"] = exp.variable_values
    if exp.unsatisfiable:
        out["unsatisfiable"] = True
    return out


# --- instance load/save ----------------------------------------------------

def load_problem(root: Path) -> ProblemInstance:
    root = Path(root)
    input_path = root / INPUT_FILE
    if not input_path.is_file():
        raise MissingInput(f"{root}: no {INPUT_FILE}")
    try:
        raw = json.loads(input_path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as e:
        raise IoError(f"{input_path}: {e}") from e
    except json.JSONDecodeError as e:
        raise MalformedInput(f"{input_path}: {e}") from None
    problem_input, verified = parse_problem_input(raw)

    def read_optional(name: str) -> Optional[str]:
        path = root / name
        if not path.is_file():
            return None
        try:
            return path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise IoError(f"{path}: {e}") from e

    data_text = read_optional(DATA_FILE) or ""
    model_text = read_optional(MODEL_FILE)
    expected = None
    output_text = read_optional(OUTPUT_FILE)
    if output_text is not None:
        try:
            expected = _parse_expected_output(
                json.loads(output_text), str(root / OUTPUT_FILE)
            )
        except json.JSONDecodeError as e:
            raise MalformedInput(f"{root / OUTPUT_FILE}: {e}") from None

    instance = ProblemInstance(
        input=problem_input,
        data_text=data_text,
        ground_truth_model=model_text,
        expected_output=expected,
        verified=verified,
    )
    instance.check_invariants()
    return instance


def save_problem(instance: ProblemInstance, root: Path) -> None:
    instance.check_invariants()
    root = Path(root)
    try:
        root.mkdir(parents=True, exist_ok=True)
        (root / INPUT_FILE).write_text(
            json.dumps(_input_to_json(instance), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        (root / DATA_FILE).write_text(instance.data_text, encoding="utf-8")
        if instance.ground_truth_model is not None:
            (root / MODEL_FILE).write_text(instance.ground_truth_model, encoding="utf-8")
        elif (root / MODEL_FILE).exists():
            (root / MODEL_FILE).unlink()
        if instance.expected_output is not None:
            (root / OUTPUT_FILE).write_text(
                json.dumps(_expected_to_json(instance.expected_output), indent=2) + "\n",
                encoding="utf-8",
            )
        elif (root / OUTPUT_FILE).exists():
            (root / OUTPUT_FILE).unlink()
    except OSError as e:
        raise IoError(str(e)) from e


# --- cross validation ------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    kind: str  # missing-symbol | shape-mismatch | unused-binding
    symbol: str
    detail: str


def cross_validate(instance: ProblemInstance) -> list[Finding]:
    """Check declared parameters against the data file.

    Instances with empty data embed everything in the description, so an
    empty data_text yields an empty report by design.
    """
    if not instance.data_text.strip():
        return []
    bindings = parse_dzn(instance.data_text)
    findings: list[Finding] = []
    declared = {p.symbol: p for p in instance.input.parameters}
    for symbol, spec in declared.items():
        if symbol not in bindings:
            findings.append(
                Finding("missing-symbol", symbol, f"declared parameter {symbol!r} has no binding")
            )
            continue
        got_rank = value_rank(bindings[symbol])
        want_rank = len(spec.shape)
        if got_rank != want_rank:
            def describe(rank: int) -> str:
                return "scalar" if rank == 0 else f"{rank}-D"
            findings.append(
                Finding(
                    "shape-mismatch",
                    symbol,
                    f"expected {describe(want_rank)}, found {describe(got_rank)}",
                )
            )
    for symbol in bindings:
        if symbol not in declared:
            findings.append(
                Finding("unused-binding", symbol, f"binding {symbol!r} matches no declared parameter")
            )
    return findings


# --- corpus-level access ---------------------------------------------------

class Corpus:
    """A directory of instances addressed by id through index.json."""

    def __init__(self, root: Path, index: dict[str, str]):
        self.root = Path(root)
        self.index = index

    @classmethod
    def open(cls, root: Path) -> "Corpus":
        root = Path(root)
        index_path = root / INDEX_FILE
        if not index_path.is_file():
            raise MissingInput(f"{root}: no {INDEX_FILE}")
        try:
            raw = json.loads(index_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise MalformedInput(f"{index_path}: {e}") from None
        except OSError as e:
            raise IoError(f"{index_path}: {e}") from e
        if not isinstance(raw, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
        ):
            raise MalformedInput(f"{index_path}: expected an object of id -> relative path")
        return cls(root, dict(raw))

    def ids(self) -> list[str]:
        return sorted(self.index)

    def path_for(self, instance_id: str) -> Path:
        if instance_id not in self.index:
            raise KeyError(instance_id)
        return self.root / self.index[instance_id]

    def load(self, instance_id: str) -> ProblemInstance:
        instance = load_problem(self.path_for(instance_id))
        if instance.identifier != instance_id:
            raise MalformedInput(
                f"index id {instance_id!r} does not match metadata identifier "
                f"{instance.identifier!r}"
            )
        return instance

    def load_all(self) -> list[ProblemInstance]:
        return [self.load(i) for i in self.ids()]

    def save(self, instance: ProblemInstance) -> None:
        """Persist an instance, registering it in the index when new."""
        instance_id = instance.identifier
        rel = self.index.get(instance_id, instance_id)
        save_problem(instance, self.root / rel)
        if instance_id not in self.index:
            self.index[instance_id] = rel
            self._write_index()

    def _write_index(self) -> None:
        payload = json.dumps(dict(sorted(self.index.items())), indent=2) + "\n"
        try:
            (self.root / INDEX_FILE).write_text(payload, encoding="utf-8")
        except OSError as e:
            raise IoError(str(e)) from e


def new_corpus(root: Path) -> Corpus:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    corpus = Corpus(root, {})
    corpus._write_index()
    return corpus
