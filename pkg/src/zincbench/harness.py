"""Subprocess harness around the MiniZinc toolchain.

Runs generated models against instance data, enforces time limits with a
hard process-group kill, parses solution blocks back into Bindings, and
classifies failure text into a fixed error taxonomy.
"""

from __future__ import annotations

import os
import re
import shutil
import signal
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .dzn import Bindings, parse_dzn, serialize

SOLUTION_SEP = "----------"
OPTIMAL_MARK = "=========="
UNSAT_MARK = "=====UNSATISFIABLE====="
UNKNOWN_MARK = "=====UNKNOWN====="
UNBOUNDED_MARK = "=====UNBOUNDED====="

#: grace period between the solver-side limit and the hard kill
KILL_GRACE_SECONDS = 5.0


class Status(str, Enum):
    OPTIMAL = "Optimal"
    SATISFIED = "Satisfied"
    UNSATISFIABLE = "Unsatisfiable"
    COMPILE_ERROR = "CompileError"
    RUNTIME_ERROR = "RuntimeError"
    TIMEOUT = "Timeout"
    UNKNOWN = "Unknown"


class ErrorCategory(str, Enum):
    SYNTAX = "SyntaxError"
    UNDEFINED_IDENTIFIER = "UndefinedIdentifier"
    ARRAY_INDEXING = "ArrayIndexing"
    FUNCTION_NOT_FOUND = "FunctionNotFound"
    VARIABLE_REDEFINITION = "VariableRedefinition"
    FLATTENING = "FlatteningError"
    TIMEOUT = "TimeoutError"
    SOLVER_LIMITATION = "SolverLimitation"
    MISSING_DATA = "MissingData"
    UNCLASSIFIED = "Unclassified"


class ToolchainMissing(Exception):
    pass


class VerifierCompileError(Exception):
    """The ground-truth model failed to compile during verification."""


class OutputParseError(Exception):
    def __init__(self, raw: str, reason: str):
        self.raw = raw
        self.reason = reason
        super().__init__(reason)


@dataclass(frozen=True)
class SolverConfig:
    solver: str = "gecode"
    time_limit: float = 60.0
    extra_flags: tuple[str, ...] = ()
    executable: Optional[str] = None  # None -> $ZINCBENCH_MINIZINC or "minizinc"

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ValueError("time limit must be positive")

    def resolve_executable(self) -> str:
        exe = self.executable or os.environ.get("ZINCBENCH_MINIZINC") or "minizinc"
        found = shutil.which(exe)
        if found is None:
            raise ToolchainMissing(f"cannot find MiniZinc executable {exe!r} on PATH")
        return found


@dataclass(frozen=True)
class SolverError:
    category: ErrorCategory
    text: str


@dataclass(frozen=True)
class SolveResult:
    status: Status
    objective_value: Optional[float] = None
    assignments: Bindings = field(default_factory=dict)
    error: Optional[SolverError] = None
    wall_seconds: float = 0.0
    stdout: str = ""
    stderr: str = ""
    output_parse_failed: bool = False

    def __post_init__(self):
        if self.status in (Status.OPTIMAL, Status.SATISFIED) and self.error is not None:
            raise ValueError(f"{self.status.value} results cannot carry an error")
        if self.status in (Status.COMPILE_ERROR, Status.RUNTIME_ERROR) and self.error is None:
            raise ValueError(f"{self.status.value} results must carry an error")


# --- error classification --------------------------------------------------

# ordered first-match table; patterns are lowercase substrings
_CLASSIFIER_TABLE: tuple[tuple[ErrorCategory, tuple[str, ...]], ...] = (
    (ErrorCategory.SYNTAX, ("syntax error",)),
    (ErrorCategory.UNDEFINED_IDENTIFIER, ("undefined identifier",)),
    (ErrorCategory.FUNCTION_NOT_FOUND, ("no function or predicate",)),
    (ErrorCategory.VARIABLE_REDEFINITION, ("multiple assignment",)),
    (
        ErrorCategory.MISSING_DATA,
        ("must be defined", "did you forget to specify a data file"),
    ),
    (
        ErrorCategory.ARRAY_INDEXING,
        (
            "invalid type-inst",
            "array access out of bounds",
            "index out of bounds",
            "index set",
            "array index",
        ),
    ),
    (ErrorCategory.FLATTENING, ("flattening error",)),
    (
        ErrorCategory.TIMEOUT,
        ("time limit exceeded", "time-limit", "timed out", "time out reached"),
    ),
    (
        ErrorCategory.SOLVER_LIMITATION,
        (
            "unable to create linear formulation",
            "quadratic constraint",
            "not supported by the solver",
            "cannot handle",
        ),
    ),
)


def classify_error(stderr_text: str) -> ErrorCategory:
    """Deterministic first-match classification; Unclassified as catch-all."""
    lowered = stderr_text.lower()
    for category, patterns in _CLASSIFIER_TABLE:
        if any(p in lowered for p in patterns):
            return category
    return ErrorCategory.UNCLASSIFIED


# --- solution parsing ------------------------------------------------------

_ARRAY_WRAPPER = re.compile(
    r"^(?P<head>\s*[A-Za-z_][A-Za-z0-9_]*\s*=\s*)array(?P<rank>[12])d\s*\("
    r"(?P<args>.*)\)\s*;\s*$"
)
_RANGE = re.compile(r"^\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$")


def _rewrite_array_wrapper(line: str) -> str:
    m = _ARRAY_WRAPPER.match(line)
    if not m:
        return line
    args = m.group("args")
    bracket = args.find("[")
    if bracket == -1 or not args.rstrip().endswith("]"):
        return line
    index_part = args[:bracket]
    body = args[bracket + 1 : args.rstrip().rfind("]")]
    ranges = [r for r in index_part.split(",") if r.strip()]
    if m.group("rank") == "1":
        return f"{m.group('head')}[{body}];"
    if len(ranges) != 2:
        return line
    col_match = _RANGE.match(ranges[1])
    if not col_match:
        return line
    cols = int(col_match.group(2)) - int(col_match.group(1)) + 1
    if cols <= 0:
        return line
    elems = [e.strip() for e in body.split(",") if e.strip()]
    if not elems or len(elems) % cols != 0:
        return line
    rows = [", ".join(elems[i : i + cols]) for i in range(0, len(elems), cols)]
    return f"{m.group('head')}[| " + " | ".join(rows) + " |];"


def _normalize_block(block: str) -> str:
    return "\n".join(_rewrite_array_wrapper(line) for line in block.splitlines())


def parse_solution(
    stdout_text: str, objective_kind: str = "satisfy"
) -> tuple[Optional[float], Bindings]:
    """Parse the last solution block; returns (objective_value, assignments).

    The objective comes from a binding named _objective when present (the
    toolchain emits it under --output-objective).
    """
    blocks: list[str] = []
    current: list[str] = []
    for line in stdout_text.splitlines():
        stripped = line.strip()
        if stripped == SOLUTION_SEP:
            blocks.append("\n".join(current))
            current = []
        elif stripped in (OPTIMAL_MARK, UNSAT_MARK, UNKNOWN_MARK, UNBOUNDED_MARK):
            continue
        else:
            current.append(line)
    if not blocks:
        raise OutputParseError(stdout_text, "no solution block before separator")
    last = _normalize_block(blocks[-1])
    try:
        bindings = parse_dzn(last)
    except Exception as e:
        raise OutputParseError(stdout_text, f"solution block is not parseable: {e}") from e
    objective = None
    if "_objective" in bindings:
        raw = bindings.pop("_objective")
        value = getattr(raw, "value", None)
        if isinstance(value, (int, float)):
            objective = value
    if objective_kind == "satisfy":
        objective = None
    return objective, bindings


# --- solving ---------------------------------------------------------------

def _run_toolchain(
    exe: str, model_path: Path, data_path: Optional[Path], config: SolverConfig
) -> tuple[int, str, str, float, bool]:
    cmd = [exe, str(model_path)]
    if data_path is not None:
        cmd.append(str(data_path))
    cmd += [
        "--solver", config.solver,
        "--time-limit", str(int(config.time_limit * 1000)),
        "--output-mode", "dzn",
        "--output-objective",
    ]
    cmd += list(config.extra_flags)
    start = time.monotonic()
    proc = subprocess.Popen(
        cmd,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        start_new_session=True,
    )
    killed = False
    try:
        out, err = proc.communicate(timeout=config.time_limit + KILL_GRACE_SECONDS)
    except subprocess.TimeoutExpired:
        killed = True
        try:
            os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            proc.kill()
        out, err = proc.communicate()
    wall = time.monotonic() - start
    return proc.returncode, out or "", err or "", wall, killed


def _detect_objective_kind(model_text: str) -> str:
    solve = re.search(r"\bsolve\b(.*?);", model_text, re.DOTALL)
    tail = solve.group(1) if solve else ""
    if re.search(r"\bminimize\b", tail):
        return "minimize"
    if re.search(r"\bmaximize\b", tail):
        return "maximize"
    return "satisfy"


def solve(model_text: str, data_text: str, config: SolverConfig) -> SolveResult:
    """Run a model; failures come back encoded in the status, never raised
    (only a missing toolchain raises)."""
    exe = config.resolve_executable()
    objective_kind = _detect_objective_kind(model_text)
    with tempfile.TemporaryDirectory(prefix="zincbench-") as scratch:
        model_path = Path(scratch) / "model.mzn"
        model_path.write_text(model_text, encoding="utf-8")
        data_path = None
        if data_text.strip():
            data_path = Path(scratch) / "data.dzn"
            data_path.write_text(data_text, encoding="utf-8")
        rc, out, err, wall, killed = _run_toolchain(exe, model_path, data_path, config)

    if killed:
        return SolveResult(
            status=Status.TIMEOUT,
            error=SolverError(
                ErrorCategory.TIMEOUT,
                f"time limit exceeded; process group killed after "
                f"{config.time_limit + KILL_GRACE_SECONDS:.0f}s",
            ),
            wall_seconds=wall,
            stdout=out,
            stderr=err,
        )

    if rc != 0 and err.strip():
        category = classify_error(err)
        if category is ErrorCategory.TIMEOUT:
            status = Status.TIMEOUT
        elif category in (ErrorCategory.SOLVER_LIMITATION, ErrorCategory.UNCLASSIFIED):
            status = Status.RUNTIME_ERROR
        else:
            status = Status.COMPILE_ERROR
        return SolveResult(
            status=status,
            error=SolverError(category, err.strip()),
            wall_seconds=wall,
            stdout=out,
            stderr=err,
        )

    if UNSAT_MARK in out:
        return SolveResult(
            status=Status.UNSATISFIABLE, wall_seconds=wall, stdout=out, stderr=err
        )
    if UNKNOWN_MARK in out and SOLUTION_SEP not in out:
        near_limit = wall >= config.time_limit - 0.5
        if near_limit:
            return SolveResult(
                status=Status.TIMEOUT,
                error=SolverError(ErrorCategory.TIMEOUT, "time limit exceeded"),
                wall_seconds=wall,
                stdout=out,
                stderr=err,
            )
        return SolveResult(status=Status.UNKNOWN, wall_seconds=wall, stdout=out, stderr=err)

    try:
        objective, assignments = parse_solution(out, objective_kind)
    except OutputParseError:
        return SolveResult(
            status=Status.UNKNOWN,
            wall_seconds=wall,
            stdout=out,
            stderr=err,
            output_parse_failed=True,
        )
    status = Status.OPTIMAL if OPTIMAL_MARK in out else Status.SATISFIED
    return SolveResult(
        status=status,
        objective_value=objective,
        assignments=assignments,
        wall_seconds=wall,
        stdout=out,
        stderr=err,
    )


def check_model(
    model_text: str, data_text: str = "", config: Optional[SolverConfig] = None
) -> Optional[SolverError]:
    """Type-check a model without solving it.  Returns None when the model is
    accepted, otherwise the classified error."""
    config = config or SolverConfig()
    exe = config.resolve_executable()
    with tempfile.TemporaryDirectory(prefix="zincbench-") as scratch:
        model_path = Path(scratch) / "model.mzn"
        model_path.write_text(model_text, encoding="utf-8")
        cmd = [exe, "--model-check-only", str(model_path)]
        if data_text.strip():
            data_path = Path(scratch) / "data.dzn"
            data_path.write_text(data_text, encoding="utf-8")
            cmd.append(str(data_path))
        try:
            proc = subprocess.run(
                cmd, capture_output=True, text=True,
                timeout=config.time_limit + KILL_GRACE_SECONDS,
            )
        except subprocess.TimeoutExpired:
            return SolverError(ErrorCategory.TIMEOUT, "time limit exceeded during model check")
    if proc.returncode == 0:
        return None
    text = (proc.stderr or proc.stdout or "model check failed").strip()
    return SolverError(classify_error(text), text)


def solve_many(
    jobs: Iterable[tuple[str, str]], config: SolverConfig, workers: int = 1
) -> list[SolveResult]:
    """Solve (model_text, data_text) pairs, optionally in parallel."""
    tasks = list(jobs)
    if workers <= 1:
        return [solve(m, d, config) for m, d in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: solve(t[0], t[1], config), tasks))


# --- verification ----------------------------------------------------------

def _model_words(model_text: str) -> frozenset[str]:
    return frozenset(re.findall(r"[A-Za-z_][A-Za-z0-9_]*", model_text))


def inject_assignments(
    ground_truth_model: str, data_text: str, assignments: Bindings
) -> str:
    """Build the DZN payload that fixes candidate values inside the model."""
    existing = set(parse_dzn(data_text)) if data_text.strip() else set()
    words = _model_words(ground_truth_model)
    filtered: Bindings = {
        name: value
        for name, value in assignments.items()
        if name in words and name not in existing
    }
    pieces = [data_text.rstrip()] if data_text.strip() else []
    if filtered:
        pieces.append(serialize(filtered).rstrip())
    return ("\n".join(pieces) + "\n") if pieces else ""


def verify_satisfaction(
    ground_truth_model: str,
    candidate_assignments: Bindings,
    config: SolverConfig,
    data_text: str = "",
) -> bool:
    """True iff the ground-truth model accepts the candidate's values."""
    payload = inject_assignments(ground_truth_model, data_text, candidate_assignments)
    result = solve(ground_truth_model, payload, config)
    if result.status is Status.COMPILE_ERROR:
        raise VerifierCompileError(result.error.text if result.error else "compile failure")
    return result.status in (Status.SATISFIED, Status.OPTIMAL)


def reevaluate_objective(
    model_text: str, data_text: str, assignments: Bindings, config: SolverConfig
) -> Optional[float]:
    """One-shot rerun with the solution pinned, to recover a missing objective."""
    payload = inject_assignments(model_text, data_text, assignments)
    result = solve(model_text, payload, config)
    return result.objective_value
