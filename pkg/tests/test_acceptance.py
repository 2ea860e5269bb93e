"""Release gate: one test per shipped guarantee.

Each test pins an end-to-end property of the pipeline: perfect scores
under a ground-truth transport, exact per-strategy call budgets,
leaderboard arithmetic, classifier fidelity, grammar verdicts agreeing
with the toolchain, data-file round-trips, verifier soundness against
brute force, and timeout containment.  The last test scripts a full
editor session over the HTTP service; nothing here needs the browser
bundle to exist.
"""

import itertools
import random
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from zincbench.corpus import (
    Corpus,
    ExpectedOutput,
    Metadata,
    OutputSpec,
    ProblemInput,
    ProblemInstance,
    new_corpus,
)
from zincbench.dzn import (
    ArrayValue,
    BoolScalar,
    FloatScalar,
    IntScalar,
    SetOfInt,
    StringScalar,
    parse_dzn,
    serialize,
)
from zincbench.evaluator import (
    CompareDetail,
    InstanceOutcome,
    build_report,
    execution_accuracy,
    format_percent,
    judge_instance,
    solution_accuracy,
)
from zincbench.gateway import Gateway, MockTransport
from zincbench.grammar import validate_syntax
from zincbench.harness import (
    ErrorCategory,
    SolveResult,
    SolverConfig,
    SolverError,
    Status,
    check_model,
    classify_error,
    solve,
    verify_satisfaction,
)
from zincbench.service import create_app
from zincbench.strategies import CALL_BUDGETS, Strategy, run_strategy

FIXTURES = Path(__file__).parent / "fixtures"
CFG = SolverConfig(time_limit=15.0)


def _pmap(fn, items, workers=8):
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _gt_responder(instance):
    reply = f"```minizinc\n{instance.ground_truth_model}\n```"
    return lambda _prompt: reply


GARBAGE_REPLY = "I cannot help with producing a model for this request today"


@pytest.fixture(scope="module")
def corpus_instances():
    return Corpus.open(FIXTURES / "corpus").load_all()


# --- oracle identity -------------------------------------------------------


def test_ground_truth_transport_scores_perfect_and_garbage_scores_zero(corpus_instances):
    start = time.monotonic()
    assert len(corpus_instances) >= 10
    assert {i.objective for i in corpus_instances} == {"satisfy", "minimize", "maximize"}

    def run_one(job):
        strategy, inst, responder = job
        gateway = Gateway(MockTransport(responder))
        generated = run_strategy(strategy, inst, gateway, solver=CFG)
        result = solve(generated.model_text, inst.data_text, CFG)
        return strategy, judge_instance(result, inst, strategy.value, solver=CFG)

    gt_jobs = [(s, i, _gt_responder(i)) for s in Strategy for i in corpus_instances]
    by_strategy = {s: [] for s in Strategy}
    for strategy, outcome in _pmap(run_one, gt_jobs):
        by_strategy[strategy].append(outcome)
    for strategy, outcomes in by_strategy.items():
        assert execution_accuracy(outcomes) == 1.0, strategy
        assert solution_accuracy(outcomes) == 1.0, strategy

    garbage_jobs = [
        (s, i, lambda _p: GARBAGE_REPLY) for s in Strategy for i in corpus_instances
    ]
    garbage = {s: [] for s in Strategy}
    for strategy, outcome in _pmap(run_one, garbage_jobs):
        garbage[strategy].append(outcome)
    for strategy, outcomes in garbage.items():
        assert execution_accuracy(outcomes) == 0.0, strategy

    assert time.monotonic() - start < 120.0


# --- call budgets ----------------------------------------------------------


def test_call_budgets_are_exact_per_strategy(corpus_instances):
    assert [CALL_BUDGETS[s] for s in Strategy] == [1, 1, 2, 2, 2, 3, 4, 5]

    def generate(job):
        strategy, inst = job
        gateway = Gateway(MockTransport(_gt_responder(inst)))
        return job, run_strategy(strategy, inst, gateway, solver=CFG)

    jobs = [(s, i) for s in Strategy for i in corpus_instances]
    for (strategy, inst), generated in _pmap(generate, jobs):
        assert len(generated.calls) == CALL_BUDGETS[strategy], (
            strategy,
            inst.identifier,
        )


# --- leaderboard arithmetic ------------------------------------------------


def _synthetic(n, executed, correct, strategy="ZeroShot", source="setA"):
    outs = []
    for i in range(n):
        is_exec = i < executed
        outs.append(
            InstanceOutcome(
                instance_id=f"{source}_{i:03d}",
                source=source,
                strategy=strategy,
                executed=is_exec,
                solution_correct=i < correct,
                solve=SolveResult(status=Status.SATISFIED)
                if is_exec
                else SolveResult(
                    status=Status.COMPILE_ERROR,
                    error=SolverError(ErrorCategory.SYNTAX, "boom"),
                ),
                detail=CompareDetail("objective"),
            )
        )
    return outs


def test_leaderboard_percentages_and_total_additivity():
    outs = _synthetic(65, 41, 21)
    assert format_percent(execution_accuracy(outs)) == "63.08"
    assert format_percent(solution_accuracy(outs)) == "32.31"
    outs = _synthetic(65, 50, 25)
    assert format_percent(execution_accuracy(outs)) == "76.92"
    assert format_percent(solution_accuracy(outs)) == "38.46"

    report = build_report(
        _synthetic(10, 8, 5, source="setA") + _synthetic(6, 3, 2, source="setB")
    )
    total = report.totals[0]
    assert (total.n, total.executed, total.correct) == (16, 11, 7)
    assert total.n == sum(r.n for r in report.rows)
    assert total.executed == sum(r.executed for r in report.rows)
    assert total.correct == sum(r.correct for r in report.rows)


# --- error classifier ------------------------------------------------------

CLASSIFIER_EXEMPLARS = [
    ("Error: syntax error, unexpected where, expecting ')'", ErrorCategory.SYNTAX),
    (
        "Error: type error: undefined identifier `i', did you mean `X'?",
        ErrorCategory.UNDEFINED_IDENTIFIER,
    ),
    (
        "Error: type error: initialisation value for `Downtime' has invalid type-inst: "
        "expected `array[int] of int', actual `array[int,int] of int'",
        ErrorCategory.ARRAY_INDEXING,
    ),
    (
        "Error: type error: no function or predicate with this signature found: `..o(float)'",
        ErrorCategory.FUNCTION_NOT_FOUND,
    ),
    (
        "Error: type error: multiple assignment to the same variable",
        ErrorCategory.VARIABLE_REDEFINITION,
    ),
    (
        "Error: flattening error: unbounded coefficient in linear expression",
        ErrorCategory.FLATTENING,
    ),
    ("time limit exceeded", ErrorCategory.TIMEOUT),
    (
        "Unable to create linear formulation for quadratic constraint",
        ErrorCategory.SOLVER_LIMITATION,
    ),
    (
        "Error: type error: variable `K' must be defined (did you forget to specify a data file?)",
        ErrorCategory.MISSING_DATA,
    ),
]


def test_error_classifier_maps_all_nine_exemplars():
    assert len(CLASSIFIER_EXEMPLARS) == 9
    assert len({category for _, category in CLASSIFIER_EXEMPLARS}) == 9
    misclassified = [
        (text, classify_error(text), category)
        for text, category in CLASSIFIER_EXEMPLARS
        if classify_error(text) is not category
    ]
    assert misclassified == []


# --- grammar vs toolchain --------------------------------------------------


def test_grammar_verdicts_agree_with_toolchain():
    valid = sorted((FIXTURES / "grammar" / "valid").glob("*.mzn"))
    invalid = sorted((FIXTURES / "grammar" / "invalid").glob("*.mzn"))
    assert len(valid) >= 20
    assert len(invalid) >= 20
    assert any("predicate all_different" in p.read_text() for p in valid)

    def verdicts(path):
        text = path.read_text()
        grammar_ok = not validate_syntax(text)
        toolchain_ok = check_model(text, "", CFG) is None
        return grammar_ok, toolchain_ok

    pairs = _pmap(verdicts, valid + invalid)
    agreement = sum(1 for g, t in pairs if g == t) / len(pairs)
    assert agreement >= 0.95

    # keyword case is load-bearing: the lowercase literal parses, the
    # capitalized one must be flagged
    assert validate_syntax("var bool: b = true;\nsolve satisfy;\n") == []
    assert validate_syntax("var bool: b = True;\nsolve satisfy;\n") != []


# --- data file round-trip --------------------------------------------------


def _random_scalar(rng, kind):
    if kind == "int":
        return IntScalar(rng.randrange(-999, 1000))
    if kind == "bool":
        return BoolScalar(rng.random() < 0.5)
    pick = rng.random()
    if pick < 0.3:
        return FloatScalar(float(rng.randrange(-50, 51)))
    if pick < 0.4:
        return FloatScalar(rng.uniform(-1, 1) * 10.0 ** rng.randrange(-30, 31))
    return FloatScalar(rng.uniform(-1e6, 1e6))


def _random_value(rng):
    kind = rng.choice(("int", "float", "bool", "string", "set", "arr1", "arr2"))
    if kind in ("int", "float", "bool"):
        return _random_scalar(rng, kind)
    if kind == "string":
        alphabet = "abcXYZ 09_\"\\\n\t"
        return StringScalar("".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 12))))
    if kind == "set":
        members = sorted(rng.sample(range(-20, 21), rng.randrange(0, 7)))
        return SetOfInt(tuple(members))
    element_kind = rng.choice(("int", "float", "bool"))
    if kind == "arr1":
        n = rng.randrange(1, 7)
        return ArrayValue(
            ((1, n),), tuple(_random_scalar(rng, element_kind) for _ in range(n))
        )
    rows, cols = rng.randrange(1, 4), rng.randrange(1, 4)
    return ArrayValue(
        ((1, rows), (1, cols)),
        tuple(_random_scalar(rng, element_kind) for _ in range(rows * cols)),
    )


def test_dzn_round_trip_on_thousand_binding_sets():
    rng = random.Random(99173)
    failures = []
    for case in range(1000):
        bindings = {
            f"v{k}": _random_value(rng) for k in range(rng.randrange(1, 6))
        }
        if parse_dzn(serialize(bindings)) != bindings:
            failures.append(case)
    assert failures == []


# --- verifier soundness ----------------------------------------------------

_CONSTRAINT_KINDS = ("le_sum", "eq_sum", "ne", "lt", "ge_scaled", "unary_ne", "unary_le")


def _toy_csp(rng, nvars, domain):
    """Random conjunctive CSP over x1..xN in 1..domain, with a Python twin."""
    lines = [f"var 1..{domain}: x{i};" for i in range(1, nvars + 1)]
    predicates = []
    for _ in range(rng.randrange(1, 4)):
        kind = rng.choice(_CONSTRAINT_KINDS if nvars > 1 else _CONSTRAINT_KINDS[-2:])
        i = rng.randrange(nvars)
        j = rng.choice([k for k in range(nvars) if k != i]) if nvars > 1 else i
        if kind == "le_sum":
            c = rng.randrange(2, 2 * domain + 1)
            lines.append(f"constraint x{i + 1} + x{j + 1} <= {c};")
            predicates.append(lambda a, i=i, j=j, c=c: a[i] + a[j] <= c)
        elif kind == "eq_sum":
            c = rng.randrange(2, 2 * domain + 1)
            lines.append(f"constraint x{i + 1} + x{j + 1} = {c};")
            predicates.append(lambda a, i=i, j=j, c=c: a[i] + a[j] == c)
        elif kind == "ne":
            lines.append(f"constraint x{i + 1} != x{j + 1};")
            predicates.append(lambda a, i=i, j=j: a[i] != a[j])
        elif kind == "lt":
            lines.append(f"constraint x{i + 1} < x{j + 1};")
            predicates.append(lambda a, i=i, j=j: a[i] < a[j])
        elif kind == "ge_scaled":
            lines.append(f"constraint 2 * x{i + 1} >= x{j + 1};")
            predicates.append(lambda a, i=i, j=j: 2 * a[i] >= a[j])
        elif kind == "unary_ne":
            v = rng.randrange(1, domain + 1)
            lines.append(f"constraint x{i + 1} != {v};")
            predicates.append(lambda a, i=i, v=v: a[i] != v)
        else:
            v = rng.randrange(1, domain + 1)
            lines.append(f"constraint x{i + 1} <= {v};")
            predicates.append(lambda a, i=i, v=v: a[i] <= v)
    model = "\n".join(lines) + "\nsolve satisfy;\n"
    feasible = lambda a: all(p(a) for p in predicates)
    return model, feasible


def _toy_instance(identifier, model, objective, expected):
    meta = Metadata(
        title=identifier,
        identifier=identifier,
        domain="toys",
        objective=objective,
        extra={"source": "random-toys"},
    )
    inp = ProblemInput(
        description="randomly generated toy problem",
        parameters=(),
        output=(OutputSpec("assignment", "x1", ()),),
        metadata=meta,
    )
    return ProblemInstance(
        input=inp, data_text="", ground_truth_model=model, expected_output=expected
    )


def test_verifier_matches_brute_force_on_random_toy_csps():
    start = time.monotonic()
    rng = random.Random(413007)

    shapes = []
    while len(shapes) < 49:
        nvars, domain = rng.randrange(1, 5), rng.randrange(2, 5)
        if domain**nvars <= 64:  # keep the full sweep tractable
            shapes.append((nvars, domain))
    shapes.append((4, 4))  # and cover the largest corner once

    checks = []
    for nvars, domain in shapes:
        model, feasible = _toy_csp(rng, nvars, domain)
        for values in itertools.product(range(1, domain + 1), repeat=nvars):
            checks.append((model, values, feasible(values)))

    def agree(check):
        model, values, expected = check
        bindings = {f"x{k + 1}": IntScalar(v) for k, v in enumerate(values)}
        return verify_satisfaction(model, bindings, CFG) == expected

    results = _pmap(agree, checks)
    assert all(results), f"{results.count(False)} of {len(checks)} assignments disagree"

    # minimization: the judge must accept exactly the exhaustive optimum
    made = 0
    while made < 8:
        nvars, domain = rng.randrange(1, 4), rng.randrange(2, 5)
        model, feasible = _toy_csp(rng, nvars, domain)
        weights = [rng.randrange(1, 4) for _ in range(nvars)]
        space = list(itertools.product(range(1, domain + 1), repeat=nvars))
        costs = [
            sum(w * v for w, v in zip(weights, values))
            for values in space
            if feasible(values)
        ]
        if not costs:
            continue
        optimum = min(costs)
        objective = " + ".join(f"{w} * x{k + 1}" for k, w in enumerate(weights))
        model = model.replace("solve satisfy;", f"solve minimize {objective};")

        result = solve(model, "", CFG)
        assert result.objective_value == optimum

        inst = _toy_instance(
            f"toy_min_{made}", model, "minimize", ExpectedOutput(objective_value=optimum)
        )
        assert judge_instance(result, inst, "oracle", solver=CFG).solution_correct

        off = _toy_instance(
            f"toy_off_{made}",
            model,
            "minimize",
            ExpectedOutput(objective_value=optimum + 1),
        )
        outcome = judge_instance(result, off, "oracle", solver=CFG)
        assert outcome.executed and not outcome.solution_correct
        made += 1

    assert time.monotonic() - start < 300.0


# --- timeout containment ---------------------------------------------------


def test_timeout_status_lands_within_wall_clock_bound():
    model = (
        "int: n = 26;\n"
        "array[1..n] of var 0..1: x;\n"
        "constraint sum(i in 1..n)(x[i]) * 2 - sum(i in 1..n)(x[i] * i) = 999;\n"
        "solve satisfy;\n"
    )
    start = time.monotonic()
    result = solve(model, "", SolverConfig(time_limit=2.0))
    wall = time.monotonic() - start
    assert result.status is Status.TIMEOUT
    assert wall <= 7.0


# --- scripted editor session over HTTP ------------------------------------


class _ChatFactory:
    def __init__(self):
        self.credentials = []
        self.transports = []

    def __call__(self, credential):
        self.credentials.append(credential)
        transport = MockTransport(lambda _p: "try a smaller bound")
        self.transports.append(transport)
        return transport


def test_editor_loop_end_to_end_over_http(tmp_path):
    root = tmp_path / "corpus"
    corpus = new_corpus(root)
    corpus.save(
        ProblemInstance(
            input=ProblemInput(
                description="Pick the smallest x of at least 1, bounded by 4.",
                parameters=(),
                output=(OutputSpec("chosen value", "x", ()),),
                metadata=Metadata(
                    title="Smallest pick",
                    identifier="mini_001",
                    domain="toys",
                    objective="minimize",
                ),
            ),
            data_text="",
            ground_truth_model="var 0..4: x;\nconstraint x >= 1;\nsolve minimize x;\n",
            expected_output=ExpectedOutput(objective_value=1, variable_values={"x": 1}),
        )
    )
    factory = _ChatFactory()
    client = TestClient(create_app(root, transport_factory=factory))

    assert [r["id"] for r in client.get("/problems").json()] == ["mini_001"]

    body = client.get("/problems/mini_001").json()
    body["input"]["description"] = "Pick the smallest eligible x."
    body["input"]["verified"] = True
    assert client.put("/problems/mini_001", json=body).status_code == 200
    saved = client.get("/problems/mini_001").json()
    assert saved["input"]["description"] == "Pick the smallest eligible x."
    assert saved["input"]["verified"] is True

    run = client.post(
        "/problems/mini_001/execute", json={"solver": "gecode", "timeout": 5}
    ).json()
    assert run["verdict"] == "match"
    assert run["executed"] is True

    # chat refuses without a credential, and no transport is ever built
    sid = client.post("/sessions", json={"instance_id": "mini_001"}).json()["session_id"]
    assert client.post(f"/sessions/{sid}/chat", json={"message": "hi"}).status_code == 401
    assert factory.credentials == []

    sid = client.post(
        "/sessions", json={"credential": "sk-accept-1", "instance_id": "mini_001"}
    ).json()["session_id"]
    reply = client.post(f"/sessions/{sid}/chat", json={"message": "why minimize?"})
    assert reply.status_code == 200
    assert reply.json()["reply"] == "try a smaller bound"
    prompt = factory.transports[0].prompts[0]
    assert "Pick the smallest eligible x." in prompt
    assert prompt.rstrip().endswith("User: why minimize?")
