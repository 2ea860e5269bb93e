import json

import pytest
from hypothesis import given, settings, strategies as st

from zincbench.corpus import (
    Corpus,
    ExpectedOutput,
    InvalidObjective,
    IoError,
    MalformedInput,
    Metadata,
    MissingGroundTruth,
    MissingInput,
    OutputSpec,
    ParamSpec,
    ProblemInput,
    ProblemInstance,
    cross_validate,
    load_problem,
    new_corpus,
    save_problem,
)
from zincbench.dzn import DznParseError


def make_instance(
    objective="minimize",
    params=(ParamSpec("number of items", "M", ()),),
    outputs=(OutputSpec("chosen amounts", "x", ("M",)),),
    data_text="M = 4;\n",
    model="int: M;\nvar 0..M: x;\nsolve minimize x;\n",
    expected=ExpectedOutput(objective_value=0, variable_values={"x": 0}),
    verified=False,
    extra_meta=None,
    identifier="toy_001",
):
    meta = Metadata(
        title="Toy",
        identifier=identifier,
        domain="testing",
        objective=objective,
        keywords=("toy",),
        extra=extra_meta or {},
    )
    inp = ProblemInput(
        description="Pick x no larger than M.",
        parameters=tuple(params),
        output=tuple(outputs),
        metadata=meta,
    )
    return ProblemInstance(
        input=inp,
        data_text=data_text,
        ground_truth_model=model,
        expected_output=expected,
        verified=verified,
    )


def write_instance_files(root, *, objective="maximize", model=True, data=True, output=True):
    root.mkdir(parents=True, exist_ok=True)
    (root / "input.json").write_text(
        json.dumps(
            {
                "description": "desc",
                "parameters": [{"definition": "a scalar", "symbol": "M", "shape": []}],
                "output": [{"definition": "a var", "symbol": "x", "shape": []}],
                "metadata": {
                    "title": "t",
                    "identifier": "inst",
                    "domain": "d",
                    "objective": objective,
                    "keywords": [],
                },
            }
        )
    )
    if data:
        (root / "data.dzn").write_text("M = 2;\n")
    if model:
        (root / "model.mzn").write_text("int: M;\nvar 0..M: x;\nsolve maximize x;\n")
    if output:
        (root / "output.json").write_text(json.dumps({"objective": 2, "variables": {"x": 2}}))


def test_load_field_passthrough(tmp_path):
    write_instance_files(tmp_path)
    inst = load_problem(tmp_path)
    assert inst.objective == "maximize"
    assert len(inst.input.parameters) == 1
    assert inst.input.parameters[0].is_scalar
    assert inst.expected_output.objective_value == 2
    assert inst.verified is False


def test_invalid_objective(tmp_path):
    write_instance_files(tmp_path, objective="optimize")
    with pytest.raises(InvalidObjective):
        load_problem(tmp_path)


def test_missing_data_file_means_empty_text(tmp_path):
    write_instance_files(tmp_path, data=False)
    inst = load_problem(tmp_path)
    assert inst.data_text == ""


def test_missing_input_json(tmp_path):
    with pytest.raises(MissingInput):
        load_problem(tmp_path)


def test_bad_json_is_malformed(tmp_path):
    tmp_path.joinpath("input.json").write_text("{not json")
    with pytest.raises(MalformedInput):
        load_problem(tmp_path)


def test_unknown_top_level_key_rejected(tmp_path):
    write_instance_files(tmp_path)
    raw = json.loads((tmp_path / "input.json").read_text())
    raw["verifed"] = True
    (tmp_path / "input.json").write_text(json.dumps(raw))
    with pytest.raises(MalformedInput) as err:
        load_problem(tmp_path)
    assert "verifed" in str(err.value)


def test_unknown_metadata_keys_survive_round_trip(tmp_path):
    inst = make_instance(extra_meta={"source": "books", "year": 1999})
    save_problem(inst, tmp_path)
    raw = json.loads((tmp_path / "input.json").read_text())
    assert raw["metadata"]["source"] == "books"
    again = load_problem(tmp_path)
    assert again.input.metadata.extra == {"source": "books", "year": 1999}


def test_satisfy_without_model_distinct_error(tmp_path):
    write_instance_files(tmp_path, objective="satisfy", model=False, output=False)
    with pytest.raises(MissingGroundTruth):
        load_problem(tmp_path)


def test_optimization_output_requires_objective(tmp_path):
    write_instance_files(tmp_path)
    (tmp_path / "output.json").write_text(json.dumps({"variables": {"x": 2}}))
    with pytest.raises(MalformedInput):
        load_problem(tmp_path)


def test_satisfy_output_requires_variables(tmp_path):
    write_instance_files(tmp_path, objective="satisfy")
    (tmp_path / "output.json").write_text(json.dumps({"variables": {}}))
    with pytest.raises(MalformedInput):
        load_problem(tmp_path)


def test_duplicate_parameter_symbols_rejected_before_write(tmp_path):
    with pytest.raises(ValueError):
        make_instance(params=(ParamSpec("a", "M", ()), ParamSpec("b", "M", ())))
    target = tmp_path / "inst"
    assert not target.exists()


def test_round_trip_identity(tmp_path):
    inst = make_instance(verified=True)
    save_problem(inst, tmp_path)
    again = load_problem(tmp_path)
    assert again == inst
    assert (tmp_path / "model.mzn").read_text() == inst.ground_truth_model
    assert (tmp_path / "data.dzn").read_text() == inst.data_text


def test_round_trip_without_optional_files(tmp_path):
    inst = make_instance(model=None, expected=None, data_text="")
    save_problem(inst, tmp_path)
    assert not (tmp_path / "model.mzn").exists()
    assert not (tmp_path / "output.json").exists()
    assert load_problem(tmp_path) == inst


# --- cross_validate --------------------------------------------------------

def test_cross_validate_consistent():
    inst = make_instance(data_text="M = 4;\n")
    assert cross_validate(inst) == []


def test_cross_validate_each_kind_fires_once():
    inst = make_instance(
        params=(
            ParamSpec("scalar", "M", ()),
            ParamSpec("list", "Prices", ("M",)),
        ),
        data_text="M = [1, 2];\nStray = 7;\n",
    )
    findings = cross_validate(inst)
    kinds = sorted((f.kind, f.symbol) for f in findings)
    assert kinds == [
        ("missing-symbol", "Prices"),
        ("shape-mismatch", "M"),
        ("unused-binding", "Stray"),
    ]
    mismatch = next(f for f in findings if f.kind == "shape-mismatch")
    assert "expected scalar" in mismatch.detail and "1-D" in mismatch.detail


def test_cross_validate_empty_data_is_clean():
    inst = make_instance(data_text="", params=(ParamSpec("a", "M", ()),))
    assert cross_validate(inst) == []


def test_cross_validate_propagates_dzn_errors():
    inst = make_instance(data_text="M = ;")
    with pytest.raises(DznParseError):
        cross_validate(inst)


def test_cross_validate_order_independent():
    params = (ParamSpec("a", "A", ()), ParamSpec("b", "B", ("A",)))
    inst1 = make_instance(params=params, data_text="C = 1;\n")
    inst2 = make_instance(params=params[::-1], data_text="C = 1;\n")
    assert sorted((f.kind, f.symbol) for f in cross_validate(inst1)) == sorted(
        (f.kind, f.symbol) for f in cross_validate(inst2)
    )


# --- corpus index ----------------------------------------------------------

def test_corpus_open_save_load(tmp_path):
    corpus = new_corpus(tmp_path)
    inst = make_instance(identifier="alpha")
    corpus.save(inst)
    reopened = Corpus.open(tmp_path)
    assert reopened.ids() == ["alpha"]
    assert reopened.load("alpha") == inst


def test_corpus_index_mismatch(tmp_path):
    corpus = new_corpus(tmp_path)
    corpus.save(make_instance(identifier="alpha"))
    index = json.loads((tmp_path / "index.json").read_text())
    index["beta"] = index.pop("alpha")
    (tmp_path / "index.json").write_text(json.dumps(index))
    with pytest.raises(MalformedInput):
        Corpus.open(tmp_path).load("beta")


def test_corpus_missing_index(tmp_path):
    with pytest.raises(MissingInput):
        Corpus.open(tmp_path)


def test_corpus_unknown_id(tmp_path):
    corpus = new_corpus(tmp_path)
    with pytest.raises(KeyError):
        corpus.load("nope")


# --- generated round-trip property -----------------------------------------

ident_st = st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True)
text_st = st.text(
    alphabet=st.characters(min_codepoint=32, max_codepoint=0x24F), max_size=40
)


@st.composite
def instances(draw):
    n_params = draw(st.integers(0, 3))
    symbols = draw(
        st.lists(ident_st, min_size=n_params + 1, max_size=n_params + 1, unique=True)
    )
    params = tuple(
        ParamSpec(draw(text_st), s, draw(st.lists(st.sampled_from(["M", "N"]), max_size=2).map(tuple)))
        for s in symbols[:n_params]
    )
    outputs = (OutputSpec(draw(text_st), symbols[n_params], ()),)
    objective = draw(st.sampled_from(["minimize", "maximize", "satisfy"]))
    meta = Metadata(
        title=draw(text_st),
        identifier=draw(ident_st),
        domain=draw(text_st),
        objective=objective,
        keywords=tuple(draw(st.lists(ident_st, max_size=3))),
        subdomain=draw(st.none() | text_st),
        extra=draw(st.dictionaries(st.sampled_from(["src", "note"]), text_st, max_size=2)),
    )
    expected = None
    if objective != "satisfy" and draw(st.booleans()):
        expected = ExpectedOutput(
            objective_value=draw(st.integers(-100, 100)),
            variable_values={symbols[n_params]: draw(st.integers(0, 9))},
        )
    return ProblemInstance(
        input=ProblemInput(draw(text_st), params, outputs, meta),
        data_text=draw(st.sampled_from(["", "M = 1;\n", "% only a comment\n"])),
        ground_truth_model="solve satisfy;\n",
        expected_output=expected,
        verified=draw(st.booleans()),
    )


@settings(max_examples=60, deadline=None)
@given(instances())
def test_save_load_round_trip_property(tmp_path_factory, inst):
    root = tmp_path_factory.mktemp("inst")
    save_problem(inst, root)
    assert load_problem(root) == inst
