import json

import pytest
from click.testing import CliRunner

from cli import cli


@pytest.fixture
def run():
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(cli, list(args))

    return invoke


def lines(result):
    return result.output.splitlines()


def records(result):
    return [json.loads(line) for line in lines(result) if line.startswith("{")]


def test_trace_to_a_terminal(run):
    result = run("trace", "xtcl", "S K I e")
    assert result.exit_code == 0
    assert lines(result) == [
        "S K I e",
        "→ S'(K) I e",
        "→ S''(K, I) e",
        "→ (K e)(I e)",
        "→ K'(e)(I e)",
        "→ e ✓",
    ]


def test_trace_to_a_function(run):
    result = run("trace", "xcl", "S I I K")
    assert lines(result)[-1] == "→ K'(I K) →t"
    assert len(lines(result)) == 6


def test_trace_with_a_stage_budget(run):
    result = run("trace", "xcl", "S I I K", "--stage", "2")
    assert result.exit_code == 0
    assert lines(result)[:3] == ["S I I K", "→ S'(I) I K", "→ S''(I, I) K"]
    assert "stage budget exhausted" in result.output


def test_trace_out_of_fuel(run):
    result = run("trace", "xcl", "S I I (S I I)", "--fuel", "2")
    assert result.exit_code == 0
    assert "fuel exhausted after 2 step(s)" in result.output


def test_trace_marks_branches(run):
    assert lines(run("trace", "xptcl", "e (+) I e")) == ["e (+) I e", "→[1/2] e ✓"]
    assert lines(run("trace", "xnccl", "I K (+) K")) == ["I K (+) K", "→{1 of 2} I K", "→ K →t"]


def test_trace_json(run):
    result = run("trace", "xtcl", "I e", "--format", "json")
    (doc,) = records(result)
    assert doc["language"] == "xtcl"
    assert [e["kind"] for e in doc["entries"]] == ["reduct", "terminal"]


def test_ill_typed_terms_exit_with_usage_status(run):
    result = run("trace", "xtcl", "S I I e")
    assert result.exit_code == 2
    assert "IllTyped" in result.output


def test_unknown_language_is_a_usage_error(run):
    assert run("trace", "ski", "I").exit_code == 2


def test_denote_json_and_unravel(run):
    assert lines(run("denote", "xtcl", "e", "--depth", "0")) == ['{"tag":"terminal"}']
    assert lines(run("denote", "xtcl", "I e", "--depth", "2")) == [
        '{"tag":"reduct","branches":[{"tree":{"tag":"terminal"}}]}'
    ]
    assert lines(run("denote", "xtcl", "I e", "--format", "unravel")) == ["(1, ✓)"]
    assert lines(run("denote", "xtcl", "e", "--format", "unravel")) == ["(0, ✓)"]


def test_denote_unravel_needs_determinism(run):
    assert run("denote", "xptcl", "e (+) e", "--format", "unravel").exit_code == 2


def test_denote_dot_to_a_file(run, tmp_path):
    target = tmp_path / "tree.dot"
    result = run("denote", "xtcl", "I e", "--depth", "2", "--format", "dot", "-o", str(target))
    assert result.exit_code == 0
    assert target.read_text(encoding="utf-8").startswith("digraph denotation {")


def test_bisim_exit_codes(run):
    distinguished = run("bisim", "xtcl", "e", "I e", "--depth", "1")
    assert distinguished.exit_code == 1
    assert lines(distinguished) == ["distinguished: root tags ✓ vs →"]
    related = run("bisim", "xtcl", "I e", "K'(e) e", "--depth", "3", "--probe-size", "3")
    assert related.exit_code == 0
    assert lines(related) == ["related at depth 3"]


def test_bisim_json(run):
    (doc,) = records(run("bisim", "xtcl", "e", "I e", "--depth", "1", "--format", "json"))
    assert doc["verdict"] == "distinguished"
    assert doc["witness_path"] == []


def test_partition(run):
    result = run("partition", "xtcl", "e", "I e", "K'(e) e", "--depth", "3", "--probe-size", "3")
    assert result.exit_code == 0
    (doc,) = records(result)
    assert doc["blocks"] == [["e"], ["I e", "K'(e) e"]]


def test_stage(run):
    result = run("stage", "xcl", "1")
    assert lines(result)[0] == "6 elements"
    assert len(lines(result)) == 7
    assert run("stage", "xtcl", "0").exit_code == 2


def test_rules(run):
    result = run("rules", "xcl")
    assert lines(result)[0] == "law xcl"
    assert lines(result)[-1] == "# relatively flat"


def test_suites_listing(run):
    output = run("suites").output
    assert "choice: count, depth, probe_size, probe_limit, max_size" in output
    assert "plus-biased (xptcl)" in output


def test_suite_records_and_exit_code(run):
    passed = run("suite", "pentagon", "--lang", "xtcl", "--mutation", "par-forgets-right")
    assert passed.exit_code == 0
    assert [r["verdict"] for r in records(passed)] == ["skipped"]
    tower = run("suite", "tower", "--lang", "xcl", "--mutation", "unguarded-arguments", "--param", "bound=2")
    assert tower.exit_code == 0
    assert records(tower)[0]["details"]["sizes"] == {"0": 2, "1": 6}


def test_suite_param_errors(run):
    assert run("suite", "tower", "--param", "bound").exit_code == 2
    assert run("suite", "tower", "--param", "bound=x").exit_code == 2
    assert run("suite", "tower", "--lang", "xcl", "--param", "width=2").exit_code == 2
