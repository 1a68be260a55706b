import time

import pytest

from perfrl.corpus import UnitTest
from perfrl.sandbox import Sandbox, SandboxEnvironmentError, normalize_output


def test_normalize_strips_trailing_whitespace_and_blank_lines():
    assert normalize_output("a  \nb\t\n\n\n") == "a\nb"
    assert normalize_output("7\n") == "7"
    assert normalize_output("") == ""


def test_check_syntax_accepts_valid(sandbox):
    assert sandbox.check_syntax("print(1)").ok


def test_check_syntax_rejects_invalid(sandbox):
    result = sandbox.check_syntax("def f(:")
    assert not result.ok
    assert result.message


def test_check_syntax_error_on_last_line_of_long_file(sandbox):
    # oracle: the interpreter's own compile stage, invoked directly
    source = "\n".join(f"x{i} = {i}" for i in range(1000)) + "\ndef broken(:\n"
    try:
        compile(source, "<fixture>", "exec")
        expected_ok = True
    except SyntaxError:
        expected_ok = False
    assert not expected_ok
    assert not sandbox.check_syntax(source).ok


def test_missing_interpreter_is_environment_error():
    with pytest.raises(SandboxEnvironmentError):
        Sandbox(interpreter=["/nonexistent/interp"])


def test_run_case_identity_program(sandbox):
    result = sandbox.run_case(
        "print(input())", UnitTest(input="7\n", expected_output="7"), timeout=5.0
    )
    assert result.status == "ok"


def test_run_case_runtime_error(sandbox):
    result = sandbox.run_case("print(1/0)", UnitTest(input="", expected_output=""), timeout=5.0)
    assert result.status == "runtime_error"


def test_run_case_wrong_output(sandbox):
    result = sandbox.run_case("print(2)", UnitTest(input="", expected_output="1"), timeout=5.0)
    assert result.status == "wrong_output"


def test_run_case_timeout_killed_within_grace(sandbox):
    start = time.perf_counter()
    result = sandbox.run_case(
        "while True:\n    pass\n", UnitTest(input="", expected_output=""), timeout=1.0
    )
    wall = time.perf_counter() - start
    assert result.status == "timeout"
    assert result.elapsed >= 1.0
    assert wall < 1.0 + 2.0  # kill promptly, generous CI margin


def test_evaluate_syntax_error_runs_no_cases(sandbox):
    outcome = sandbox.evaluate_program("def f(:", [UnitTest("", "")], timeout=5.0, repeats=1)
    assert outcome.kind == "syntax_error"
    assert outcome.case_results == ()


def test_evaluate_partial_failure(sandbox):
    source = "x=input()\nprint(int(x)*2)"
    tests = [
        UnitTest(input="1\n", expected_output="2"),
        UnitTest(input="2\n", expected_output="999"),  # designed to fail
        UnitTest(input="3\n", expected_output="6"),
    ]
    outcome = sandbox.evaluate_program(source, tests, timeout=5.0, repeats=1)
    assert outcome.kind == "failed"
    assert any(c.status == "wrong_output" for c in outcome.case_results)


def test_evaluate_passed_sets_mean_runtime(sandbox):
    outcome = sandbox.evaluate_program(
        "print(input())", [UnitTest("a\n", "a")], timeout=5.0, repeats=2
    )
    assert outcome.kind == "passed"
    assert outcome.mean_runtime is not None and outcome.mean_runtime > 0


def test_fast_beats_slow_fixture_majority(sandbox):
    slow = "s=0\nfor i in range(3000000):\n    s+=i\nprint(input())\n"
    fast = "print(input())\n"
    tests = [UnitTest("x\n", "x")]
    wins = 0
    for _ in range(3):
        so = sandbox.evaluate_program(slow, tests, timeout=10.0, repeats=3)
        fo = sandbox.evaluate_program(fast, tests, timeout=10.0, repeats=3)
        assert so.kind == fo.kind == "passed"
        if fo.mean_runtime < so.mean_runtime:
            wins += 1
    assert wins >= 2


def test_classification_deterministic_for_deterministic_programs(sandbox):
    source = "print(1/0)"
    kinds = {
        sandbox.evaluate_program(source, [UnitTest("", "")], timeout=5.0, repeats=1).kind
        for _ in range(3)
    }
    assert kinds == {"failed"}


def test_isolation_no_cross_run_file_pollution(sandbox):
    writer = "open('marker.txt','w').write('x')\nprint('done')\n"
    probe = "import os\nprint(os.path.exists('marker.txt'))\n"
    w = sandbox.evaluate_program(writer, [UnitTest("", "done")], timeout=5.0, repeats=1)
    assert w.kind == "passed"
    p = sandbox.evaluate_program(probe, [UnitTest("", "False")], timeout=5.0, repeats=1)
    assert p.kind == "passed"
