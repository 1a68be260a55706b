"""Isolated execution of candidate programs against stdin/stdout unit tests.

Programs run as child processes of a configurable interpreter (default: the
current Python), each evaluation in its own temp working directory. Timing
runs are serialized through a lock so two timed processes never compete for
the core.
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

GRACE_SECONDS = 0.5

INTERPRETER_ENV_VAR = "PERFRL_INTERPRETER"


class SandboxEnvironmentError(RuntimeError):
    """The harness itself is broken (missing interpreter, spawn failure)."""


@dataclass(frozen=True)
class SyntaxCheck:
    ok: bool
    message: str = ""


@dataclass(frozen=True)
class CaseResult:
    status: str  # ok | runtime_error | timeout | wrong_output
    stdout: str
    elapsed: float
    stderr: str = ""


@dataclass(frozen=True)
class ExecutionOutcome:
    kind: str  # syntax_error | failed | passed
    case_results: tuple[CaseResult, ...] = ()
    mean_runtime: float | None = None
    detail: str = ""


def normalize_output(text: str) -> str:
    """Per-line trailing-whitespace strip, then drop trailing blank lines."""
    lines = [line.rstrip() for line in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines)


def default_interpreter() -> list[str]:
    override = os.environ.get(INTERPRETER_ENV_VAR)
    if override:
        return shlex.split(override)
    return [sys.executable]


class Sandbox:
    """Runs program text against unit tests with timeouts and mean-runtime measurement."""

    def __init__(self, interpreter: list[str] | None = None, grace: float = GRACE_SECONDS):
        self.interpreter = list(interpreter) if interpreter else default_interpreter()
        self.grace = grace
        self._timing_lock = threading.Lock()
        if shutil.which(self.interpreter[0]) is None:
            raise SandboxEnvironmentError(
                f"interpreter not found: {self.interpreter[0]!r}"
            )

    # -- syntax ---------------------------------------------------------

    def check_syntax(self, source: str) -> SyntaxCheck:
        """Run the interpreter's parse/compile stage without executing the program."""
        with tempfile.TemporaryDirectory(prefix="perfrl-syn-") as tmp:
            path = Path(tmp) / "prog.py"
            path.write_text(source, encoding="utf-8", errors="surrogateescape")
            cmd = [self.interpreter[0], "-m", "py_compile", str(path)]
            try:
                proc = subprocess.run(
                    cmd, capture_output=True, timeout=30, cwd=tmp
                )
            except FileNotFoundError as exc:
                raise SandboxEnvironmentError(str(exc)) from exc
            except subprocess.TimeoutExpired as exc:
                raise SandboxEnvironmentError(f"syntax check hung: {exc}") from exc
        if proc.returncode == 0:
            return SyntaxCheck(ok=True)
        return SyntaxCheck(ok=False, message=proc.stderr.decode("utf-8", "replace"))

    # -- execution ------------------------------------------------------

    def _run_once(self, script: Path, test_input: str, timeout: float, cwd: str) -> CaseResult:
        cmd = [*self.interpreter, str(script)]
        start = time.perf_counter()
        try:
            proc = subprocess.run(
                cmd,
                input=test_input.encode("utf-8", "surrogateescape"),
                capture_output=True,
                timeout=timeout,
                cwd=cwd,
            )
        except FileNotFoundError as exc:
            raise SandboxEnvironmentError(str(exc)) from exc
        except subprocess.TimeoutExpired:
            elapsed = time.perf_counter() - start
            return CaseResult(status="timeout", stdout="", elapsed=max(elapsed, timeout))
        elapsed = time.perf_counter() - start
        stdout = proc.stdout.decode("utf-8", "replace")
        stderr = proc.stderr.decode("utf-8", "replace")
        if proc.returncode != 0:
            return CaseResult(status="runtime_error", stdout=stdout, elapsed=elapsed, stderr=stderr)
        return CaseResult(status="ok", stdout=stdout, elapsed=elapsed, stderr=stderr)

    def run_case(self, source: str, test, timeout: float) -> CaseResult:
        """Run one program against one test in a fresh temp dir."""
        with tempfile.TemporaryDirectory(prefix="perfrl-run-") as tmp:
            script = Path(tmp) / "prog.py"
            script.write_text(source, encoding="utf-8", errors="surrogateescape")
            result = self._run_once(script, test.input, timeout, tmp)
        return self._classify(result, test)

    @staticmethod
    def _classify(result: CaseResult, test) -> CaseResult:
        if result.status != "ok":
            return result
        if normalize_output(result.stdout) == normalize_output(test.expected_output):
            return result
        return CaseResult(
            status="wrong_output",
            stdout=result.stdout,
            elapsed=result.elapsed,
            stderr=result.stderr,
        )

    def evaluate_program(
        self,
        source: str,
        tests,
        timeout: float = 5.0,
        repeats: int = 3,
    ) -> ExecutionOutcome:
        """Syntax-check, then one correctness pass over all tests, then timed repeats.

        mean_runtime is the mean over repeats of the cumulative elapsed time
        across the full test suite. Timing runs hold the timing lock so they
        are never concurrent with other timed runs.
        """
        if repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not tests:
            raise ValueError("tests must be non-empty")
        syn = self.check_syntax(source)
        if not syn.ok:
            return ExecutionOutcome(kind="syntax_error", detail=syn.message)

        with tempfile.TemporaryDirectory(prefix="perfrl-eval-") as tmp:
            script = Path(tmp) / "prog.py"
            script.write_text(source, encoding="utf-8", errors="surrogateescape")

            # correctness pass: every test once, no timing lock needed
            case_results = []
            all_ok = True
            for test in tests:
                result = self._classify(self._run_once(script, test.input, timeout, tmp), test)
                case_results.append(result)
                if result.status != "ok":
                    all_ok = False
            if not all_ok:
                return ExecutionOutcome(kind="failed", case_results=tuple(case_results))

            # timing passes: full suite, repeats times, serialized
            totals = []
            with self._timing_lock:
                for _ in range(repeats):
                    total = 0.0
                    for test in tests:
                        result = self._classify(
                            self._run_once(script, test.input, timeout, tmp), test
                        )
                        if result.status != "ok":
                            # nondeterministic program flipped to failure mid-timing
                            case_results.append(result)
                            return ExecutionOutcome(
                                kind="failed", case_results=tuple(case_results)
                            )
                        total += result.elapsed
                    totals.append(total)
        return ExecutionOutcome(
            kind="passed",
            case_results=tuple(case_results),
            mean_runtime=sum(totals) / len(totals),
        )
