"""Task corpus: loading, validation, prompt construction, executability filtering.

A corpus is a UTF-8 file with one JSON record per line:

    {"id": ..., "slow_source": ..., "fast_source": ...,
     "tests": [{"input": ..., "expected_output": ...}, ...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .sandbox import Sandbox

DEFAULT_INSTRUCTION = "Improve the execution performance of the following program:"


class CorpusError(ValueError):
    """Malformed or inconsistent corpus file."""


@dataclass(frozen=True)
class UnitTest:
    """One stdin/stdout check. expected_output may be the empty string."""

    input: str
    expected_output: str


@dataclass
class TaskInstance:
    id: str
    slow_source: str
    fast_source: str
    tests: list[UnitTest]
    executable: bool = False

    def __post_init__(self) -> None:
        if not self.tests:
            raise CorpusError(f"task {self.id!r}: tests must be non-empty")


@dataclass(frozen=True)
class Prompt:
    instruction: str
    source: str

    @property
    def rendered(self) -> str:
        return self.instruction + "\n" + self.source


def build_prompt(task: TaskInstance, instruction: str = DEFAULT_INSTRUCTION) -> Prompt:
    """Render the model prompt: instruction, newline, slow source. Pure and deterministic."""
    if not instruction:
        raise ValueError("instruction must be non-empty")
    return Prompt(instruction=instruction, source=task.slow_source)


def _parse_record(obj: dict, lineno: int) -> TaskInstance:
    try:
        tid = obj["id"]
        slow = obj["slow_source"]
        fast = obj["fast_source"]
        raw_tests = obj["tests"]
    except KeyError as exc:
        raise CorpusError(f"line {lineno}: missing field {exc.args[0]!r}") from None
    if not isinstance(tid, str) or not tid:
        raise CorpusError(f"line {lineno}: id must be a non-empty string")
    if not isinstance(slow, str) or not slow:
        raise CorpusError(f"line {lineno}: slow_source must be a non-empty string")
    if not isinstance(fast, str) or not fast:
        raise CorpusError(f"line {lineno}: fast_source must be a non-empty string")
    if not isinstance(raw_tests, list) or not raw_tests:
        raise CorpusError(f"line {lineno}: tests must be a non-empty list")
    tests = []
    for t in raw_tests:
        if not isinstance(t, dict) or "input" not in t or "expected_output" not in t:
            raise CorpusError(f"line {lineno}: each test needs 'input' and 'expected_output'")
        tests.append(UnitTest(input=str(t["input"]), expected_output=str(t["expected_output"])))
    return TaskInstance(id=tid, slow_source=slow, fast_source=fast, tests=tests)


def load_tasks(path: str | Path) -> list[TaskInstance]:
    """Load a line-delimited corpus, preserving file order.

    Raises CorpusError naming the offending line for malformed records and
    for duplicate ids. An empty file yields an empty list.
    """
    path = Path(path)
    tasks: list[TaskInstance] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON: {exc}") from None
            task = _parse_record(obj, lineno)
            if task.id in seen:
                raise CorpusError(f"line {lineno}: duplicate id {task.id!r}")
            seen.add(task.id)
            tasks.append(task)
    return tasks


def save_tasks(tasks: list[TaskInstance], path: str | Path) -> None:
    """Write tasks one JSON record per line; inverse of load_tasks."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for task in tasks:
            record = {
                "id": task.id,
                "slow_source": task.slow_source,
                "fast_source": task.fast_source,
                "tests": [
                    {"input": t.input, "expected_output": t.expected_output}
                    for t in task.tests
                ],
            }
            fh.write(json.dumps(record) + "\n")


def filter_executable(
    tasks: list[TaskInstance],
    harness: "Sandbox",
    timeout: float = 5.0,
    repeats: int = 1,
) -> list[TaskInstance]:
    """Keep only tasks whose slow program passes its own tests within the timeout.

    Survivors get executable=True; input order is preserved. Idempotent.
    """
    kept = []
    for task in tasks:
        outcome = harness.evaluate_program(task.slow_source, task.tests, timeout, repeats)
        if outcome.kind == "passed":
            task.executable = True
            kept.append(task)
    return kept
