"""Inference-time evaluation: decode top-2 of 4 beams per task, execute with
3-run mean timing, keep only candidates that strictly improve on the input
program's runtime, and aggregate %OPT / SP / RTR plus round-level
compilation, pass, and optimization rates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import TaskInstance, build_prompt, DEFAULT_INSTRUCTION
from .policy import PolicyModel
from .sampling import SamplingConfig, beam_search, prompt_tokens_for
from .sandbox import Sandbox

# a candidate must beat baseline by this fraction of the baseline runtime to
# count as improved; 3-run means on real hardware still jitter
DEFAULT_NOISE_FLOOR = 0.02


def speedup(old: float, new: float) -> float:
    """old/new runtime ratio."""
    if old <= 0 or new <= 0:
        raise ValueError("runtimes must be positive")
    return old / new


def runtime_reduction(old: float, new: float) -> float:
    """(old - new)/old * 100."""
    if old <= 0:
        raise ValueError("old runtime must be positive")
    if new < 0:
        raise ValueError("new runtime must be non-negative")
    return (old - new) / old * 100.0


@dataclass(frozen=True)
class CandidateEvalRecord:
    kind: str  # syntax_error | failed | passed
    runtime: float | None
    improved: bool


@dataclass(frozen=True)
class TaskEvalResult:
    task_id: str
    baseline_runtime: float | None  # None when the slow program is not executable
    candidates: tuple[CandidateEvalRecord, ...]
    optimized: bool
    best_new_runtime: float | None

    def to_json(self) -> str:
        return json.dumps(
            {
                "task_id": self.task_id,
                "baseline_runtime": self.baseline_runtime,
                "optimized": self.optimized,
                "best_new_runtime": self.best_new_runtime,
                "candidates": [c.__dict__ for c in self.candidates],
            }
        )

    @classmethod
    def from_json(cls, line: str) -> "TaskEvalResult":
        obj = json.loads(line)
        return cls(
            task_id=obj["task_id"],
            baseline_runtime=obj["baseline_runtime"],
            optimized=obj["optimized"],
            best_new_runtime=obj["best_new_runtime"],
            candidates=tuple(CandidateEvalRecord(**c) for c in obj["candidates"]),
        )


@dataclass(frozen=True)
class MetricsReport:
    n_tasks: int
    percent_opt: float
    speedup_mean: float
    rtr_mean: float
    compilation_rate: float
    pass_rate: float
    optimization_rate: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__)

    def render_table(self) -> str:
        rows = [
            ("tasks", f"{self.n_tasks}"),
            ("%OPT", f"{self.percent_opt:.2f}"),
            ("SP (mean over optimized)", f"{self.speedup_mean:.3f}"),
            ("RTR (mean over optimized)", f"{self.rtr_mean:.2f}"),
            ("compilation rate", f"{self.compilation_rate:.3f}"),
            ("pass rate", f"{self.pass_rate:.3f}"),
            ("optimization rate", f"{self.optimization_rate:.3f}"),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def aggregate(results: Sequence[TaskEvalResult]) -> MetricsReport:
    """Fold per-task results into a MetricsReport; pure, replayable from records."""
    n = len(results)
    if n == 0:
        return MetricsReport(0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    optimized = [r for r in results if r.optimized]
    sp = [speedup(r.baseline_runtime, r.best_new_runtime) for r in optimized]
    rtr = [runtime_reduction(r.baseline_runtime, r.best_new_runtime) for r in optimized]
    compilation = sum(any(c.kind != "syntax_error" for c in r.candidates) for r in results) / n
    passed = sum(any(c.kind == "passed" for c in r.candidates) for r in results) / n
    opt_rate = len(optimized) / n
    return MetricsReport(
        n_tasks=n,
        percent_opt=100.0 * opt_rate,
        speedup_mean=sum(sp) / len(sp) if sp else 0.0,
        rtr_mean=sum(rtr) / len(rtr) if rtr else 0.0,
        compilation_rate=compilation,
        pass_rate=passed,
        optimization_rate=opt_rate,
    )


def evaluate_task(
    model: PolicyModel,
    task: TaskInstance,
    harness: Sandbox,
    config: SamplingConfig,
    timeout: float = 5.0,
    repeats: int = 3,
    instruction: str = DEFAULT_INSTRUCTION,
    noise_floor: float = DEFAULT_NOISE_FLOOR,
    top_n: int = 2,
) -> TaskEvalResult:
    """Beam-decode width 4, keep the top-2 by cumulative log-prob, execute both.

    A candidate counts as improved only when it passes all tests and its mean
    runtime beats the baseline by more than the noise floor.
    """
    baseline_outcome = harness.evaluate_program(task.slow_source, task.tests, timeout, repeats)
    baseline = baseline_outcome.mean_runtime if baseline_outcome.kind == "passed" else None

    prompt = build_prompt(task, instruction)
    beams = beam_search(model, prompt_tokens_for(model, prompt), config)[:top_n]
    records = []
    for cand in beams:
        source = model.tokenizer.decode(cand.tokens)
        outcome = harness.evaluate_program(source, task.tests, timeout, repeats)
        improved = (
            baseline is not None
            and outcome.kind == "passed"
            and outcome.mean_runtime < baseline * (1.0 - noise_floor)
        )
        records.append(
            CandidateEvalRecord(
                kind=outcome.kind, runtime=outcome.mean_runtime, improved=improved
            )
        )
    survivors = [r.runtime for r in records if r.improved]
    return TaskEvalResult(
        task_id=task.id,
        baseline_runtime=baseline,
        candidates=tuple(records),
        optimized=bool(survivors),
        best_new_runtime=min(survivors) if survivors else None,
    )


def evaluate_model(
    model: PolicyModel,
    tasks: Sequence[TaskInstance],
    harness: Sandbox,
    config: SamplingConfig,
    timeout: float = 5.0,
    repeats: int = 3,
    instruction: str = DEFAULT_INSTRUCTION,
    noise_floor: float = DEFAULT_NOISE_FLOOR,
) -> tuple[MetricsReport, list[TaskEvalResult]]:
    """Evaluate on all tasks, including non-executable inputs (counted, never optimized)."""
    results = [
        evaluate_task(model, task, harness, config, timeout, repeats, instruction, noise_floor)
        for task in tasks
    ]
    return aggregate(results), results


def validation_rates(
    model: PolicyModel,
    tasks: Sequence[TaskInstance],
    harness: Sandbox,
    config: SamplingConfig,
    **kwargs,
) -> tuple[float, float, float]:
    """Round-level (compilation, pass, optimization) rates; a round is one task's top-2 decode."""
    report, _ = evaluate_model(model, tasks, harness, config, **kwargs)
    return report.compilation_rate, report.pass_rate, report.optimization_rate


def save_results(results: Sequence[TaskEvalResult], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in results:
            fh.write(r.to_json() + "\n")


def load_results(path: str | Path) -> list[TaskEvalResult]:
    with Path(path).open("r", encoding="utf-8") as fh:
        return [TaskEvalResult.from_json(line) for line in fh if line.strip()]
