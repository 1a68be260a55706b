"""Training: supervised fine-tuning pass and the execution-feedback RL loop.

Each RL step generates 4 candidates per task (2 random, 1 greedy, the dataset
target), executes them for tiered rewards, then runs a fixed number of
optimization epochs over the cached candidates: scores are recomputed under
the current parameters, the combined rank + tuning loss is differentiated,
and one update is applied per task in task order.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import losses
from .corpus import DEFAULT_INSTRUCTION, TaskInstance, build_prompt, filter_executable
from .policy import CandidateGroupSpec, PolicyModel, load_checkpoint, save_checkpoint
from .reward import RewardConfig, assign_reward
from .sampling import Candidate, SamplingConfig, assemble_training_candidates, prompt_tokens_for
from .sandbox import Sandbox

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    ft_learning_rate: float = 5e-5
    ft_batch_size: int = 32
    rl_learning_rate: float = 2e-5
    rl_steps: int = 8
    epochs_per_step: int = 3
    rank_weight: float = 1.0
    reward: RewardConfig = field(default_factory=RewardConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    timeout: float = 5.0
    train_repeats: int = 1
    instruction: str = DEFAULT_INSTRUCTION

    def __post_init__(self) -> None:
        if self.ft_learning_rate <= 0 or self.rl_learning_rate <= 0:
            raise ValueError("learning rates must be positive")
        if self.rl_steps < 0:
            raise ValueError("rl_steps must be >= 0")
        if self.rank_weight < 0:
            raise ValueError("rank_weight must be >= 0")


@dataclass(frozen=True)
class StepStats:
    step: int
    mean_loss: float
    compilation_rate: float
    pass_rate: float
    optimization_rate: float
    wall_time: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__)

    @classmethod
    def from_json(cls, line: str) -> "StepStats":
        return cls(**json.loads(line))


# -- scalar candidate ops (shared loss arithmetic lives in losses.py) ----


def score(candidate: Candidate) -> float:
    """Mean per-token log-prob; stored on the candidate."""
    candidate.score = losses.mean_score(list(candidate.per_token_log_probs))
    return candidate.score


def rank_loss(candidates: Sequence[Candidate]) -> float:
    return losses.rank_loss(
        [c.score for c in candidates], [c.reward.value for c in candidates]
    )


def select_best(candidates: Sequence[Candidate]) -> Candidate:
    idx = losses.select_best_index(
        [c.reward.value for c in candidates],
        [c.origin for c in candidates],
        [c.score for c in candidates],
    )
    return candidates[idx]


def tuning_loss(candidates: Sequence[Candidate]) -> float:
    best = select_best(candidates)
    return -float(best.per_token_log_probs.sum())


def combined_loss(candidates: Sequence[Candidate], a: float) -> float:
    return a * rank_loss(candidates) + tuning_loss(candidates)


# -- supervised fine-tuning ---------------------------------------------


def fine_tune(
    model: PolicyModel, tasks: Sequence[TaskInstance], config: TrainConfig
) -> list[float]:
    """One pass over (prompt, fast target) pairs; one update per batch.

    Batch loss is the mean negative log-likelihood per target token. Returns
    the per-batch loss trace.
    """
    batch_losses: list[float] = []
    pairs = []
    for task in tasks:
        prompt = build_prompt(task, config.instruction)
        prompt_ids = prompt_tokens_for(model, prompt)
        target_ids = model.tokenizer.encode(task.fast_source) + [model.eos_id]
        pairs.append((prompt_ids, target_ids))
    for start in range(0, len(pairs), config.ft_batch_size):
        batch = pairs[start:start + config.ft_batch_size]
        loss, grad = model.nll_gradient(batch)
        model.apply_update(grad, config.ft_learning_rate)
        batch_losses.append(loss)
    return batch_losses


# -- RL loop ------------------------------------------------------------


def _decode_candidate(model: PolicyModel, candidate: Candidate) -> str:
    return model.tokenizer.decode(candidate.tokens)


def measure_baselines(
    tasks: Sequence[TaskInstance], harness: Sandbox, config: TrainConfig
) -> dict[str, float]:
    """Mean runtime of each task's slow program under this harness, this session."""
    baselines = {}
    for task in tasks:
        outcome = harness.evaluate_program(
            task.slow_source, task.tests, config.timeout, config.train_repeats
        )
        if outcome.kind != "passed":
            raise RuntimeError(
                f"task {task.id!r}: slow program no longer passes its tests "
                f"({outcome.kind}); was the training split filtered?"
            )
        baselines[task.id] = outcome.mean_runtime
    return baselines


def rl_step(
    model: PolicyModel,
    tasks: Sequence[TaskInstance],
    harness: Sandbox,
    config: TrainConfig,
    baselines: dict[str, float],
    target_cache: dict[str, tuple],
    step_index: int,
) -> tuple[StepStats, list[dict]]:
    """One RL step: generate, execute, reward, then epochs_per_step update passes.

    The target candidate's execution outcome is cached across steps (it depends
    on tokens, not parameters). Returns the step stats and audit records.
    """
    started = time.perf_counter()
    if not tasks:
        return StepStats(step_index, 0.0, 0.0, 0.0, 0.0, 0.0), []
    groups: list[tuple[TaskInstance, list[int], list[Candidate]]] = []
    audit: list[dict] = []

    for task in tasks:
        prompt = build_prompt(task, config.instruction)
        cands = assemble_training_candidates(model, task, prompt, config.sampling, step=step_index)
        prompt_ids = prompt_tokens_for(model, prompt)
        for ci, cand in enumerate(cands):
            if cand.origin == "target":
                if task.id not in target_cache:
                    outcome = harness.evaluate_program(
                        task.fast_source, task.tests, config.timeout, config.train_repeats
                    )
                    target_cache[task.id] = (
                        outcome,
                        assign_reward(outcome, baselines[task.id], config.reward),
                    )
                cand.outcome, cand.reward = target_cache[task.id]
            else:
                cand.outcome = harness.evaluate_program(
                    _decode_candidate(model, cand), task.tests, config.timeout,
                    config.train_repeats,
                )
                cand.reward = assign_reward(cand.outcome, baselines[task.id], config.reward)
            score(cand)
            audit.append(
                {
                    "step": step_index,
                    "task_id": task.id,
                    "candidate": ci,
                    "origin": cand.origin,
                    "reward": cand.reward.tier,
                    "runtime": cand.outcome.mean_runtime,
                }
            )
        groups.append((task, prompt_ids, cands))

    all_cands = [c for _, _, cands in groups for c in cands]
    n = len(all_cands)
    compilation = sum(c.outcome.kind != "syntax_error" for c in all_cands) / n
    passed = sum(c.outcome.kind == "passed" for c in all_cands) / n
    optimized = sum(c.reward.tier == "R4" for c in all_cands) / n

    losses_seen: list[float] = []
    for _ in range(config.epochs_per_step):
        for task, prompt_ids, cands in groups:
            spec = CandidateGroupSpec(
                prompts=tuple(tuple(prompt_ids) for _ in cands),
                outputs=tuple(tuple(c.tokens) for c in cands),
                reward_values=tuple(c.reward.value for c in cands),
                origins=tuple(c.origin for c in cands),
                rank_weight=config.rank_weight,
            )
            loss, grad = model.loss_and_gradient(spec)
            model.apply_update(grad, config.rl_learning_rate)
            losses_seen.append(loss)

    stats = StepStats(
        step=step_index,
        mean_loss=float(np.mean(losses_seen)) if losses_seen else 0.0,
        compilation_rate=compilation,
        pass_rate=passed,
        optimization_rate=optimized,
        wall_time=time.perf_counter() - started,
    )
    return stats, audit


def train(
    model: PolicyModel,
    tasks: Sequence[TaskInstance],
    harness: Sandbox,
    config: TrainConfig,
    run_dir: str | Path,
    resume: bool = False,
    stop_after_step: int | None = None,
) -> tuple[PolicyModel, list[StepStats]]:
    """Fine-tune once, then rl_steps RL steps, checkpointing after every step.

    Only the training split is executability-filtered. With resume=True the
    latest step checkpoint is reloaded and remaining steps regenerate
    bit-identically (candidate rng streams are keyed by step, not by session).
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    stats_path = run_dir / "stats.jsonl"
    audit_path = run_dir / "audit.jsonl"

    tasks = filter_executable(list(tasks), harness, config.timeout, repeats=1)
    log.info("training on %d executable tasks", len(tasks))

    history: list[StepStats] = []
    start_step = 1
    if resume:
        done = sorted(run_dir.glob("step_*.ckpt"))
        if done:
            last = done[-1]
            start_step = int(last.stem.split("_")[1]) + 1
            model.params = load_checkpoint(last)
            if stats_path.exists():
                with stats_path.open() as fh:
                    history = [StepStats.from_json(line) for line in fh if line.strip()]
                history = [s for s in history if s.step < start_step]
        elif (run_dir / "ft.ckpt").exists():
            model.params = load_checkpoint(run_dir / "ft.ckpt")
        else:
            resume = False
    if not resume:
        ft_losses = fine_tune(model, tasks, config)
        save_checkpoint(model.params, run_dir / "ft.ckpt")
        (run_dir / "ft_losses.json").write_text(json.dumps(ft_losses))
        with stats_path.open("w"):
            pass
        with audit_path.open("w"):
            pass

    if not tasks or config.rl_steps == 0:
        return model, history

    baselines = measure_baselines(tasks, harness, config)
    target_cache: dict[str, tuple] = {}
    for step_index in range(start_step, config.rl_steps + 1):
        stats, audit = rl_step(
            model, tasks, harness, config, baselines, target_cache, step_index
        )
        history.append(stats)
        save_checkpoint(model.params, run_dir / f"step_{step_index:03d}.ckpt")
        with stats_path.open("a") as fh:
            fh.write(stats.to_json() + "\n")
        with audit_path.open("a") as fh:
            for record in audit:
                fh.write(json.dumps(record) + "\n")
        log.info(
            "step %d: loss %.4f compile %.2f pass %.2f optimize %.2f (%.1fs)",
            stats.step, stats.mean_loss, stats.compilation_rate,
            stats.pass_rate, stats.optimization_rate, stats.wall_time,
        )
        if stop_after_step is not None and step_index >= stop_after_step:
            break
    return model, history
