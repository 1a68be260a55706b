"""Candidate decoding: beam search, temperature + top-k random sampling, and
assembly of the per-task 4-candidate training set (two random draws, one
greedy decode, the dataset target).

Decoders only need a model exposing next_log_probs(context), vocab_size and
eos_id, so toy models plug in for testing.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .corpus import Prompt, TaskInstance
from .reward import RewardTier
from .sandbox import ExecutionOutcome


@dataclass(frozen=True)
class SamplingConfig:
    beam_width: int = 4
    temperature: float = 1.0
    top_k: int = 50
    max_len: int = 512
    seed: int = 0

    def __post_init__(self) -> None:
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")


@dataclass
class Candidate:
    tokens: list[int]
    origin: str  # random | greedy | target
    per_token_log_probs: np.ndarray
    score: float | None = None
    reward: RewardTier | None = None
    outcome: ExecutionOutcome | None = None

    @property
    def cumulative_log_prob(self) -> float:
        return float(self.per_token_log_probs.sum())


def candidate_rng(seed: int, task_id: str, sample_index: int, step: int = 0) -> np.random.Generator:
    """Independent, reproducible sub-stream keyed by (seed, task, sample, step)."""
    key = zlib.crc32(task_id.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([seed, step, key, sample_index]))


def tempered_topk_distribution(
    log_probs: np.ndarray, temperature: float, top_k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Token ids kept by top-k (ties to the lower id) and their renormalized
    probabilities after dividing log-probs by the temperature."""
    v = log_probs.shape[0]
    k = min(top_k, v)
    order = np.lexsort((np.arange(v), -log_probs))  # descending, lower id wins ties
    keep = order[:k]
    scaled = log_probs[keep] / temperature
    scaled -= scaled.max()
    probs = np.exp(scaled)
    probs /= probs.sum()
    return keep, probs


def sample_token(
    log_probs: np.ndarray, temperature: float, top_k: int, rng: np.random.Generator
) -> int:
    keep, probs = tempered_topk_distribution(log_probs, temperature, top_k)
    return int(rng.choice(keep, p=probs))


def random_sample(
    model, prompt_tokens: list[int], config: SamplingConfig, rng: np.random.Generator
) -> Candidate:
    """Draw one candidate with temperature + top-k sampling.

    Recorded per-token log-probs are the model's un-tempered log-probs of the
    drawn tokens (the score is defined on the true distribution, not the
    tempered proposal). Stops at EOS or max_len.
    """
    tokens: list[int] = []
    lps: list[float] = []
    context = list(prompt_tokens)
    for _ in range(config.max_len):
        log_probs = model.next_log_probs(context)
        tok = sample_token(log_probs, config.temperature, config.top_k, rng)
        tokens.append(tok)
        lps.append(float(log_probs[tok]))
        context.append(tok)
        if tok == model.eos_id:
            break
    return Candidate(
        tokens=tokens, origin="random", per_token_log_probs=np.asarray(lps, dtype=np.float64)
    )


@dataclass
class _Beam:
    tokens: list[int]
    lps: list[float]
    cum: float
    finished: bool


def beam_search(model, prompt_tokens: list[int], config: SamplingConfig) -> list[Candidate]:
    """Standard beam search over cumulative log-prob, no length penalty.

    A beam that emits EOS is frozen and keeps competing at its final score.
    Deterministic: ties broken toward the lower token id. Returns beam_width
    candidates sorted by descending cumulative log-prob.
    """
    b = config.beam_width
    beams = [_Beam(tokens=[], lps=[], cum=0.0, finished=False)]
    for _ in range(config.max_len):
        if all(beam.finished for beam in beams):
            break
        # (score, parent index, token id or -1 for frozen beams)
        expansions: list[tuple[float, int, int]] = []
        step_lps: dict[int, np.ndarray] = {}
        for bi, beam in enumerate(beams):
            if beam.finished:
                expansions.append((beam.cum, bi, -1))
                continue
            lp = model.next_log_probs(prompt_tokens + beam.tokens)
            step_lps[bi] = lp
            for tok in range(model.vocab_size):
                expansions.append((beam.cum + float(lp[tok]), bi, tok))
        expansions.sort(key=lambda x: (-x[0], x[1], x[2]))
        new_beams = []
        for score, bi, tok in expansions[:b]:
            parent = beams[bi]
            if tok < 0:
                new_beams.append(parent)
                continue
            lp = float(step_lps[bi][tok])
            new_beams.append(
                _Beam(
                    tokens=parent.tokens + [tok],
                    lps=parent.lps + [lp],
                    cum=score,
                    finished=(tok == model.eos_id),
                )
            )
        beams = new_beams
    beams.sort(key=lambda beam: -beam.cum)
    return [
        Candidate(
            tokens=beam.tokens,
            origin="greedy",
            per_token_log_probs=np.asarray(beam.lps, dtype=np.float64),
        )
        for beam in beams
    ]


def prompt_tokens_for(model, prompt: Prompt) -> list[int]:
    return [model.bos_id] + model.tokenizer.encode(prompt.rendered)


def target_candidate(model, prompt_ids: list[int], fast_source: str) -> Candidate:
    """The dataset's fast program, teacher-force scored under the current model."""
    tokens = model.tokenizer.encode(fast_source) + [model.eos_id]
    lps = model.sequence_log_probs(prompt_ids, tokens)
    return Candidate(tokens=tokens, origin="target", per_token_log_probs=np.asarray(lps))


def assemble_training_candidates(
    model,
    task: TaskInstance,
    prompt: Prompt,
    config: SamplingConfig,
    step: int = 0,
) -> list[Candidate]:
    """[random, random, greedy, target] for one task.

    The two random draws use independent rng sub-streams; greedy is the top
    output of a width-1 beam; the target injects the dataset's fast program
    so at least one passing candidate exists whenever it is executable.
    """
    prompt_ids = prompt_tokens_for(model, prompt)
    rand1 = random_sample(model, prompt_ids, config, candidate_rng(config.seed, task.id, 0, step))
    rand2 = random_sample(model, prompt_ids, config, candidate_rng(config.seed, task.id, 1, step))
    greedy_cfg = SamplingConfig(
        beam_width=1,
        temperature=config.temperature,
        top_k=config.top_k,
        max_len=config.max_len,
        seed=config.seed,
    )
    greedy = beam_search(model, prompt_ids, greedy_cfg)[0]
    target = target_candidate(model, prompt_ids, task.fast_source)
    return [rand1, rand2, greedy, target]
