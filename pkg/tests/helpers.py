"""Shared fixtures-in-code: toy decoder models and the synthetic micro-corpus."""

from __future__ import annotations

import numpy as np

from perfrl.corpus import TaskInstance, UnitTest

SLOW_TEMPLATE = (
    "x=int(input())\n"
    "print(x*2)\n"
    "s=0\n"
    "for i in range(2500000):\n"
    "    s+=i\n"
)
FAST_TEMPLATE = "x=int(input())\nprint(x*2)\n"


def make_micro_corpus(n: int = 20) -> list[TaskInstance]:
    """n doubling tasks sharing one program family: the slow variant carries a
    ~0.2 s busy-wait after the answer is printed; tests vary per task."""
    tasks = []
    for i in range(n):
        v = 3 + i
        tasks.append(
            TaskInstance(
                id=f"task-{i:03d}",
                slow_source=SLOW_TEMPLATE,
                fast_source=FAST_TEMPLATE,
                tests=[UnitTest(input=f"{v}\n", expected_output=f"{v * 2}")],
            )
        )
    return tasks


class HashModel:
    """Deterministic toy decoder: log-probs are a seeded random function of the
    exact context. Satisfies the decoder protocol used by the samplers."""

    def __init__(self, vocab_size: int, seed: int, eos_id: int | None = None):
        self.vocab_size = vocab_size
        self.eos_id = eos_id if eos_id is not None else vocab_size - 1
        self.bos_id = 0
        self.seed = seed

    def next_log_probs(self, context) -> np.ndarray:
        key = [self.seed] + [int(t) for t in context]
        rng = np.random.default_rng(np.random.SeedSequence(key))
        logits = rng.normal(size=self.vocab_size)
        m = logits.max()
        return logits - (m + np.log(np.exp(logits - m).sum()))


class FixedModel:
    """Toy decoder with one constant next-token distribution."""

    def __init__(self, probs, eos_id: int | None = None):
        probs = np.asarray(probs, dtype=np.float64)
        self.vocab_size = probs.shape[0]
        self.eos_id = eos_id if eos_id is not None else self.vocab_size - 1
        self.bos_id = 0
        self._log_probs = np.log(probs / probs.sum())

    def next_log_probs(self, context) -> np.ndarray:
        return self._log_probs.copy()


class ScriptedModel:
    """Policy stand-in that deterministically emits one fixed program.

    Position within the script is read off the context length, so beam search
    reproduces the script as its (only credible) top candidate.
    """

    def __init__(self, text: str, prompt_len: int, tokenizer=None):
        from perfrl.policy import ByteTokenizer

        self.tokenizer = tokenizer or ByteTokenizer()
        self.vocab_size = self.tokenizer.vocab_size
        self.eos_id = self.tokenizer.EOS
        self.bos_id = self.tokenizer.BOS
        self.script = self.tokenizer.encode(text) + [self.eos_id]
        self.prompt_len = prompt_len

    def next_log_probs(self, context) -> np.ndarray:
        pos = len(context) - self.prompt_len
        lp = np.full(self.vocab_size, -50.0)
        tok = self.script[pos] if 0 <= pos < len(self.script) else self.eos_id
        lp[tok] = 0.0
        return lp - np.log(np.exp(lp).sum())


def exhaustive_best(model, prompt, max_len: int):
    """Brute-force argmax over all sequences up to max_len, EOS only terminal.

    Returns (tokens, cumulative log-prob). Oracle for beam-search optimality.
    """
    best_tokens, best_score = None, -np.inf

    def walk(tokens, score):
        nonlocal best_tokens, best_score
        if tokens and tokens[-1] == model.eos_id or len(tokens) == max_len:
            if score > best_score:
                best_score, best_tokens = score, list(tokens)
            return
        lp = model.next_log_probs(prompt + tokens)
        for tok in range(model.vocab_size):
            walk(tokens + [tok], score + float(lp[tok]))

    walk([], 0.0)
    return best_tokens, best_score


def greedy_rollout(model, prompt, max_len: int):
    """Reference greedy decode: argmax each step, ties to the lower token id."""
    tokens, lps = [], []
    context = list(prompt)
    for _ in range(max_len):
        lp = model.next_log_probs(context)
        tok = int(np.argmax(lp))
        tokens.append(tok)
        lps.append(float(lp[tok]))
        context.append(tok)
        if tok == model.eos_id:
            break
    return tokens, lps
