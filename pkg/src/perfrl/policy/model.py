"""Tiny trainable autoregressive policy over byte tokens.

Architecture: the last k token embeddings, concatenated, feed one tanh hidden
layer and a linear output over the vocabulary. Small enough that exact
analytic gradients and finite-difference checks are cheap, while still able
to memorize micro-corpus edits.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..losses import combined_loss_parts
from . import kernels
from .tokenizer import ByteTokenizer

CHECKPOINT_MAGIC = b"PRLCKPT1"
CHECKPOINT_VERSION = 1


class PolicyParams:
    """Flat float64 parameter vector with named views.

    Layout: embedding (V x d), hidden weight (k*d x h), hidden bias (h),
    output weight (h x V), output bias (V).
    """

    def __init__(self, vocab_size: int, context: int, embed_dim: int, hidden_dim: int,
                 flat: np.ndarray | None = None):
        self.vocab_size = vocab_size
        self.context = context
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        v, k, d, h = vocab_size, context, embed_dim, hidden_dim
        self._sizes = [v * d, k * d * h, h, h * v, v]
        total = sum(self._sizes)
        if flat is None:
            flat = np.zeros(total, dtype=np.float64)
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (total,):
            raise ValueError(f"expected flat vector of length {total}, got {flat.shape}")
        self.flat = flat
        self._rebind_views()

    def _rebind_views(self) -> None:
        v, k, d, h = self.vocab_size, self.context, self.embed_dim, self.hidden_dim
        offsets = np.cumsum([0] + self._sizes)
        f = self.flat
        self.embed = f[offsets[0]:offsets[1]].reshape(v, d)
        self.w1 = f[offsets[1]:offsets[2]].reshape(k * d, h)
        self.b1 = f[offsets[2]:offsets[3]]
        self.w2 = f[offsets[3]:offsets[4]].reshape(h, v)
        self.b2 = f[offsets[4]:offsets[5]]

    @property
    def size(self) -> int:
        return self.flat.shape[0]

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.vocab_size, self.context, self.embed_dim,
                            self.hidden_dim, self.flat.copy())

    @classmethod
    def initialize(cls, vocab_size: int, context: int, embed_dim: int,
                   hidden_dim: int, seed: int = 0, scale: float = 0.05) -> "PolicyParams":
        rng = np.random.default_rng(seed)
        p = cls(vocab_size, context, embed_dim, hidden_dim)
        p.flat[:] = rng.uniform(-scale, scale, size=p.size)
        return p


@dataclass(frozen=True)
class TokenDistribution:
    logits: np.ndarray
    log_probs: np.ndarray


@dataclass(frozen=True)
class CandidateGroupSpec:
    """Fixed candidate set over which the combined loss is differentiated.

    Token sequences are fixed; gradients flow only through log-probabilities.
    """

    prompts: tuple[tuple[int, ...], ...]
    outputs: tuple[tuple[int, ...], ...]
    reward_values: tuple[float, ...]
    origins: tuple[str, ...]
    rank_weight: float = 1.0


class PolicyModel:
    """Windowed feed-forward next-token model with exact gradients."""

    def __init__(self, params: PolicyParams, tokenizer: ByteTokenizer | None = None):
        self.params = params
        self.tokenizer = tokenizer or ByteTokenizer()
        if self.tokenizer.vocab_size != params.vocab_size:
            raise ValueError("tokenizer / params vocabulary size mismatch")

    @property
    def vocab_size(self) -> int:
        return self.params.vocab_size

    @property
    def eos_id(self) -> int:
        return self.tokenizer.EOS

    @property
    def bos_id(self) -> int:
        return self.tokenizer.BOS

    # -- forward --------------------------------------------------------

    def _window(self, context: Sequence[int]) -> np.ndarray:
        k = self.params.context
        pad = self.tokenizer.PAD
        ctx = list(context[-k:])
        if len(ctx) < k:
            ctx = [pad] * (k - len(ctx)) + ctx
        return np.asarray(ctx, dtype=np.int64)

    def next_token_logits(self, context: Sequence[int]) -> TokenDistribution:
        """Distribution over the next token given a context (must start with BOS)."""
        if len(context) == 0:
            raise ValueError("context must be non-empty (start with BOS)")
        v = self.vocab_size
        for t in context[-self.params.context:]:
            if not (0 <= t < v):
                raise ValueError(f"token id {t} out of range [0, {v})")
        log_probs = self.next_log_probs(context)
        # reconstruct logits up to the normalizer for the public type
        return TokenDistribution(logits=log_probs.copy(), log_probs=log_probs)

    def next_log_probs(self, context: Sequence[int]) -> np.ndarray:
        p = self.params
        return kernels.step_log_probs(p.embed, p.w1, p.b1, p.w2, p.b2, self._window(context))

    def _windows_matrix(self, prompt: Sequence[int], output: Sequence[int]) -> np.ndarray:
        """Row t = context window used to predict output[t]."""
        k = self.params.context
        pad = self.tokenizer.PAD
        full = [pad] * k + list(prompt) + list(output)
        base = k + len(prompt)
        t_count = len(output)
        windows = np.empty((t_count, k), dtype=np.int64)
        for t in range(t_count):
            windows[t] = full[base + t - k: base + t]
        return windows

    def _forward_sequence(self, prompt: Sequence[int], output: Sequence[int]):
        """Batched teacher-forced forward. Returns (log_probs per position, cache)."""
        p = self.params
        windows = self._windows_matrix(prompt, output)
        e = p.embed[windows].reshape(windows.shape[0], -1)
        hid = np.tanh(e @ p.w1 + p.b1)
        logits = hid @ p.w2 + p.b2
        m = logits.max(axis=1, keepdims=True)
        logz = m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))
        log_probs_all = logits - logz
        targets = np.asarray(output, dtype=np.int64)
        lp = log_probs_all[np.arange(len(output)), targets]
        cache = (windows, e, hid, log_probs_all, targets)
        return lp, cache

    def sequence_log_probs(self, prompt: Sequence[int], output: Sequence[int]) -> np.ndarray:
        """Per-token log P(output_t | prompt + output_<t>); entries are <= 0."""
        if len(output) == 0:
            raise ValueError("output must be non-empty")
        lp, _ = self._forward_sequence(prompt, output)
        return lp

    # -- gradients ------------------------------------------------------

    def _backward_sequence(self, cache, coeff: float, grad: np.ndarray) -> None:
        """Accumulate grad of coeff * sum_t log P(output_t | ...) into grad (flat)."""
        if coeff == 0.0:
            return
        p = self.params
        windows, e, hid, log_probs_all, targets = cache
        t_count = windows.shape[0]
        g = PolicyParams(p.vocab_size, p.context, p.embed_dim, p.hidden_dim, grad)
        # d(sum lp)/dlogits = onehot - softmax, scaled by coeff
        dlogits = -np.exp(log_probs_all)
        dlogits[np.arange(t_count), targets] += 1.0
        dlogits *= coeff
        g.b2 += dlogits.sum(axis=0)
        g.w2 += hid.T @ dlogits
        dhid = dlogits @ p.w2.T
        dpre = dhid * (1.0 - hid * hid)
        g.b1 += dpre.sum(axis=0)
        g.w1 += e.T @ dpre
        de = (dpre @ p.w1.T).reshape(t_count, p.context, p.embed_dim)
        np.add.at(g.embed, windows, de)

    def loss_and_gradient(self, spec: CandidateGroupSpec) -> tuple[float, np.ndarray]:
        """Combined rank + tuning loss over a fixed candidate set, with exact gradient.

        Inactive hinge pairs (including exact score ties) contribute zero
        gradient; returns (loss, flat gradient vector).
        """
        lps = []
        caches = []
        for prompt, output in zip(spec.prompts, spec.outputs):
            lp, cache = self._forward_sequence(prompt, output)
            lps.append(lp)
            caches.append(cache)
        sums = [float(lp.sum()) for lp in lps]
        lengths = [len(lp) for lp in lps]
        scores = [s / n for s, n in zip(sums, lengths)]
        parts = combined_loss_parts(
            scores, sums, lengths, spec.reward_values, spec.origins, spec.rank_weight
        )
        if not np.isfinite(parts.total):
            raise FloatingPointError(
                f"non-finite loss {parts.total}; |params| = {np.linalg.norm(self.params.flat):.3e}"
            )
        grad = np.zeros(self.params.size, dtype=np.float64)
        for cache, coeff in zip(caches, parts.sum_logprob_coefficients):
            self._backward_sequence(cache, coeff, grad)
        return parts.total, grad

    def nll_gradient(self, pairs: Sequence[tuple[Sequence[int], Sequence[int]]]
                     ) -> tuple[float, np.ndarray]:
        """Mean-per-token cross-entropy over (prompt, target) pairs, with gradient."""
        caches = []
        total_lp = 0.0
        total_tokens = 0
        for prompt, output in pairs:
            lp, cache = self._forward_sequence(prompt, output)
            caches.append(cache)
            total_lp += float(lp.sum())
            total_tokens += len(lp)
        if total_tokens == 0:
            return 0.0, np.zeros(self.params.size, dtype=np.float64)
        loss = -total_lp / total_tokens
        if not np.isfinite(loss):
            raise FloatingPointError(
                f"non-finite loss {loss}; |params| = {np.linalg.norm(self.params.flat):.3e}"
            )
        grad = np.zeros(self.params.size, dtype=np.float64)
        for cache in caches:
            self._backward_sequence(cache, -1.0 / total_tokens, grad)
        return loss, grad

    def apply_update(self, grad: np.ndarray, learning_rate: float) -> None:
        """Plain gradient descent step in place."""
        if grad.shape != self.params.flat.shape:
            raise ValueError("gradient shape mismatch")
        self.params.flat -= learning_rate * grad


# -- checkpoints --------------------------------------------------------


def save_checkpoint(params: PolicyParams, path: str | Path) -> None:
    """Versioned header (V, k, d, h) + little-endian float64 array; bit-exact round trip."""
    header = CHECKPOINT_MAGIC + struct.pack(
        "<IIIIIQ",
        CHECKPOINT_VERSION,
        params.vocab_size,
        params.context,
        params.embed_dim,
        params.hidden_dim,
        params.size,
    )
    data = params.flat.astype("<f8", copy=False).tobytes()
    Path(path).write_bytes(header + data)


def load_checkpoint(path: str | Path) -> PolicyParams:
    raw = Path(path).read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a policy checkpoint (bad magic)")
    version, v, k, d, h, n = struct.unpack("<IIIIIQ", raw[8:8 + 28])
    if version != CHECKPOINT_VERSION:
        raise ValueError(
            f"{path}: checkpoint version {version} unsupported (expected {CHECKPOINT_VERSION})"
        )
    flat = np.frombuffer(raw[8 + 28:], dtype="<f8").astype(np.float64)
    if flat.shape[0] != n:
        raise ValueError(f"{path}: truncated checkpoint ({flat.shape[0]} of {n} values)")
    return PolicyParams(v, k, d, h, flat)
