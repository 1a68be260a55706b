"""Ranking and tuning loss arithmetic over a group of scored, rewarded candidates.

Kept free of model code so that both the trainer (scalar losses over
Candidate objects) and the policy gradient (chain-rule coefficients) share
one definition of the pairwise hinge, the best-candidate selection, and the
combined objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

# lower number = learned from first when rewards tie
ORIGIN_PRIORITY = {"random": 0, "greedy": 1, "target": 2}


def mean_score(per_token_log_probs: Sequence[float]) -> float:
    """Sequence score: sum of per-token log-probs divided by token count."""
    n = len(per_token_log_probs)
    if n == 0:
        raise ValueError("score of an empty sequence is undefined")
    return float(sum(per_token_log_probs)) / n


def rank_loss(scores: Sequence[float], reward_values: Sequence[float]) -> float:
    """Sum over ordered pairs with reward(a) < reward(b) of max(0, score(a) - score(b))."""
    total = 0.0
    n = len(scores)
    for a in range(n):
        for b in range(n):
            if reward_values[a] < reward_values[b]:
                total += max(0.0, scores[a] - scores[b])
    return total


def select_best_index(
    reward_values: Sequence[float],
    origins: Sequence[str],
    scores: Sequence[float],
) -> int:
    """Index of the candidate to tune toward.

    Highest reward wins; ties go to origin priority random > greedy > target;
    remaining ties to the higher score, then the lower index.
    """
    n = len(reward_values)
    if n == 0:
        raise ValueError("empty candidate group")
    best = 0
    for i in range(1, n):
        if _beats(reward_values, origins, scores, i, best):
            best = i
    return best


def _beats(rv, origins, scores, i, j) -> bool:
    if rv[i] != rv[j]:
        return rv[i] > rv[j]
    pi, pj = ORIGIN_PRIORITY[origins[i]], ORIGIN_PRIORITY[origins[j]]
    if pi != pj:
        return pi < pj
    return scores[i] > scores[j]


def tuning_loss(sum_log_probs: Sequence[float], best_index: int) -> float:
    """Negative sum of per-token log-probs of the selected best candidate."""
    return -float(sum_log_probs[best_index])


@dataclass(frozen=True)
class CombinedLossParts:
    rank: float
    tuning: float
    total: float
    best_index: int
    # d(total)/d(sum of log-probs of candidate c); hinge pairs at exactly
    # zero margin count as inactive (subgradient 0)
    sum_logprob_coefficients: tuple[float, ...]


def combined_loss_parts(
    scores: Sequence[float],
    sum_log_probs: Sequence[float],
    lengths: Sequence[int],
    reward_values: Sequence[float],
    origins: Sequence[str],
    rank_weight: float,
) -> CombinedLossParts:
    """Value and exact chain-rule coefficients of rank_weight * L_rank + L_tuning.

    Both loss terms are linear in each candidate's sum of log-probs once the
    active hinge pairs and the best candidate are fixed, so the gradient
    w.r.t. model parameters is sum_c coeff_c * grad(sum_log_probs_c).
    """
    n = len(scores)
    coeff = [0.0] * n
    l_rank = 0.0
    for a in range(n):
        for b in range(n):
            if reward_values[a] < reward_values[b]:
                diff = scores[a] - scores[b]
                l_rank += max(0.0, diff)
                if diff > 0.0:
                    coeff[a] += rank_weight / lengths[a]
                    coeff[b] -= rank_weight / lengths[b]
    best = select_best_index(reward_values, origins, scores)
    l_tuning = -float(sum_log_probs[best])
    coeff[best] -= 1.0
    return CombinedLossParts(
        rank=l_rank,
        tuning=l_tuning,
        total=rank_weight * l_rank + l_tuning,
        best_index=best,
        sum_logprob_coefficients=tuple(coeff),
    )
