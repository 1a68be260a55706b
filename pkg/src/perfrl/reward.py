"""Tiered reward for an executed candidate relative to the input program's runtime.

Tiers: R1 syntax failure, R2 runtime failure / timeout / wrong output,
R3 all tests pass, R4 all tests pass with strictly improved runtime.
Only the ordering of the tier values matters for the rank loss.
"""

from __future__ import annotations

from dataclasses import dataclass

from .sandbox import ExecutionOutcome

TIER_NAMES = ("R1", "R2", "R3", "R4")


@dataclass(frozen=True)
class RewardTier:
    tier: str
    value: float


@dataclass(frozen=True)
class RewardConfig:
    r1: float = 0.0
    r2: float = 1.0
    r3: float = 1.3
    r4: float = 2.0

    def __post_init__(self) -> None:
        if not (self.r1 < self.r2 < self.r3 < self.r4):
            raise ValueError(
                f"reward values must be strictly increasing, got "
                f"{self.r1}, {self.r2}, {self.r3}, {self.r4}"
            )

    def tier(self, name: str) -> RewardTier:
        values = {"R1": self.r1, "R2": self.r2, "R3": self.r3, "R4": self.r4}
        return RewardTier(tier=name, value=values[name])


def assign_reward(
    outcome: ExecutionOutcome,
    baseline_runtime: float,
    config: RewardConfig = RewardConfig(),
) -> RewardTier:
    """Classify an outcome into a tier. A runtime tie with baseline is R3, not R4."""
    if baseline_runtime <= 0:
        raise ValueError(f"baseline_runtime must be positive, got {baseline_runtime}")
    if outcome.kind == "syntax_error":
        return config.tier("R1")
    if outcome.kind == "failed":
        return config.tier("R2")
    if outcome.kind == "passed":
        assert outcome.mean_runtime is not None
        if outcome.mean_runtime < baseline_runtime:
            return config.tier("R4")
        return config.tier("R3")
    raise ValueError(f"unknown outcome kind {outcome.kind!r}")
