"""Reward, loss, and advantage math as pure numeric functions.

Conventions: rewards are "larger is better"; ``grpo_objective`` returns the
objective to maximize (trainers negate). Nothing here touches a model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .parsing import ParsedResponse

DEFAULT_LAMBDA = 0.1
DEFAULT_ALPHA = 0.05
LENGTH_BONUS = 0.1


@dataclass(frozen=True)
class RewardBreakdown:
    format: float
    task: float
    total: float
    alpha: float
    lambda_: float


@dataclass(frozen=True)
class RolloutGroup:
    rewards: tuple[float, ...]
    group_id: str = ""

    def __post_init__(self) -> None:
        if len(self.rewards) < 1:
            raise ValueError("rollout group must contain at least one reward")
        object.__setattr__(self, "rewards", tuple(float(r) for r in self.rewards))


@dataclass(frozen=True)
class GrpoConfig:
    epsilon: float = 0.2
    beta: float = 0.04
    group_size: int = 8
    temperature: float = 0.7

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("clip radius epsilon must be positive")
        if self.beta < 0:
            raise ValueError("KL coefficient beta must be non-negative")


def format_reward(parsed: ParsedResponse) -> int:
    """1 iff the full think+answer schema is present exactly once, in order."""
    return 1 if parsed.schema_ok else 0


def discrete_reward(pred: str, gold: str) -> int:
    return 1 if pred == gold else 0


def mae(pred: Sequence[float], gold: Sequence[float]) -> float:
    if len(pred) != len(gold):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(gold)}")
    if len(gold) == 0:
        raise ValueError("sequences must be non-empty")
    return sum(abs(p - g) for p, g in zip(pred, gold)) / len(gold)


def sequence_reward(
    pred: Sequence[float],
    gold: Sequence[float],
    alpha: float = DEFAULT_ALPHA,
    scale: float | None = None,
) -> float:
    """exp(-alpha * MAE) plus the length bonus; 0 outright on a length mismatch.

    ``scale`` optionally divides the MAE before the decay (per-sample
    normalization across domains); off by default.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if scale is not None and scale <= 0:
        raise ValueError("scale must be positive")
    if len(pred) != len(gold):
        return 0.0
    err = mae(pred, gold)
    if scale is not None:
        err /= scale
    return math.exp(-alpha * err) + LENGTH_BONUS


def total_reward(
    format_r: float,
    task_r: float,
    lambda_: float = DEFAULT_LAMBDA,
    alpha: float = DEFAULT_ALPHA,
) -> RewardBreakdown:
    if not 0.0 <= lambda_ <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    total = lambda_ * format_r + (1.0 - lambda_) * task_r
    return RewardBreakdown(format=format_r, task=task_r, total=total, alpha=alpha, lambda_=lambda_)


def group_advantages(group: RolloutGroup) -> list[float]:
    """Per-trajectory advantage: reward minus the group's mean reward."""
    baseline = sum(group.rewards) / len(group.rewards)
    return [r - baseline for r in group.rewards]


def grpo_objective(
    policy_logprobs: Sequence[float],
    ref_logprobs: Sequence[float],
    advantages: Sequence[float],
    kl_estimates: Sequence[float],
    cfg: GrpoConfig,
) -> float:
    """Clipped-surrogate objective with a KL penalty, averaged over trajectories.

    Per trajectory: min(rho * A, clip(rho, 1-eps, 1+eps) * A) - beta * kl,
    where rho = exp(policy_logprob - ref_logprob).
    """
    n = len(policy_logprobs)
    if not (n == len(ref_logprobs) == len(advantages) == len(kl_estimates)):
        raise ValueError("all inputs must have equal length")
    if n == 0:
        raise ValueError("at least one trajectory required")
    total = 0.0
    for lp, ref_lp, adv, kl in zip(policy_logprobs, ref_logprobs, advantages, kl_estimates):
        if not all(math.isfinite(v) for v in (lp, ref_lp, adv, kl)):
            raise ValueError("non-finite input")
        rho = math.exp(lp - ref_lp)
        clipped = min(max(rho, 1.0 - cfg.epsilon), 1.0 + cfg.epsilon)
        total += min(rho * adv, clipped * adv) - cfg.beta * kl
    return total / n


def score_response(
    parsed: ParsedResponse,
    gold,
    lambda_: float = DEFAULT_LAMBDA,
    alpha: float = DEFAULT_ALPHA,
) -> RewardBreakdown:
    """Full reward for a parsed response against a gold ``AnswerValue``.

    An unextractable answer earns task reward 0; the format component is
    scored independently of correctness.
    """
    from .core import Choice, SequenceAnswer

    fmt = format_reward(parsed)
    task_r = 0.0
    if parsed.extracted is not None:
        if isinstance(gold, Choice) and isinstance(parsed.extracted, Choice):
            task_r = float(discrete_reward(parsed.extracted.letter, gold.letter))
        elif isinstance(gold, SequenceAnswer) and isinstance(parsed.extracted, SequenceAnswer):
            task_r = sequence_reward(parsed.extracted.values, gold.values, alpha)
    return total_reward(fmt, task_r, lambda_, alpha)


def sft_nll(target_logprobs: Sequence[Sequence[float]]) -> float:
    """Mean over samples of the negative sum of token log-probabilities."""
    if not target_logprobs:
        raise ValueError("at least one sample required")
    per_sample = []
    for i, logprobs in enumerate(target_logprobs):
        if not logprobs:
            raise ValueError(f"sample {i} has no token logprobs")
        per_sample.append(-sum(logprobs))
    return sum(per_sample) / len(per_sample)
