"""Risk-driven selection from a Pareto set.

Four mission risks reshape three baseline objective coefficients, the
coefficients are renormalized to sum to one, and each Pareto member is
scored by the weighted sum of its per-objective ranks. The lowest score
wins; ranks use competition ranking (ties share a rank, the next rank is
skipped).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .costs import CostVector
from .errors import DegenerateRiskError, ValidationError

DEFAULT_BASELINES = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)


@dataclass(frozen=True)
class RiskState:
    """Mission risks, each in [0, 1]."""

    wind: float = 0.0
    communication: float = 0.0
    localization: float = 0.0
    battery: float = 0.0

    def __post_init__(self):
        for name in ("wind", "communication", "localization", "battery"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"risk {name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class VoteWeights:
    """Normalized coefficients on (time, safety, energy) ranks."""

    k_time: float
    k_safety: float
    k_energy: float
    baseline_time: float
    baseline_safety: float
    baseline_energy: float
    gamma: float

    def __post_init__(self):
        if min(self.k_time, self.k_safety, self.k_energy) < 0:
            raise ValidationError("vote weights must be >= 0")
        if abs(self.k_time + self.k_safety + self.k_energy - 1.0) > 1e-12:
            raise ValidationError("vote weights must sum to 1")


def adjust_coefficients(risks: RiskState, baselines: tuple = DEFAULT_BASELINES) -> VoteWeights:
    """Risk-adjusted, normalized objective coefficients.

    Wind, communication, and localization shift influence from time toward
    safety; battery pulls it back toward time and energy. Negative
    intermediate values are clamped to zero before normalization so a rank
    can lose all influence but never invert.
    """
    b_time, b_safety, b_energy = baselines
    if min(baselines) < 0 or abs(sum(baselines) - 1.0) > 1e-9:
        raise ValidationError("baselines must be >= 0 and sum to 1")
    shift = 0.5 * risks.wind + 0.25 * risks.communication + 0.25 * risks.localization - risks.battery
    u_safety = max(b_safety * (1.0 + shift), 0.0)
    u_time = max(b_time * (1.0 - shift), 0.0)
    u_energy = max(b_energy * (1.0 + 0.5 * risks.wind + 0.5 * risks.battery), 0.0)
    total = u_safety + u_time + u_energy
    if total <= 0.0:
        raise DegenerateRiskError("all objective weights vanished; cannot normalize")
    gamma = 1.0 / total
    return VoteWeights(
        k_time=gamma * u_time,
        k_safety=gamma * u_safety,
        k_energy=gamma * u_energy,
        baseline_time=b_time,
        baseline_safety=b_safety,
        baseline_energy=b_energy,
        gamma=gamma,
    )


def rank_objectives(front: Sequence[CostVector]) -> np.ndarray:
    """Per-objective competition ranks, shape (N, 3), 0 = best (lowest cost).

    Equal costs share a rank and the next rank is skipped, i.e. the rank is
    the number of strictly better competitors.
    """
    if not front:
        raise ValidationError("cannot rank an empty front")
    costs = np.array([cv.as_array() for cv in front])
    ranks = np.empty_like(costs, dtype=int)
    for col in range(costs.shape[1]):
        column = costs[:, col]
        ranks[:, col] = (column[None, :] < column[:, None]).sum(axis=1)
    return ranks


def vote(front: Sequence, weights: VoteWeights) -> int:
    """Index of the Pareto member with the lowest weighted rank sum.

    Ties break deterministically: lower safety cost, then lower time cost,
    then lower index.
    """
    if not front:
        raise ValidationError("cannot vote on an empty front")
    cost_vectors = [ind.costs if hasattr(ind, "costs") else ind for ind in front]
    ranks = rank_objectives(cost_vectors)
    k = np.array([weights.k_time, weights.k_safety, weights.k_energy])
    scores = ranks @ k
    safety = np.array([cv.safety for cv in cost_vectors])
    time = np.array([cv.time_s for cv in cost_vectors])
    order = np.lexsort((np.arange(len(front)), time, safety, scores))
    return int(order[0])
