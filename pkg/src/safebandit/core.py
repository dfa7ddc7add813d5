"""Shared domain types: outcome models, epoch schedule, run traces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class OutcomeModel:
    """Deterministic map from (context, arm) to a mean reward in [0, 1].

    Subclasses implement ``values`` returning the full length-K vector of
    predictions for one context; outputs must already be clamped to [0, 1].
    """

    def values(self, x) -> np.ndarray:
        raise NotImplementedError

    def value(self, x, arm: int) -> float:
        return float(self.values(x)[arm])


class ConstantModel(OutcomeModel):
    """Context-independent model; one fixed value per arm."""

    def __init__(self, values):
        self._values = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)

    def values(self, x) -> np.ndarray:
        return self._values


def zero_model(K: int) -> ConstantModel:
    return ConstantModel(np.zeros(K))


class LinearPerArmModel(OutcomeModel):
    """Per-arm affine model: intercept[a] + slope[a] . x, clamped to [0, 1]."""

    def __init__(self, intercepts, slopes):
        self.intercepts = np.asarray(intercepts, dtype=float)
        self.slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
        if self.slopes.shape[0] != self.intercepts.shape[0]:
            raise ValueError("one slope row per arm required")

    def values(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.clip(self.intercepts + self.slopes @ x, 0.0, 1.0)


class TabularModel(OutcomeModel):
    """Model on a finite context set; contexts are integer indices."""

    def __init__(self, table):
        self.table = np.clip(np.asarray(table, dtype=float), 0.0, 1.0)

    def values(self, x) -> np.ndarray:
        return self.table[int(x)]


@dataclass(frozen=True)
class EpochSchedule:
    """Doubling epoch boundaries: tau_0 = 0, tau_m = tau_1 * 2^(m-1)."""

    tau1: int

    def __post_init__(self):
        if self.tau1 < 2:
            raise ValueError("tau1 must be >= 2")

    def tau(self, m: int) -> int:
        if m < 0:
            raise ValueError("epoch index must be >= 0")
        if m == 0:
            return 0
        return self.tau1 << (m - 1)

    def epoch_of(self, t: int) -> int:
        if t < 1:
            raise ValueError("round index must be >= 1")
        m = 1
        boundary = self.tau1
        while t > boundary:
            boundary <<= 1
            m += 1
        return m

    def epoch_size(self, m: int) -> int:
        return self.tau(m) - self.tau(m - 1)


def epoch_of(t: int, schedule: EpochSchedule) -> int:
    """Epoch containing round t: the least m with t <= tau_m."""
    return schedule.epoch_of(t)


def greedy_policy(f: OutcomeModel, x) -> int:
    """Arm maximizing f(x, .); ties broken by lowest index."""
    return int(np.argmax(f.values(x)))


@dataclass
class RunTrace:
    """Per-round record of one bandit run.

    All arrays share the same length (number of rounds actually played).
    ``reward_vectors`` holds the full realized reward vector so counterfactual
    regret against the optimal arm can be recomputed after the fact.
    """

    epoch: np.ndarray
    contexts: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    reward_vectors: np.ndarray
    optimal_arms: np.ndarray
    optimal_means: np.ndarray
    expected_regret: np.ndarray
    safe: np.ndarray
    m_hat: np.ndarray
    detection_round: int | None = None
    m_hat_final: int = 0

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def realized_regret(self) -> np.ndarray:
        idx = np.arange(len(self.actions))
        return self.reward_vectors[idx, self.optimal_arms] - self.rewards
