"""Synthetic bandit environments used by the simulations and analyses."""

from __future__ import annotations

import math

import numpy as np


class BanditEnvironment:
    """Stationary environment: a context distribution, true means, rewards.

    ``sample`` returns (context, mean vector, realized reward vector); the
    algorithm may only look at the chosen arm's reward, but traces record the
    full vector so realized counterfactual regret is well defined.
    """

    K: int
    dim: int
    optimal_value: float | None = None  # R(pi*) when known analytically

    def sample(self, rng: np.random.Generator):
        raise NotImplementedError

    def true_values(self, x) -> np.ndarray:
        raise NotImplementedError


def sample_round(env: BanditEnvironment, rng: np.random.Generator):
    """Draw one (context, reward vector) pair from the environment."""
    x, _, rewards = env.sample(rng)
    return x, rewards


class IntroExampleEnv(BanditEnvironment):
    """Two arms, x ~ Uniform[0,1]: a step arm paying 1{x > 0.5} and a flat
    arm paying 0.5, with independent N(0,1) noise added to each arm's reward.

    Arm 0 is the step arm, arm 1 the flat arm. The optimal policy picks the
    step arm iff x > 0.5, with expected reward 0.75.
    """

    K = 2
    dim = 1
    optimal_value = 0.75

    def sample(self, rng):
        x = rng.random()
        step = 1.0 if x > 0.5 else 0.0
        means = np.array([step, 0.5])
        rewards = means + rng.standard_normal(2)
        return np.array([x]), means, rewards

    def true_values(self, x) -> np.ndarray:
        v = float(np.atleast_1d(x)[0])
        return np.array([1.0 if v > 0.5 else 0.0, 0.5])


class LowerBoundEnv(BanditEnvironment):
    """Hard instance for context-blind kernels: X = (0, K) uniform, arm a
    pays alpha on its own unit interval (a, a+1] (0-indexed) and 0 elsewhere,
    with noiseless rewards and alpha = sqrt(K^2 B / (K-1)).
    """

    def __init__(self, K: int, B: float):
        if K < 2:
            raise ValueError("K must be >= 2")
        if not 0.0 <= B <= 1.0 / (2 * K):
            raise ValueError("B must lie in [0, 1/(2K)]")
        self.K = K
        self.dim = 1
        self.B = B
        self.alpha = math.sqrt(K * K * B / (K - 1))
        self.optimal_value = self.alpha

    @property
    def per_arm_variance(self) -> float:
        """Var_x f*(x, a), identical for every arm; equals B."""
        return self.alpha**2 * (self.K - 1) / self.K**2

    def true_values(self, x) -> np.ndarray:
        v = float(np.atleast_1d(x)[0])
        means = np.zeros(self.K)
        arm = min(max(math.ceil(v) - 1, 0), self.K - 1)
        means[arm] = self.alpha
        return means

    def sample(self, rng):
        v = rng.random() * self.K
        means = self.true_values(v)
        return np.array([v]), means, means.copy()


class RealizableLinearEnv(BanditEnvironment):
    """Control condition: per-arm affine true means, so the linear oracle's
    class contains f*. Rewards are mean + Uniform(-0.1, 0.1), clipped to [0,1].
    """

    def __init__(self, intercepts, slopes):
        self.intercepts = np.asarray(intercepts, dtype=float)
        self.slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
        self.K = len(self.intercepts)
        self.dim = self.slopes.shape[1]

    def true_values(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.clip(self.intercepts + self.slopes @ x, 0.0, 1.0)

    def sample(self, rng):
        x = rng.random(self.dim)
        means = np.clip(self.intercepts + self.slopes @ x, 0.0, 1.0)
        rewards = np.clip(means + rng.uniform(-0.1, 0.1, self.K), 0.0, 1.0)
        return x, means, rewards


def realizable_linear_env(K: int, dim: int, coefficient_seed: int) -> RealizableLinearEnv:
    """Draw a realizable environment with means guaranteed inside [0.1, 0.9]."""
    rng = np.random.Generator(np.random.Philox(coefficient_seed))
    intercepts = rng.uniform(0.35, 0.65, K)
    raw = rng.uniform(-1.0, 1.0, (K, dim))
    scale = rng.uniform(0.05, 0.25, K)
    norms = np.abs(raw).sum(axis=1)
    norms[norms == 0] = 1.0
    slopes = raw * (scale / norms)[:, None]
    return RealizableLinearEnv(intercepts, slopes)


class TabularEnv(BanditEnvironment):
    """Small finite instance for brute-force checks: integer contexts, an
    explicit table of true means, Bernoulli rewards.
    """

    def __init__(self, table, context_probs=None):
        self.table = np.asarray(table, dtype=float)
        if self.table.ndim != 2:
            raise ValueError("table must be (num contexts, K)")
        if np.any(self.table < 0) or np.any(self.table > 1):
            raise ValueError("table entries must be probabilities")
        self.n_contexts, self.K = self.table.shape
        self.dim = 1
        if context_probs is None:
            context_probs = np.full(self.n_contexts, 1.0 / self.n_contexts)
        self.context_probs = np.asarray(context_probs, dtype=float)
        if abs(self.context_probs.sum() - 1.0) > 1e-12 or np.any(self.context_probs < 0):
            raise ValueError("context_probs must be a distribution")
        self._cum = np.cumsum(self.context_probs)

    def true_values(self, x) -> np.ndarray:
        return self.table[int(x)]

    def sample(self, rng):
        i = int(np.searchsorted(self._cum, rng.random()))
        i = min(i, self.n_contexts - 1)
        means = self.table[i]
        rewards = (rng.random(self.K) < means).astype(float)
        return i, means, rewards
