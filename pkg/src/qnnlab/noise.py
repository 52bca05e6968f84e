"""Noise specification and coherent parameter perturbation.

Coherent noise adds i.i.d. N(0, delta^2) draws to circuit parameters only;
head parameters model classical post-processing and stay exact.  Decoherence
(probability p per controlled gate) is executed inside the simulator via the
two-qubit depolarizing channel.

During noisy training every forward evaluation at iteration t sees fresh
draws: the generator is seeded from (run seed, iteration) and emits one row
per sample, so a draw is a deterministic function of (seed, sample index,
iteration).  Both finite-difference evaluations of a pair reuse the same
draws, which keeps the noise out of the difference quotient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSpec:
    delta: float = 0.0  # std-dev of Gaussian parameter noise, radians
    p: float = 0.0  # per-controlled-gate decoherence probability
    seed: int = 0

    def __post_init__(self):
        if self.delta < 0.0:
            raise ValueError("delta must be >= 0")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    @property
    def is_noisy(self) -> bool:
        return self.delta > 0.0 or self.p > 0.0

    def at(self, iteration: int) -> "NoiseSpec":
        """Spec with the seed advanced for one forward evaluation."""
        return NoiseSpec(self.delta, self.p, _mix(self.seed, iteration))


def _mix(seed: int, iteration: int) -> int:
    return int(np.random.SeedSequence([seed, iteration]).generate_state(1)[0])


def perturb(params: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """params + N(0, delta^2) per slot; identical output for identical spec."""
    params = np.asarray(params, dtype=float)
    if spec.delta == 0.0:
        return params
    rng = np.random.default_rng(spec.seed)
    return params + rng.normal(0.0, spec.delta, size=params.shape)


def draw_matrix(spec: NoiseSpec, iteration: int, n_samples: int, n_slots: int) -> np.ndarray:
    """Per-sample perturbations for one batched forward: shape (n_samples, n_slots)."""
    if spec.delta == 0.0:
        return np.zeros((n_samples, n_slots))
    rng = np.random.default_rng(_mix(spec.seed, iteration))
    return rng.normal(0.0, spec.delta, size=(n_samples, n_slots))
