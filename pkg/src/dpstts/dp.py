"""Privacy budget accounting and Laplace noise.

Randomness comes from numpy's Philox counter-based generator. A
``NoiseSource`` is keyed by ``(seed, stream)``; each pipeline stage draws
from its own stream so adding or removing a stage never shifts the noise
another stage sees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidBudget

#: Epsilon value that disables noise (infinite budget, zero Laplace scale).
NOISE_OFF = math.inf

STREAM_START = 1
STREAM_FREQUENCY = 2
STREAM_GENERATION = 3

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta_split: float

    def __post_init__(self):
        check_epsilon(self.epsilon)
        if not 0 < self.delta_split < 1:
            raise InvalidBudget(f"delta must lie in (0, 1), got {self.delta_split!r}")
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "delta_split", float(self.delta_split))

    @property
    def eps_s(self) -> float:
        return self.delta_split * self.epsilon

    @property
    def eps_m(self) -> float:
        if math.isinf(self.epsilon):
            return math.inf
        return self.epsilon - self.eps_s

    @property
    def noise_off(self) -> bool:
        return math.isinf(self.epsilon)


def split_budget(epsilon: float, delta_split: float) -> PrivacyBudget:
    """Share ``epsilon`` between the start distribution and the Markov model."""
    return PrivacyBudget(epsilon, delta_split)


def check_epsilon(eps: float) -> None:
    if isinstance(eps, bool) or not isinstance(eps, (int, float)) or not eps > 0:
        raise InvalidBudget(f"epsilon must be positive, got {eps!r}")


class NoiseSource:
    """Reproducible uniform and Laplace draws for one ``(seed, stream)`` pair."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        key = (self.seed & _MASK64) | ((self.stream & _MASK64) << 64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def substream(self, stream: int) -> "NoiseSource":
        return NoiseSource(self.seed, stream)

    def uniform(self, size=None):
        """Uniforms on the open interval (0, 1), midpoints of a 2**-52 lattice."""
        bits = self._gen.integers(0, 1 << 52, size=size, dtype=np.uint64)
        return (bits + 0.5) * 2.0 ** -52

    def laplace(self, scale: float, size=None):
        """Laplace(0, scale) draws by inverse CDF, one uniform per draw."""
        if not scale > 0:
            raise ValueError(f"scale must be positive, got {scale!r}")
        u = self.uniform(size) - 0.5
        return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def laplace_sample(scale: float, rng: NoiseSource) -> float:
    return float(rng.laplace(scale))


def derive_seed(seed: int, index: int) -> int:
    """Independent 63-bit seed for repetition ``index`` of a seeded experiment."""
    state = np.random.SeedSequence([int(seed) & _MASK64, int(index)]).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))
