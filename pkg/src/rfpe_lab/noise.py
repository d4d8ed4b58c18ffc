"""Noise channels and outcome-extraction strategies.

Three independent knobs model the device: Gaussian jitter on the
physical phase-shifter settings, a depolarizing transform that mixes
the outcome probability toward 1/2 with weight growing in the evolution
length, and shot statistics (binomial at fixed total, or two independent
Poisson counts). A strategy then collapses a measured count pair into
one or more binary data for the estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np


@dataclass(frozen=True)
class SingleShot:
    """One Bernoulli datum per measurement, P(0) = n0/(n0+n1)."""

    label = "single_shot"


@dataclass(frozen=True)
class Sampled:
    """n Bernoulli data per measurement, each with P(0) = n0/(n0+n1)."""

    n: int = 3
    label = "sampled"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"Sampled strategy needs n >= 1, got {self.n}")


@dataclass(frozen=True)
class MajorityVote:
    """One datum per measurement: the more frequent outcome, fair coin on ties."""

    label = "majority_vote"


Strategy = Union[SingleShot, Sampled, MajorityVote]


def strategy_from_name(name: str) -> Strategy:
    """Parse 'single_shot', 'majority_vote', 'sampled' or 'sampled:<n>'."""
    if name == "single_shot":
        return SingleShot()
    if name == "majority_vote":
        return MajorityVote()
    if name == "sampled":
        return Sampled()
    if name.startswith("sampled:"):
        return Sampled(n=int(name.split(":", 1)[1]))
    raise ValueError(f"unknown strategy name {name!r}")


def strategy_name(strategy: Strategy) -> str:
    if isinstance(strategy, Sampled):
        return f"sampled:{strategy.n}"
    return strategy.label


@dataclass(frozen=True)
class NoiseConfig:
    """All noise knobs for the simulated device.

    t2 is in units of the per-controlled-gate time, so the depolarizing
    weight after m repetitions is 1 - exp(-m/t2). t2=None disables
    decoherence entirely.
    """

    sigma_phase: float = 0.0
    t2: Optional[float] = None
    shots: int = 2000
    strategy: Strategy = field(default_factory=MajorityVote)
    poissonian: bool = False

    def __post_init__(self):
        if self.sigma_phase < 0.0:
            raise ValueError(f"sigma_phase must be non-negative, got {self.sigma_phase}")
        if self.t2 is not None and not (self.t2 > 0.0):
            raise ValueError(f"t2 must be positive when set, got {self.t2}")
        if self.shots < 1:
            raise ValueError(f"shots must be at least 1, got {self.shots}")


@dataclass(frozen=True)
class CountPair:
    n0: int
    n1: int

    def __post_init__(self):
        if self.n0 < 0 or self.n1 < 0:
            raise ValueError(f"counts must be non-negative, got ({self.n0}, {self.n1})")
        if self.n0 + self.n1 < 1:
            raise ValueError("count pair must contain at least one event")

    @property
    def total(self) -> int:
        return self.n0 + self.n1


def depolarize(p: float, m: int, t2: float) -> float:
    """Mix an outcome probability toward 1/2 with weight 1 - exp(-m/t2)."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"probability out of range: {p}")
    if not (t2 > 0.0):
        raise ValueError(f"t2 must be positive, got {t2}")
    damp = math.exp(-m / t2)
    return damp * p + 0.5 * (1.0 - damp)


def perturb_phases(nominal: Sequence[float], sigma_phase: float,
                   rng: np.random.Generator) -> list[float]:
    """Independent Gaussian jitter on each phase; sigma 0 is the identity."""
    if sigma_phase < 0.0:
        raise ValueError(f"sigma_phase must be non-negative, got {sigma_phase}")
    if sigma_phase == 0.0:
        return [float(v) for v in nominal]
    draws = rng.normal(np.asarray(nominal, dtype=float), sigma_phase)
    return [float(v) for v in np.atleast_1d(draws)]


def sample_counts(p: float, shots: int, poissonian: bool,
                  rng: np.random.Generator) -> CountPair:
    """Draw a count pair for outcome probability p.

    Poissonian mode fluctuates the total (two independent Poisson counts,
    equivalent to a Poisson total split binomially); otherwise the total
    is exactly `shots`. Empty pairs are redrawn so a vote is always possible.
    """
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"probability out of range: {p}")
    if shots < 1:
        raise ValueError(f"shots must be at least 1, got {shots}")
    while True:
        if poissonian:
            n0 = int(rng.poisson(shots * p))
            n1 = int(rng.poisson(shots * (1.0 - p)))
        else:
            n0 = int(rng.binomial(shots, p))
            n1 = shots - n0
        if n0 + n1 >= 1:
            return CountPair(n0=n0, n1=n1)


def reduce_outcome(counts: CountPair, strategy: Strategy,
                   rng: np.random.Generator) -> list[int]:
    """Collapse a count pair into the binary data fed to the estimator.

    The returned list drives that many sequential Bayesian updates at
    the same experiment setting.
    """
    if isinstance(strategy, MajorityVote):
        if counts.n0 > counts.n1:
            return [0]
        if counts.n1 > counts.n0:
            return [1]
        return [int(rng.integers(0, 2))]
    n = 1 if isinstance(strategy, SingleShot) else strategy.n
    p0 = counts.n0 / counts.total
    return [int(v) for v in (rng.random(n) >= p0).astype(int)]
