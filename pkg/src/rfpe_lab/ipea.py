"""Iterative phase estimation baseline.

Bits of the eigenphase binary fraction are inferred least significant
first. At iteration j of n the experiment runs M = 2^(n-j) applications
of the unitary while the ancilla reference shifter carries the feedback
phase built from the bits already known. ExperimentSetting.theta is a
per-application angle (the physical reference shifter carries M*theta),
so the feedback phase omega is passed as theta = omega / M; the division
by a power of two is exact in binary floating point, which preserves the
algorithm's determinism on noiseless hardware.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .phases import TWO_PI, ExperimentSetting, wrap_phase


@dataclass(frozen=True)
class IpeaConfig:
    n_bits: int = 16
    shots_per_bit: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_bits < 1:
            raise ValueError(f"n_bits must be at least 1, got {self.n_bits}")
        if self.shots_per_bit < 1:
            raise ValueError(f"shots_per_bit must be at least 1, got {self.shots_per_bit}")


@dataclass(frozen=True)
class BitRecord:
    """One inferred bit: significance index k (1 = most significant),
    the queried setting, the vote tally, and the decision."""

    k: int
    m: int
    theta: float
    n0: int
    n1: int
    bit: int


Oracle = Callable[[ExperimentSetting], Union[int, Sequence[int]]]


def theta_feedback(known_low_bits: Sequence[int]) -> float:
    """Feedback phase from already-inferred bits, least significant last.

    Returns 2*pi times the binary fraction 0.0 b1 b2 ..., i.e. the most
    recently inferred bit sits in the second fractional position.
    """
    acc = 0.0
    for i, b in enumerate(known_low_bits):
        if b not in (0, 1):
            raise ValueError(f"bits must be 0 or 1, got {b!r}")
        acc += b * 2.0 ** -(i + 2)
    return wrap_phase(TWO_PI * acc)


def ipea_run(oracle: Oracle, config: IpeaConfig,
             rng: np.random.Generator | None = None) -> tuple[float, list[BitRecord]]:
    """Infer n_bits of the eigenphase, majority-voting each bit.

    Returns the estimate 2*pi*0.b1...bn and the per-bit records. Ties
    are broken by a fair coin, so an RNG is consulted only on ties (and
    by stochastic oracles).
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    n = config.n_bits
    bits: list[int] = []  # most recently inferred first
    records: list[BitRecord] = []
    for j in range(1, n + 1):
        m = 2 ** (n - j)
        omega = theta_feedback(bits)
        setting = ExperimentSetting(m=m, theta=wrap_phase(omega / m))
        n1 = 0
        total = 0
        for _ in range(config.shots_per_bit):
            result = oracle(setting)
            outcomes = [result] if isinstance(result, (int, np.integer)) else list(result)
            for e in outcomes:
                if e not in (0, 1):
                    raise ValueError(f"oracle outcome must be 0 or 1, got {e!r}")
                n1 += e
                total += 1
        n0 = total - n1
        if n1 > n0:
            bit = 1
        elif n0 > n1:
            bit = 0
        else:
            bit = int(rng.integers(0, 2))
        bits.insert(0, bit)
        records.append(BitRecord(k=n - j + 1, m=m, theta=setting.theta,
                                 n0=n0, n1=n1, bit=bit))
    estimate = wrap_phase(TWO_PI * sum(b * 2.0 ** -(i + 1) for i, b in enumerate(bits)))
    return estimate, records


def bit_success_probability(delta_x: float, t2: float, k: int, a: float,
                            convention: str = "printed") -> float:
    """Analytic per-bit success probability.

    The default reproduces the published expression verbatim, whose
    exponent contains a*2^k*t2 (error growing with coherence time).
    convention="inverse_t2" uses a*2^k/t2 instead, which decays with
    increasing coherence time as decoherence physics dictates.
    """
    if t2 < 0.0:
        raise ValueError(f"t2 must be non-negative, got {t2}")
    if a < 0.0:
        raise ValueError(f"a must be non-negative, got {a}")
    if convention == "printed":
        expo = -delta_x * delta_x - a * (2.0 ** k) * t2
    elif convention == "inverse_t2":
        if t2 == 0.0:
            return 0.5
        expo = -delta_x * delta_x - a * (2.0 ** k) / t2
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return 0.5 * (1.0 + math.exp(expo))


BIT_RECORD_FIELDS = ["k", "m", "theta", "n0", "n1", "bit"]


def write_bit_records_csv(records: Iterable[BitRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BIT_RECORD_FIELDS)
        for r in records:
            writer.writerow([r.k, r.m, repr(r.theta), r.n0, r.n1, r.bit])
